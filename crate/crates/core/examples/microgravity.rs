//! Same trap with and without gravity. Without it the arms never spill, so
//! the effective depth equals U0 and the arms keep feeding the centre.

use codt_transport::equilibrium::{equilibrium_report, CloudState, MolassesExtent, Region};
use codt_transport::potential::{effective_depth, TrapConfig};
use codt_transport::units::MICRO;

fn main() -> codt_transport::Result<()> {
    for u0 in [8.0, 50.0, 657.0] {
        let lab = TrapConfig::rubidium_reference(u0 * MICRO)?;
        for (name, cfg) in [("g = 9.81", lab.clone()), ("g = 0   ", lab.with_gravity(0.0))] {
            let r = effective_depth(&cfg);
            print!(
                "U0 {u0:5.0} uK, {name}: U_eff = {:8.3} uK, arms trapped {:5}",
                r.u_eff / MICRO,
                r.trapped_arms
            );
            if r.trapped_center && u0 > 20.0 {
                let state = CloudState::thermal(1.0, 0.475 * r.u_eff)?;
                let roi = Region::default_roi(cfg.geometry.waist);
                let rep = equilibrium_report(&state, &cfg, &roi, &Region::FullTrap, MolassesExtent::default())?;
                print!(", alpha = {:.4}", rep.center_fraction);
            }
            println!();
        }
    }
    Ok(())
}

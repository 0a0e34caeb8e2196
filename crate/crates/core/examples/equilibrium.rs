//! Equilibrium cloud statistics at T = 0.475 U_eff: partition integral,
//! effective centre volume, centre fraction and densities at the edge of
//! the imaging rectangle.

use codt_transport::equilibrium::{equilibrium_report, CloudState, EquilibriumCloud, MolassesExtent, Region};
use codt_transport::potential::{depth_for_effective, TrapConfig};
use codt_transport::units::MICRO;

fn main() -> codt_transport::Result<()> {
    let reference = TrapConfig::rubidium_reference(657.0 * MICRO)?;
    for u_eff in [371.0, 657.0, 1249.0] {
        let cfg = reference.with_depth(depth_for_effective(&reference, u_eff * MICRO)?);
        let state = CloudState::thermal(1.0, 0.475 * u_eff * MICRO)?;
        let roi = Region::default_roi(cfg.geometry.waist);
        let rep = equilibrium_report(&state, &cfg, &roi, &Region::FullTrap, MolassesExtent::default())?;
        println!(
            "U_eff {u_eff:6.0} uK: ln Z = {:.4}, V_c = {:.4e} m^3, alpha = {:.4}",
            rep.log_partition, rep.effective_volume, rep.center_fraction
        );
    }

    // Gravity off: the arms hold atoms and the density stays finite far
    // from the crossing.
    let w = reference.geometry.waist;
    let cfg = reference.with_gravity(0.0);
    let state = CloudState::thermal(1.0, 0.475 * 657.0 * MICRO)?;
    let cloud = EquilibriumCloud::in_trap(&state, &cfg, &Region::FullTrap, MolassesExtent::default())?;
    let n0 = cloud.density([0.0; 3]).density;
    for (label, r) in [("(3w, 0, 0)", [3.0 * w, 0.0, 0.0]), ("(0, 2.25w, 0)", [0.0, 2.25 * w, 0.0])] {
        println!("g = 0: n{label} / n(0) = {:.4e}", cloud.density(r).density / n0);
    }
    Ok(())
}

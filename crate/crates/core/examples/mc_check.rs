//! Importance-sampled Monte Carlo estimate of the partition integrals
//! against the adaptive quadrature.

use codt_transport::equilibrium::{
    mc_weight_integrals, trap_domain, weight_integrals, MolassesExtent, Proposal, Region, QUADRATURE_TOLERANCE,
};
use codt_transport::potential::{effective_depth, CrossedDipoleTrap, TrapConfig};
use codt_transport::units::{K_B, MICRO};

fn main() -> codt_transport::Result<()> {
    let cfg = TrapConfig::rubidium_reference(657.0 * MICRO)?;
    let t = 0.475 * effective_depth(&cfg).u_eff;
    let domain = trap_domain(&cfg, &Region::FullTrap, t, MolassesExtent::default())?;
    let pot = CrossedDipoleTrap::new(&cfg);
    let q = weight_integrals(&pot, &domain, K_B * t, QUADRATURE_TOLERANCE)?;
    println!("quadrature  Z = {:.6e} m^3", q.first);
    let proposal = Proposal::for_trap(&cfg, &domain, t);
    for samples in [10_000, 100_000, 1_000_000] {
        let mc = mc_weight_integrals(&pot, &domain, K_B * t, &proposal, samples, 7)?;
        println!(
            "{samples:>8} samples Z = {:.6e} +- {:.2e} ({:+.3}%)",
            mc.first,
            mc.first_stderr,
            100.0 * (mc.first / q.first - 1.0)
        );
    }
    Ok(())
}

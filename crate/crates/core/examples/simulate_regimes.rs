//! Centre population under loading and loss, one run on each side of the
//! critical initial population.

use codt_transport::dynamics::{classify, simulate, threshold, RateCoefficients, SimulationOptions};
use codt_transport::estimation::CUBIC_CENTIMETRE;

fn main() -> codt_transport::Result<()> {
    let alpha = 0.658;
    let coeffs = RateCoefficients::new(0.068, 4e-12 * CUBIC_CENTIMETRE, 2.0e-12, 0.979)?;
    let star = threshold(alpha, &coeffs)?;
    println!("threshold: {star:?}");

    let n_star = star.value().unwrap_or(1e6);
    for n_c0 in [0.5 * n_star, 2.0 * n_star] {
        let n0 = n_c0 / alpha;
        let c = classify(n_c0, n0, &coeffs)?;
        let sim = simulate(n_c0, n0, &coeffs, &SimulationOptions::default())?;
        println!("\nN_c0 = {n_c0:.4e}: regime {} (dN_c/dt(0) = {:.4e})", c.regime, c.initial_slope);
        if let Some(p) = sim.peak {
            println!("  peak N_c = {:.4e} at t = {:.4} s", p.n_c, p.t);
        }
        for p in sim.trajectory.iter().step_by(20) {
            println!("  t = {:6.3} s  N_c = {:.4e}", p.t, p.n_c);
        }
    }
    Ok(())
}

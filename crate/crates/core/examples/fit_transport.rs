//! Generate a noisy centre-number series and recover the damping and
//! two-body coefficients from it.

use codt_transport::dynamics::{simulate_at, RateCoefficients};
use codt_transport::estimation::{fit_transport, FitInputs, FitOptions, SeriesKind, TimeSeries, CUBIC_CENTIMETRE};
use codt_transport::numerics::ode::OdeOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> codt_transport::Result<()> {
    let fixed = FitInputs {
        gamma_loss: 0.068,
        n0: 2.14e6,
        n_c0: 1.41e6,
        effective_volume: 9e-12,
    };
    let (gamma, beta0) = (0.979, 4e-12 * CUBIC_CENTIMETRE);
    let t: Vec<f64> = (0..15).map(|i| 5.0 * i as f64 / 14.0).collect();
    let truth = RateCoefficients::new(fixed.gamma_loss, beta0, fixed.effective_volume, gamma)?;
    let clean = simulate_at(fixed.n_c0, fixed.n0, &truth, &t, &OdeOptions::default())?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = Normal::new(0.0, 0.03).unwrap();
    let noisy: Vec<f64> = clean.iter().map(|n| n * (1.0 + noise.sample(&mut rng))).collect();
    let series = TimeSeries::from_pairs(SeriesKind::CenterNumber, &t, &noisy)?;

    let fit = fit_transport(&series, fixed, &FitOptions::default())?;
    println!("gamma = {:.4} +- {:.4} 1/s (true {gamma})", fit.gamma, fit.gamma_stderr);
    println!(
        "beta0 = {:.3e} +- {:.1e} cm^3/s (true 4e-12)",
        fit.beta0 / CUBIC_CENTIMETRE,
        fit.beta0_stderr / CUBIC_CENTIMETRE
    );
    println!("{} iterations, residual / signal = {:.3e}", fit.iterations, fit.residual_norm / fit.signal_norm);
    for r in &fit.residuals {
        println!("  t = {:5.3}  N_c = {:.4e}  model = {:.4e}", r.t, r.observed, r.model);
    }
    Ok(())
}

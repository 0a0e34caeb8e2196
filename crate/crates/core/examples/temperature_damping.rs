//! Damping coefficient from a cooling curve and the temperature-to-depth
//! ratio from a set of (T, U_eff) measurements.

use codt_transport::estimation::{eta_ratio, gamma_from_temperature, SeriesKind, TimeSeries};
use codt_transport::units::MICRO;

fn main() -> codt_transport::Result<()> {
    let t: Vec<f64> = (0..101).map(|i| 0.05 * i as f64).collect();
    let temp: Vec<f64> = t.iter().map(|&t| 400.0 * MICRO * (-0.979 * t).exp()).collect();
    let series = TimeSeries::from_pairs(SeriesKind::Temperature, &t, &temp)?;
    let d = gamma_from_temperature(&series)?;
    println!("mean damping coefficient {:.5} 1/s", d.mean);
    for (t, g) in d.times.iter().zip(&d.gamma).step_by(25) {
        println!("  t = {t:4.2} s  gamma = {g:.5}");
    }

    let pairs: Vec<(f64, f64)> = [371.0, 657.0, 1249.0]
        .iter()
        .map(|&u| (0.475 * u * MICRO * (1.0 + 0.01 * (u / 100.0).sin()), u * MICRO))
        .collect();
    let eta = eta_ratio(&pairs)?;
    println!("eta = {:.4} (rms residual {:.2e} K, {} pairs)", eta.eta, eta.residual_rms, eta.pairs);
    Ok(())
}

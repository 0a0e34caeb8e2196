//! Regime map over effective depth and initial centre population, with the
//! boundary where initial loading and loss balance.

use codt_transport::config::RunConfig;
use codt_transport::dynamics::phase_diagram;
use codt_transport::units::MICRO;

fn main() -> codt_transport::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.run.grid.u_eff_points = 5;
    cfg.run.grid.n_c0_points = 9;
    let model = cfg.coefficient_model()?;
    let d = phase_diagram(&cfg.run.grid.u_eff_axis()?, &cfg.run.grid.n_c0_axis()?, &model)?;

    print!("{:>9}", "N_c0 \\ U");
    for u in &d.u_eff {
        print!("{:>7.0}", u / MICRO);
    }
    println!();
    for (j, n) in d.n_c0.iter().enumerate().rev() {
        print!("{n:>9.2e}");
        for col in &d.labels {
            print!("{:>7}", col[j].to_string());
        }
        println!();
    }
    println!("\nboundary:");
    for b in &d.boundary {
        println!("  U_eff = {:6.0} uK  N_c0* = {:.4e}", b.u_eff / MICRO, b.n_c0_star);
    }
    Ok(())
}

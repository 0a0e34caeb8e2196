//! Effective, arm and critical depths of the default crossed trap, and the
//! harmonic frequencies at its minimum.
//!
//! cargo run --example trap_depth -- 657

use codt_transport::potential::{critical_arm_depth, effective_depth, hessian_frequencies, TrapConfig};
use codt_transport::units::MICRO;

fn main() -> codt_transport::Result<()> {
    let u0_uk: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(657.0);
    let cfg = TrapConfig::rubidium_reference(u0_uk * MICRO)?;
    let r = effective_depth(&cfg);
    println!("U0        = {:10.3} uK", u0_uk);
    println!("U_eff     = {:10.3} uK", r.u_eff / MICRO);
    println!("U_ae      = {:10.3} uK", r.u_arm / MICRO);
    println!("critical  = {:10.4} uK", critical_arm_depth(&cfg) / MICRO);
    println!("trapped centre {}, arms {}", r.trapped_center, r.trapped_arms);
    if r.trapped_center {
        let f = hessian_frequencies(&cfg)?;
        let hz: Vec<String> = f.omega.iter().map(|w| format!("{:.1}", w / std::f64::consts::TAU)).collect();
        println!("frequencies {} Hz", hz.join(", "));
    }

    println!("\nU0_uK  U_eff_uK  U_ae_uK");
    for u in [5.0, 9.0, 10.0, 50.0, 200.0, 657.0, 1249.0] {
        let r = effective_depth(&cfg.with_depth(u * MICRO));
        println!("{u:6.0} {:9.3} {:8.3}", r.u_eff / MICRO, r.u_arm / MICRO);
    }
    Ok(())
}

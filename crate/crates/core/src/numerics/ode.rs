//! Dormand-Prince 5(4) embedded Runge-Kutta integrator for scalar ODEs.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before giving up, relative to the span.
    pub min_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-3,
            min_step_fraction: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// An accepted solution point with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub y: f64,
    pub dydt: f64,
}

/// Take one Dormand-Prince step of size `h` from `(t, y)` where `k1 = f(t, y)`.
/// Returns the fifth-order solution, its derivative (FSAL) and the error estimate.
pub fn dopri_step<F>(f: &mut F, t: f64, y: f64, k1: f64, h: f64) -> (f64, f64, f64)
where
    F: FnMut(f64, f64) -> f64,
{
    let k2 = f(t + C2 * h, y + h * A21 * k1);
    let k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2));
    let k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
    let k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    let k6 = f(
        t + h,
        y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
    );
    let y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
    let k7 = f(t + h, y_new);
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    (y_new, k7, err)
}

/// Integrate `dy/dt = f(t, y)` from `(t0, y0)` through every time in `stops`
/// (ascending, all `> t0`). Steps are shortened to land exactly on each stop.
/// Every accepted node is returned, starting with `t0`.
pub fn solve<F>(mut f: F, t0: f64, y0: f64, stops: &[f64], opts: &OdeOptions) -> Result<Vec<Node>>
where
    F: FnMut(f64, f64) -> f64,
{
    let t_end = match stops.last() {
        Some(&t) if t > t0 => t,
        _ => {
            return Ok(vec![Node {
                t: t0,
                y: y0,
                dydt: f(t0, y0),
            }])
        }
    };
    let span = t_end - t0;
    let h_min = opts.min_step_fraction * span;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, y);
    let mut nodes = vec![Node { t, y, dydt: k1 }];

    // initial step from the derivative scale
    let scale = opts.atol + opts.rtol * y.abs();
    let mut h = if k1 != 0.0 {
        (0.01 * scale / k1.abs()).max(1e-6 * span)
    } else {
        1e-3 * span
    }
    .min(0.1 * span);

    let mut stop_idx = 0;
    while stop_idx < stops.len() && stops[stop_idx] <= t0 {
        stop_idx += 1;
    }

    let mut steps = 0usize;
    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let mut hit = false;
        let mut h_try = h;
        if t + h_try >= target || target - (t + h_try) < 1e-12 * span {
            h_try = target - t;
            hit = true;
        }
        let (y_new, k7, err) = dopri_step(&mut f, t, y, k1, h_try);
        let tol = opts.atol + opts.rtol * y.abs().max(y_new.abs());
        let ratio = err.abs() / tol;
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t, h: h_try });
        }
        if ratio <= 1.0 {
            if !y_new.is_finite() {
                return Err(Error::StepUnderflow { t, h: h_try });
            }
            t = if hit { target } else { t + h_try };
            y = y_new;
            k1 = k7;
            nodes.push(Node { t, y, dydt: k1 });
            if hit {
                stop_idx += 1;
            }
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            // do not let a clipped step shrink the next one
            h = h.max(h_try) * grow;
        } else {
            let shrink = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = h_try * shrink;
            if h < h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(nodes)
}

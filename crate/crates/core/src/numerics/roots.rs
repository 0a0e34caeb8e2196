//! Bracketed root refinement.

/// Refine a root of `f` bracketed by `[a, b]` (`f(a)` and `f(b)` of opposite
/// sign, or one of them zero) until the bracket is narrower than `xtol`.
///
/// Returns `None` when the endpoints do not bracket a sign change.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return None;
    }
    // 200 halvings exhaust any finite double interval
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= xtol || mid == a || mid == b {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Bisection on a predicate: `pred(lo)` must be false and `pred(hi)` true.
/// Returns the transition point to within `xtol`.
pub fn bisect_predicate<P>(mut pred: P, mut lo: f64, mut hi: f64, xtol: f64) -> f64
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

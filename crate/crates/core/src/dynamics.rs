//! Centre-population kinetics: loss, loading, the rate equation
//!
//! ```text
//! dN_c/dt = -Gamma N_c - beta N_c^2 + 2 gamma N0 f exp(-f),   f = exp(2 gamma t)
//! ```
//!
//! regime classification, peak finding and the regime phase diagram.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::equilibrium::{effective_volume_with, CloudState, MolassesExtent, Region};
use crate::error::{Error, Result};
use crate::estimation::beta0_collisional;
use crate::numerics::ode::{dopri_step, solve, Node, OdeOptions};
use crate::numerics::roots::bisect_predicate;
use crate::potential::{depth_for_effective, TrapConfig};

/// Coefficients of the rate equation, held constant over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCoefficients {
    /// Background-collision loss rate Gamma, s^-1.
    pub gamma_loss: f64,
    /// Two-body loss coefficient, m^3/s.
    pub beta0: f64,
    /// Effective volume of the centre, m^3.
    pub effective_volume: f64,
    /// `beta0 / V_c`, s^-1 per atom.
    pub beta: f64,
    /// Damping (loading) coefficient, s^-1.
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
}

impl RateCoefficients {
    pub fn new(gamma_loss: f64, beta0: f64, effective_volume: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("Gamma", gamma_loss), ("beta0", beta0), ("gamma", gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(effective_volume > 0.0) || !effective_volume.is_finite() {
            return Err(Error::domain(format!("V_c must be positive, got {effective_volume}")));
        }
        Ok(RateCoefficients {
            gamma_loss,
            beta0,
            effective_volume,
            beta: beta0 / effective_volume,
            gamma,
            alpha: None,
            eta: None,
        })
    }

    /// Coefficients given `beta` directly; `V_c` is set to 1 m^3 so that
    /// `beta0` is numerically equal to `beta`.
    pub fn from_beta(gamma_loss: f64, beta: f64, gamma: f64) -> Result<Self> {
        RateCoefficients::new(gamma_loss, beta, 1.0, gamma)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = Some(alpha);
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        let mut c = RateCoefficients::new(self.gamma_loss, self.beta0, self.effective_volume, gamma)?;
        c.alpha = self.alpha;
        c.eta = self.eta;
        Ok(c)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Flow from the arms into the centre, `2 gamma N0 f exp(-f)` with
/// `f = exp(2 gamma t)`, atoms/s.
pub fn loading_rate(t: f64, gamma: f64, n0: f64) -> f64 {
    let x = 2.0 * gamma * t;
    // f exp(-f) = exp(x - e^x), finite for all t
    2.0 * gamma * n0 * (x - x.exp()).exp()
}

/// Loss from the centre, `Gamma N_c + beta N_c^2`, atoms/s.
pub fn loss_rate(n_c: f64, coeffs: &RateCoefficients) -> f64 {
    coeffs.gamma_loss * n_c + coeffs.beta * n_c * n_c
}

/// Right-hand side of the rate equation.
pub fn rate(t: f64, n_c: f64, n0: f64, coeffs: &RateCoefficients) -> f64 {
    loading_rate(t, coeffs.gamma, n0) - loss_rate(n_c, coeffs)
}

/// Monotone decay (I) or rise to a maximum (II).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    I,
    II,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::I => "I",
            Regime::II => "II",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Regime::I),
            "II" => Ok(Regime::II),
            _ => Err(Error::data(format!("unknown regime label {s:?}"))),
        }
    }
}

/// Regime from the sign of the initial slope; zero counts as I.
pub fn regime_of_slope(slope: f64) -> Regime {
    if slope > 0.0 {
        Regime::II
    } else {
        Regime::I
    }
}

/// Critical initial centre population at fixed `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "n_c0_star")]
pub enum Threshold {
    /// Case II exactly when `N_c0` is below the value.
    Below(f64),
    /// No two-body loss and loading outpaces background loss.
    Always,
    /// Loading never outpaces background loss.
    Never,
}

impl Threshold {
    pub fn regime(&self, n_c0: f64) -> Regime {
        match *self {
            Threshold::Below(x) if n_c0 < x => Regime::II,
            Threshold::Always => Regime::II,
            _ => Regime::I,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Threshold::Below(x) => Some(x),
            _ => None,
        }
    }
}

/// `N_c0* = (2 gamma / e - Gamma alpha) / (alpha beta)`.
pub fn threshold(alpha: f64, coeffs: &RateCoefficients) -> Result<Threshold> {
    check_alpha(alpha)?;
    let drive = 2.0 * coeffs.gamma * (-1.0f64).exp() - coeffs.gamma_loss * alpha;
    Ok(if drive <= 0.0 {
        Threshold::Never
    } else if coeffs.beta == 0.0 {
        Threshold::Always
    } else {
        Threshold::Below(drive / (alpha * coeffs.beta))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub regime: Regime,
    pub threshold: Threshold,
    pub alpha: f64,
    /// Initial slope `dN_c/dt` at t = 0, atoms/s.
    pub initial_slope: f64,
}

/// Classify a start `(N_c0, N0)` with `alpha = N_c0 / N0`.
pub fn classify(n_c0: f64, n0: f64, coeffs: &RateCoefficients) -> Result<Classification> {
    if !(n_c0 > 0.0) || n_c0 > n0 {
        return Err(Error::domain(format!("need 0 < N_c0 <= N0, got N_c0 = {n_c0}, N0 = {n0}")));
    }
    let alpha = n_c0 / n0;
    let th = threshold(alpha, coeffs)?;
    Ok(Classification {
        regime: th.regime(n_c0),
        threshold: th,
        alpha,
        initial_slope: rate(0.0, n_c0, n0, coeffs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    /// s
    pub t: f64,
    pub n_c: f64,
    /// atoms/s
    pub loading: f64,
    /// atoms/s
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// s
    pub t: f64,
    pub n_c: f64,
    /// Rate-equation right-hand side at the located peak, atoms/s.
    pub residual_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub trajectory: Vec<TrajectoryPoint>,
    pub regime: Regime,
    /// Present for case II when the maximum falls within the horizon.
    pub peak: Option<Peak>,
    pub horizon: f64,
    /// Every accepted integrator node.
    #[serde(skip)]
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// s; `None` uses `max(6 / gamma, 5 s)`.
    pub horizon: Option<f64>,
    /// Evenly spaced output samples including both ends.
    pub samples: usize,
    pub ode: OdeOptions,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            horizon: None,
            samples: 201,
            ode: OdeOptions::default(),
        }
    }
}

pub fn default_horizon(gamma: f64) -> f64 {
    if gamma > 0.0 {
        (6.0 / gamma).max(5.0)
    } else {
        5.0
    }
}

fn check_start(n_c0: f64, n0: f64) -> Result<()> {
    if !(n_c0 >= 0.0) || !(n0 >= 0.0) || n_c0 > n0 || !n0.is_finite() {
        return Err(Error::domain(format!("need 0 <= N_c0 <= N0, got N_c0 = {n_c0}, N0 = {n0}")));
    }
    Ok(())
}

/// Integrate the rate equation from `(0, N_c0)`.
pub fn simulate(n_c0: f64, n0: f64, coeffs: &RateCoefficients, opts: &SimulationOptions) -> Result<SimulationResult> {
    check_start(n_c0, n0)?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(coeffs.gamma));
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    if opts.samples < 2 {
        return Err(Error::domain("need at least 2 output samples"));
    }
    let last = opts.samples - 1;
    let stops: Vec<f64> = (1..=last)
        .map(|i| if i == last { horizon } else { horizon * i as f64 / last as f64 })
        .collect();
    let nodes = solve(|t, y| rate(t, y, n0, coeffs), 0.0, n_c0, &stops, &opts.ode)?;
    if let Some(bad) = nodes.iter().find(|n| n.y < -opts.ode.atol) {
        return Err(Error::ModelViolation(format!(
            "centre population went negative ({}) at t = {} s",
            bad.y, bad.t
        )));
    }

    let mut trajectory = Vec::with_capacity(opts.samples);
    let mut next = 0usize;
    for n in &nodes {
        let target = if next == 0 { 0.0 } else { stops[next - 1] };
        if n.t == target {
            trajectory.push(TrajectoryPoint {
                t: n.t,
                n_c: n.y,
                loading: loading_rate(n.t, coeffs.gamma, n0),
                loss: loss_rate(n.y, coeffs),
            });
            next += 1;
            if next > stops.len() {
                break;
            }
        }
    }
    let regime = regime_of_slope(nodes[0].dydt);
    let peak = peak_time(&nodes, n0, coeffs)?;
    Ok(SimulationResult {
        trajectory,
        regime,
        peak,
        horizon,
        nodes,
    })
}

/// Centre population at each requested time (ascending, `>= 0`).
pub fn simulate_at(n_c0: f64, n0: f64, coeffs: &RateCoefficients, times: &[f64], ode: &OdeOptions) -> Result<Vec<f64>> {
    check_start(n_c0, n0)?;
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::domain("sample times must be non-negative"));
    }
    let stops: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let nodes = solve(|t, y| rate(t, y, n0, coeffs), 0.0, n_c0, &stops, ode)?;
    let mut out = Vec::with_capacity(times.len());
    let mut it = nodes.iter();
    for &t in times {
        if t == 0.0 {
            out.push(n_c0);
            continue;
        }
        let node = it
            .by_ref()
            .find(|n| n.t == t)
            .expect("the integrator lands on every stop");
        out.push(node.y);
    }
    Ok(out)
}

/// Locate the maximum of a case II trajectory from its integrator nodes.
///
/// The slope sign change is bracketed between nodes and refined by
/// bisection on the step length of a single Dormand-Prince step from the
/// left node. More than one sign change is a model violation.
pub fn peak_time(nodes: &[Node], n0: f64, coeffs: &RateCoefficients) -> Result<Option<Peak>> {
    let Some(first) = nodes.first() else {
        return Ok(None);
    };
    if regime_of_slope(first.dydt) == Regime::I {
        if let Some(n) = nodes.iter().find(|n| n.dydt > 0.0) {
            return Err(Error::ModelViolation(format!(
                "case I trajectory rises at t = {} s",
                n.t
            )));
        }
        return Ok(None);
    }
    let changes: Vec<usize> = nodes
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0].dydt > 0.0) != (w[1].dydt > 0.0))
        .map(|(i, _)| i)
        .collect();
    match changes.as_slice() {
        [] => Ok(None),
        [i] => {
            let a = nodes[*i];
            let b = nodes[*i + 1];
            let mut f = |t: f64, y: f64| rate(t, y, n0, coeffs);
            let mut at = |h: f64| {
                let (y, k, _) = dopri_step(&mut f, a.t, a.y, a.dydt, h);
                (y, k)
            };
            let span = b.t - a.t;
            let h = bisect_predicate(|h| at(h).1 <= 0.0, 0.0, span, 1e-15 * b.t.max(span));
            let (y, k) = at(h);
            Ok(Some(Peak {
                t: a.t + h,
                n_c: y,
                residual_slope: k,
            }))
        }
        many => Err(Error::ModelViolation(format!(
            "slope changes sign {} times (first near t = {} s)",
            many.len(),
            nodes[many[0]].t
        ))),
    }
}

/// How `beta` is obtained for a given effective depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VolumeModel {
    /// Effective volume of the centre region from the equilibrium cloud
    /// at `T = eta U_eff`.
    Equilibrium,
    /// A fixed effective volume, m^3.
    Fixed { effective_volume: f64 },
}

/// Maps an effective depth to rate coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    /// Geometry, species and environment; the depth is replaced per column.
    pub trap: TrapConfig,
    pub eta: f64,
    pub alpha: f64,
    /// s^-1
    pub gamma_loss: f64,
    /// s^-1
    pub gamma: f64,
    pub loss_probability: f64,
    /// Overrides the collisional `beta0` (m^3/s).
    pub beta0: Option<f64>,
    pub volume: VolumeModel,
    pub roi: Region,
    pub molasses: MolassesExtent,
}

impl CoefficientModel {
    /// Rate coefficients at effective depth `u_eff` (K).
    pub fn coefficients(&self, u_eff: f64) -> Result<RateCoefficients> {
        if !(u_eff > 0.0) {
            return Err(Error::domain(format!("effective depth must be positive, got {u_eff} K")));
        }
        let temperature = self.eta * u_eff;
        let beta0 = match self.beta0 {
            Some(b) => b,
            None => beta0_collisional(temperature, &self.trap.species, self.loss_probability)?,
        };
        let v_c = match self.volume {
            VolumeModel::Fixed { effective_volume } => effective_volume,
            VolumeModel::Equilibrium => {
                let u0 = depth_for_effective(&self.trap, u_eff)?;
                let cfg = self.trap.with_depth(u0);
                let state = CloudState::thermal(1.0, temperature)?;
                effective_volume_with(&state, &cfg, &self.roi, self.molasses)?
            }
        };
        Ok(RateCoefficients::new(self.gamma_loss, beta0, v_c, self.gamma)?
            .with_alpha(self.alpha)?
            .with_eta(self.eta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    /// K
    pub u_eff: f64,
    pub n_c0_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    /// K
    pub u_eff: Vec<f64>,
    pub n_c0: Vec<f64>,
    /// `labels[i][j]` is the regime at `(u_eff[i], n_c0[j])`.
    pub labels: Vec<Vec<Regime>>,
    /// Coefficients used for each column.
    pub coefficients: Vec<RateCoefficients>,
    /// Points where the initial loading and loss rates balance.
    pub boundary: Vec<BoundaryPoint>,
}

/// Initial balance `R(0) - D(0)` at fixed `alpha`, i.e. `N0 = N_c0 / alpha`.
pub fn initial_balance(n_c0: f64, alpha: f64, coeffs: &RateCoefficients) -> (f64, f64) {
    (loading_rate(0.0, coeffs.gamma, n_c0 / alpha), loss_rate(n_c0, coeffs))
}

/// Root of `R(0) = D(0)` along `N_c0` by bisection.
pub fn boundary_point(alpha: f64, coeffs: &RateCoefficients) -> Result<Option<f64>> {
    match threshold(alpha, coeffs)? {
        Threshold::Always | Threshold::Never => Ok(None),
        Threshold::Below(guess) => {
            let ahead = |n: f64| {
                let (r, d) = initial_balance(n, alpha, coeffs);
                d >= r
            };
            let mut lo = guess;
            while ahead(lo) {
                lo *= 0.5;
            }
            let mut hi = guess;
            while !ahead(hi) {
                hi *= 2.0;
            }
            Ok(Some(bisect_predicate(ahead, lo, hi, 1e-13 * guess)))
        }
    }
}

/// Label every `(U_eff, N_c0)` cell by the sign of the initial slope and
/// trace the boundary per column. Columns are evaluated in parallel; the
/// assembled diagram does not depend on evaluation order.
pub fn phase_diagram(u_eff: &[f64], n_c0: &[f64], model: &CoefficientModel) -> Result<PhaseDiagram> {
    if u_eff.is_empty() || n_c0.is_empty() {
        return Err(Error::domain("phase diagram grid is empty"));
    }
    if let Some(n) = n_c0.iter().find(|&&n| !(n > 0.0)) {
        return Err(Error::domain(format!("N_c0 values must be positive, got {n}")));
    }
    check_alpha(model.alpha)?;
    let columns: Vec<Result<(RateCoefficients, Vec<Regime>, Option<f64>)>> = u_eff
        .par_iter()
        .map(|&u| {
            let c = model.coefficients(u)?;
            let labels = n_c0
                .iter()
                .map(|&n| {
                    let (r, d) = initial_balance(n, model.alpha, &c);
                    regime_of_slope(r - d)
                })
                .collect();
            Ok((c, labels, boundary_point(model.alpha, &c)?))
        })
        .collect();
    let mut diagram = PhaseDiagram {
        u_eff: u_eff.to_vec(),
        n_c0: n_c0.to_vec(),
        labels: Vec::with_capacity(u_eff.len()),
        coefficients: Vec::with_capacity(u_eff.len()),
        boundary: Vec::new(),
    };
    for (&u, col) in u_eff.iter().zip(columns) {
        let (c, labels, star) = col?;
        diagram.coefficients.push(c);
        diagram.labels.push(labels);
        if let Some(n) = star {
            diagram.boundary.push(BoundaryPoint { u_eff: u, n_c0_star: n });
        }
    }
    Ok(diagram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{integrate, Tolerance};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lab_like(beta: f64) -> RateCoefficients {
        RateCoefficients::from_beta(0.068, beta, 0.979).unwrap()
    }

    fn tight() -> SimulationOptions {
        SimulationOptions {
            horizon: Some(5.0),
            samples: 51,
            ode: OdeOptions {
                atol: 1e-9,
                ..OdeOptions::default()
            },
        }
    }

    #[test]
    fn loading_rate_values() {
        assert_relative_eq!(loading_rate(0.0, 0.979, 1e6), 2.0 * 0.979 * 1e6 / std::f64::consts::E, max_relative = 1e-15);
        assert_relative_eq!(loading_rate(0.0, 0.979, 1e6), 7.2029e5, max_relative = 1e-4);
        assert_eq!(loading_rate(1e3, 1.0, 1e6), 0.0);
    }

    #[test]
    fn total_loading_is_n0_over_e() {
        for gamma in [0.3, 0.979, 3.0] {
            let r = integrate(|t| [loading_rate(t, gamma, 1e6)], 0.0, 6.0 / gamma, &[], Tolerance::relative(1e-10));
            assert_relative_eq!(r.value[0], 1e6 / std::f64::consts::E, max_relative = 1e-3);
        }
    }

    #[test]
    fn loading_rate_strictly_decreasing() {
        // up to f = e^6, beyond which the rate underflows
        let r: Vec<f64> = (0..300).map(|i| loading_rate(i as f64 * 0.01, 0.979, 1e6)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn loss_rate_values() {
        let zero = RateCoefficients::from_beta(0.0, 0.0, 1.0).unwrap();
        assert_eq!(loss_rate(1e6, &zero), 0.0);
        let c = lab_like(4.5e-7);
        assert_relative_eq!(loss_rate(1.41e6, &c), 0.068 * 1.41e6 + 4.5e-7 * 1.41e6 * 1.41e6, max_relative = 1e-15);
        assert_relative_eq!(loss_rate(1.41e6, &c), 9.905e5, max_relative = 1e-3);
        let n = 3.3e5;
        assert_relative_eq!(loss_rate(2.0 * n, &c) - 2.0 * loss_rate(n, &c), 2.0 * c.beta * n * n, max_relative = 1e-9);
    }

    #[test]
    fn beta_times_volume_is_beta0() {
        let c = RateCoefficients::new(0.07, 4e-18, 3.7e-12, 1.0).unwrap();
        assert_relative_eq!(c.beta * c.effective_volume, c.beta0, max_relative = 1e-15);
        assert!(RateCoefficients::new(-0.1, 4e-18, 3.7e-12, 1.0).is_err());
        assert!(RateCoefficients::new(0.1, 4e-18, 0.0, 1.0).is_err());
    }

    #[test]
    fn exponential_decay_limit() {
        let c = RateCoefficients::from_beta(0.068, 0.0, 0.0).unwrap();
        let opts = SimulationOptions {
            horizon: Some(1.0 / 0.068),
            ..tight()
        };
        let r = simulate(1e6, 1e6, &c, &opts).unwrap();
        let last = r.trajectory.last().unwrap();
        assert_eq!(last.t, 1.0 / 0.068);
        assert_relative_eq!(last.n_c, 1e6 / std::f64::consts::E, max_relative = 1e-6);
        assert_eq!(r.regime, Regime::I);
        assert!(r.peak.is_none());
    }

    #[test]
    fn two_body_limit() {
        let beta = 4.5e-7;
        let c = RateCoefficients::from_beta(0.0, beta, 0.0).unwrap();
        let r = simulate(1.41e6, 2e6, &c, &tight()).unwrap();
        for p in &r.trajectory {
            assert_relative_eq!(p.n_c, 1.41e6 / (1.0 + beta * 1.41e6 * p.t), max_relative = 1e-6);
        }
    }

    #[test]
    fn initial_slope_matches_closed_form() {
        let c = lab_like(4.5e-7);
        let r = simulate(1.41e6, 2.14e6, &c, &tight()).unwrap();
        let expected = -0.068 * 1.41e6 - 4.5e-7 * 1.41e6f64.powi(2) + 2.0 * 0.979 * 2.14e6 / std::f64::consts::E;
        assert_eq!(r.nodes[0].dydt, rate(0.0, 1.41e6, 2.14e6, &c));
        assert_relative_eq!(r.nodes[0].dydt, expected, max_relative = 1e-12);
    }

    #[test]
    fn case_two_rises_then_falls() {
        let c = lab_like(4.5e-7);
        let opts = SimulationOptions {
            samples: 6001,
            ..SimulationOptions::default()
        };
        let r = simulate(1.41e6, 1.41e6 / 0.658, &c, &opts).unwrap();
        assert_eq!(r.regime, Regime::II);
        let peak = r.peak.unwrap();
        let r0 = loading_rate(0.0, c.gamma, 1.41e6 / 0.658);
        assert!(peak.residual_slope.abs() < 1e-6 * r0, "{}", peak.residual_slope);
        let max_slope = r.nodes.iter().map(|n| n.dydt.abs()).fold(0.0, f64::max);
        let sampled = r
            .trajectory
            .iter()
            .max_by(|a, b| a.n_c.total_cmp(&b.n_c))
            .unwrap();
        let slope_there = rate(sampled.t, sampled.n_c, 1.41e6 / 0.658, &c);
        assert!(slope_there.abs() < 1e-3 * max_slope, "{slope_there} vs {max_slope}");
        assert!(peak.n_c >= sampled.n_c);
        assert!(peak.n_c > 1.41e6);
    }

    #[test]
    fn peak_comes_earlier_with_more_two_body_loss() {
        let times: Vec<f64> = [2e-7, 3e-7, 4e-7]
            .iter()
            .map(|&b| {
                let r = simulate(1e6, 2e6, &lab_like(b), &SimulationOptions::default()).unwrap();
                r.peak.unwrap().t
            })
            .collect();
        assert!(times[0] > times[1] && times[1] > times[2], "{times:?}");
    }

    #[test]
    fn classify_reference_point() {
        let c = lab_like(4.5e-7);
        let th = threshold(0.658, &c).unwrap().value().unwrap();
        let hand = (2.0 * 0.979 / std::f64::consts::E - 0.068 * 0.658) / (0.658 * 4.5e-7);
        assert_relative_eq!(th, hand, max_relative = 1e-14);
        assert_relative_eq!(th, 2.2815e6, max_relative = 1e-4);
        let k = classify(1.41e6, 1.41e6 / 0.658, &c).unwrap();
        assert_eq!(k.regime, Regime::II);
    }

    #[test]
    fn no_loading_means_case_one() {
        let c = lab_like(4.5e-7).with_gamma(0.0).unwrap();
        assert_eq!(threshold(0.5, &c).unwrap(), Threshold::Never);
        assert_eq!(classify(10.0, 20.0, &c).unwrap().regime, Regime::I);
    }

    #[test]
    fn no_two_body_loss() {
        let c = lab_like(0.0);
        assert_eq!(threshold(0.5, &c).unwrap(), Threshold::Always);
        let weak = RateCoefficients::from_beta(1.0, 0.0, 0.01).unwrap();
        assert_eq!(threshold(0.9, &weak).unwrap(), Threshold::Never);
    }

    #[test]
    fn threshold_edges_agree_with_initial_slope() {
        let c = lab_like(4.5e-7);
        let alpha = 0.658;
        let th = threshold(alpha, &c).unwrap().value().unwrap();
        for (f, want) in [(1.0 + 1e-9, Regime::I), (1.0 - 1e-9, Regime::II)] {
            let n = th * f;
            let k = classify(n, n / alpha, &c).unwrap();
            assert_eq!(k.regime, want);
            assert_eq!(regime_of_slope(k.initial_slope), want);
        }
    }

    #[test]
    fn boundary_balances_rates() {
        let c = lab_like(4.5e-7);
        let n = boundary_point(0.658, &c).unwrap().unwrap();
        let (r, d) = initial_balance(n, 0.658, &c);
        assert!((r - d).abs() / r.max(d) < 1e-6);
        assert_relative_eq!(n, threshold(0.658, &c).unwrap().value().unwrap(), max_relative = 1e-10);
    }

    fn fixed_model(gamma: f64) -> CoefficientModel {
        CoefficientModel {
            trap: TrapConfig::rubidium_reference(657e-6).unwrap(),
            eta: 0.475,
            alpha: 0.658,
            gamma_loss: 0.068,
            gamma,
            loss_probability: 0.015,
            beta0: None,
            volume: VolumeModel::Fixed { effective_volume: 9e-12 },
            roi: Region::default_roi(55e-6),
            molasses: MolassesExtent::default(),
        }
    }

    #[test]
    fn phase_diagram_straddles_threshold() {
        let m = fixed_model(0.979);
        let u = [400e-6, 800e-6];
        let th: Vec<f64> = u
            .iter()
            .map(|&x| threshold(m.alpha, &m.coefficients(x).unwrap()).unwrap().value().unwrap())
            .collect();
        let n = [0.5 * th[0].min(th[1]), 2.0 * th[0].max(th[1])];
        let d = phase_diagram(&u, &n, &m).unwrap();
        for col in &d.labels {
            assert_eq!(col, &vec![Regime::II, Regime::I]);
        }
        assert_eq!(d.boundary.len(), 2);
        for (b, t) in d.boundary.iter().zip(&th) {
            assert_relative_eq!(b.n_c0_star, *t, max_relative = 1e-10);
        }
    }

    #[test]
    fn stronger_loading_raises_boundary() {
        let u = [300e-6, 600e-6, 900e-6];
        let n = [1e5];
        let a = phase_diagram(&u, &n, &fixed_model(0.979)).unwrap();
        let b = phase_diagram(&u, &n, &fixed_model(9.79)).unwrap();
        for (x, y) in a.boundary.iter().zip(&b.boundary) {
            assert!(y.n_c0_star > x.n_c0_star);
        }
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(phase_diagram(&[], &[1.0], &fixed_model(1.0)).is_err());
        assert!(phase_diagram(&[1e-4], &[], &fixed_model(1.0)).is_err());
    }

    #[test]
    fn start_validation() {
        let c = lab_like(1e-7);
        assert!(simulate(2.0, 1.0, &c, &SimulationOptions::default()).is_err());
        assert!(classify(2.0, 1.0, &c).is_err());
    }

    fn coeff_strategy() -> impl Strategy<Value = (RateCoefficients, f64, f64)> {
        (0.0f64..0.3, 1e-8f64..3e-6, 0.0f64..3.0, 1e4f64..3e6, 0.05f64..1.0).prop_map(|(gl, beta, g, n, alpha)| {
            (RateCoefficients::from_beta(gl, beta, g).unwrap(), n, n / alpha)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn classification_matches_trajectory((c, n_c0, n0) in coeff_strategy()) {
            let k = classify(n_c0, n0, &c).unwrap();
            prop_assert_eq!(k.regime, regime_of_slope(k.initial_slope));
            let r = simulate(n_c0, n0, &c, &SimulationOptions::default()).unwrap();
            prop_assert_eq!(r.regime, k.regime);
            let ys: Vec<f64> = r.nodes.iter().map(|n| n.y).collect();
            let bound = n_c0 + n0 / std::f64::consts::E;
            prop_assert!(ys.iter().all(|&y| y >= 0.0 && y <= bound * (1.0 + 1e-9)));
            match k.regime {
                Regime::I => prop_assert!(ys.windows(2).all(|w| w[1] <= w[0] + 1e-6)),
                Regime::II => {
                    let top = ys.iter().cloned().fold(f64::MIN, f64::max);
                    prop_assert!(top > n_c0);
                }
            }
        }
    }
}

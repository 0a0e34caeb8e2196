//! Model coefficients from physical inputs, and fits of the loading and
//! two-body coefficients to measured centre populations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_at, RateCoefficients};
use crate::error::{Error, Result};
use crate::numerics::ode::OdeOptions;
use crate::numerics::simplex::{minimize, SimplexOptions};
use crate::units::{mean_thermal_speed, Environment, SpeciesConstants};

/// m^3 per cm^3.
pub const CUBIC_CENTIMETRE: f64 = 1e-6;

/// Per-collision loss probability giving `beta0 ~ 4e-12 cm^3/s` at 312 uK
/// for rubidium-87 with the default cross-section.
pub const DEFAULT_LOSS_PROBABILITY: f64 = 0.015;

/// Background-gas loss rate `sigma n_b vbar(T_b)`, s^-1.
pub fn gamma_background(env: &Environment, species: &SpeciesConstants) -> f64 {
    let n_b = env.background_density();
    if n_b == 0.0 {
        return 0.0;
    }
    let v = mean_thermal_speed(env.background_temperature, species.mass)
        .expect("environment and species are validated on construction");
    species.cross_section * n_b * v
}

/// Two-body loss coefficient `sqrt(2) sigma vbar(T) P`, m^3/s.
pub fn beta0_collisional(temperature: f64, species: &SpeciesConstants, loss_probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&loss_probability) {
        return Err(Error::domain(format!(
            "loss probability must lie in [0, 1], got {loss_probability}"
        )));
    }
    let v = mean_thermal_speed(temperature, species.mass)?;
    Ok(std::f64::consts::SQRT_2 * species.cross_section * v * loss_probability)
}

/// What a series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    CenterNumber,
    ArmNumber,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// s
    pub t: f64,
    pub value: f64,
    pub sigma: Option<f64>,
}

/// Samples with strictly increasing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub kind: SeriesKind,
    pub points: Vec<SeriesPoint>,
}

impl TimeSeries {
    pub fn new(kind: SeriesKind, points: Vec<SeriesPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() || !p.value.is_finite() {
                return Err(Error::data(format!("row {i}: non-finite sample")));
            }
            if i > 0 && !(p.t > points[i - 1].t) {
                return Err(Error::data(format!(
                    "row {i}: time {} s does not increase (previous {} s)",
                    p.t,
                    points[i - 1].t
                )));
            }
            let ok = match kind {
                SeriesKind::Temperature => p.value > 0.0,
                _ => p.value >= 0.0,
            };
            if !ok {
                return Err(Error::data(format!("row {i}: value {} out of range", p.value)));
            }
            if let Some(s) = p.sigma {
                if !(s > 0.0) {
                    return Err(Error::data(format!("row {i}: uncertainty must be positive, got {s}")));
                }
            }
        }
        Ok(TimeSeries { kind, points })
    }

    /// Series from parallel slices without uncertainties.
    pub fn from_pairs(kind: SeriesKind, t: &[f64], values: &[f64]) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::data("time and value columns differ in length"));
        }
        let points = t
            .iter()
            .zip(values)
            .map(|(&t, &value)| SeriesPoint { t, value, sigma: None })
            .collect();
        TimeSeries::new(kind, points)
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pointwise damping coefficient `-(1/T) dT/dt` and its time average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingEstimate {
    pub times: Vec<f64>,
    /// s^-1
    pub gamma: Vec<f64>,
    /// Average weighted by the time each sample represents, s^-1.
    pub mean: f64,
}

/// Damping coefficient from a temperature record. Derivatives use
/// three-point formulas on the (possibly non-uniform) grid: centred inside,
/// one-sided at both ends.
pub fn gamma_from_temperature(series: &TimeSeries) -> Result<DampingEstimate> {
    let n = series.len();
    if n < 3 {
        return Err(Error::data(format!("need at least 3 temperature samples, got {n}")));
    }
    let t = series.times();
    let y = series.values();
    if let Some(i) = y.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::domain(format!("row {i}: temperature must be positive")));
    }
    let derivative = |i: usize| -> f64 {
        // Lagrange derivative through (j0, j1, j2) evaluated at t[i]
        let (j0, j1, j2) = if i == 0 {
            (0, 1, 2)
        } else if i == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (i - 1, i, i + 1)
        };
        let (a, b, c) = (t[j0], t[j1], t[j2]);
        let x = t[i];
        y[j0] * ((x - b) + (x - c)) / ((a - b) * (a - c))
            + y[j1] * ((x - a) + (x - c)) / ((b - a) * (b - c))
            + y[j2] * ((x - a) + (x - b)) / ((c - a) * (c - b))
    };
    let gamma: Vec<f64> = (0..n).map(|i| -derivative(i) / y[i]).collect();
    let span = t[n - 1] - t[0];
    let weighted: f64 = (0..n)
        .map(|i| {
            let left = if i > 0 { t[i] - t[i - 1] } else { 0.0 };
            let right = if i + 1 < n { t[i + 1] - t[i] } else { 0.0 };
            0.5 * (left + right) * gamma[i]
        })
        .sum();
    Ok(DampingEstimate {
        times: t,
        gamma,
        mean: weighted / span,
    })
}

/// Least-squares slope of `T` against `U_eff` through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaFit {
    pub eta: f64,
    /// Standard error of the slope; absent for a single pair.
    pub stderr: Option<f64>,
    /// Root-mean-square residual, K.
    pub residual_rms: f64,
    pub pairs: usize,
}

/// `eta = T / U_eff` from `(T, U_eff)` pairs in kelvin.
pub fn eta_ratio(pairs: &[(f64, f64)]) -> Result<EtaFit> {
    if pairs.is_empty() {
        return Err(Error::data("no (T, U_eff) pairs"));
    }
    if let Some((_, u)) = pairs.iter().find(|(_, u)| *u < 0.0 || !u.is_finite()) {
        return Err(Error::domain(format!("effective depth must be positive, got {u}")));
    }
    let suu: f64 = pairs.iter().map(|(_, u)| u * u).sum();
    if !(suu > 0.0) {
        return Err(Error::DegenerateDomain("every effective depth is zero".into()));
    }
    let stu: f64 = pairs.iter().map(|(t, u)| t * u).sum();
    let eta = stu / suu;
    let ssr: f64 = pairs.iter().map(|(t, u)| (t - eta * u).powi(2)).sum();
    let n = pairs.len();
    let stderr = (n >= 2).then(|| (ssr / (n - 1) as f64 / suu).sqrt());
    Ok(EtaFit {
        eta,
        stderr,
        residual_rms: (ssr / n as f64).sqrt(),
        pairs: n,
    })
}

/// Quantities held fixed during a transport fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInputs {
    /// Background loss rate, s^-1.
    pub gamma_loss: f64,
    /// Atoms available for loading.
    pub n0: f64,
    /// Centre population at t = 0.
    pub n_c0: f64,
    /// m^3
    pub effective_volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Starting values of `gamma` (s^-1).
    pub gamma_starts: Vec<f64>,
    /// Starting values of `beta0` (m^3/s).
    pub beta0_starts: Vec<f64>,
    pub max_iterations: usize,
    pub ode: OdeOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gamma_starts: vec![0.3, 1.0, 3.0],
            beta0_starts: vec![1e-12 * CUBIC_CENTIMETRE, 4e-12 * CUBIC_CENTIMETRE, 1.6e-11 * CUBIC_CENTIMETRE],
            max_iterations: 2000,
            ode: OdeOptions::default(),
        }
    }
}

/// One model-vs-data row of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub t: f64,
    pub observed: f64,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// s^-1
    pub gamma: f64,
    /// m^3/s
    pub beta0: f64,
    pub gamma_stderr: f64,
    pub beta0_stderr: f64,
    /// Covariance of `(gamma, beta0)`.
    pub covariance: [[f64; 2]; 2],
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    /// Euclidean norm of the (weighted) data.
    pub signal_norm: f64,
    pub residuals: Vec<Residual>,
    pub fixed: FitInputs,
    /// Index of the winning start in the grid, row-major over `(gamma, beta0)`.
    pub start_index: usize,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective after each optimiser iteration of the winning start.
    pub history: Vec<f64>,
}

// keeps log-parameters inside a range where the ODE stays well-conditioned
const LN_GAMMA_RANGE: (f64, f64) = (-16.0, 6.0);
const LN_BETA0_RANGE: (f64, f64) = (-80.0, -20.0);

fn unpack(p: &[f64]) -> (f64, f64) {
    (
        p[0].clamp(LN_GAMMA_RANGE.0, LN_GAMMA_RANGE.1).exp(),
        p[1].clamp(LN_BETA0_RANGE.0, LN_BETA0_RANGE.1).exp(),
    )
}

struct Problem<'a> {
    series: &'a TimeSeries,
    fixed: FitInputs,
    ode: OdeOptions,
}

impl Problem<'_> {
    fn model(&self, gamma: f64, beta0: f64) -> Result<Vec<f64>> {
        let coeffs = RateCoefficients::new(self.fixed.gamma_loss, beta0, self.fixed.effective_volume, gamma)?;
        simulate_at(self.fixed.n_c0, self.fixed.n0, &coeffs, &self.series.times(), &self.ode)
    }

    fn weighted(&self, model: &[f64]) -> Vec<f64> {
        self.series
            .points
            .iter()
            .zip(model)
            .map(|(p, m)| (m - p.value) / p.sigma.unwrap_or(1.0))
            .collect()
    }

    fn objective(&self, p: &[f64]) -> f64 {
        let (g, b) = unpack(p);
        match self.model(g, b) {
            Ok(m) => self.weighted(&m).iter().map(|r| r * r).sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Fit `gamma` and `beta0` of the centre-population rate equation to a
/// measured series, holding the inputs in `fixed`.
pub fn fit_transport(series: &TimeSeries, fixed: FitInputs, opts: &FitOptions) -> Result<FitResult> {
    if series.kind != SeriesKind::CenterNumber {
        return Err(Error::data("transport fits need a centre-number series"));
    }
    if series.len() < 5 {
        return Err(Error::data(format!("need at least 5 samples, got {}", series.len())));
    }
    if series.points[0].t < 0.0 {
        return Err(Error::data("sample times must be non-negative"));
    }
    if !(fixed.gamma_loss >= 0.0 && fixed.n0 > 0.0 && fixed.n_c0 > 0.0 && fixed.effective_volume > 0.0) {
        return Err(Error::domain(format!("fixed inputs must be positive: {fixed:?}")));
    }
    if opts.gamma_starts.is_empty() || opts.beta0_starts.is_empty() {
        return Err(Error::config("empty start grid"));
    }
    let problem = Problem {
        series,
        fixed,
        ode: opts.ode,
    };
    let starts: Vec<[f64; 2]> = opts
        .gamma_starts
        .iter()
        .flat_map(|&g| opts.beta0_starts.iter().map(move |&b| [g.ln(), b.ln()]))
        .collect();
    let signal: f64 = series
        .points
        .iter()
        .map(|p| (p.value / p.sigma.unwrap_or(1.0)).powi(2))
        .sum();
    let simplex = SimplexOptions {
        initial_step: vec![0.5, 0.5],
        max_iterations: opts.max_iterations,
        ftol_rel: 1e-12,
        ftol_abs: 1e-20 * signal,
        xtol: 1e-7,
    };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| minimize(|p| problem.objective(p), x0, &simplex))
        .collect();
    // deterministic argmin, ties to the lowest index
    let (start_index, best) = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &crate::numerics::simplex::SimplexResult)>, |acc, (i, r)| match acc {
            Some((_, b)) if b.f <= r.f => acc,
            _ => Some((i, r)),
        })
        .expect("start grid is non-empty");
    let (gamma, beta0) = unpack(&best.x);
    if !best.converged || !best.f.is_finite() {
        return Err(Error::NoConvergence {
            iterations: best.iterations,
            best_objective: best.f,
            best_parameters: vec![gamma, beta0],
        });
    }

    let model = problem.model(gamma, beta0)?;
    let weighted = problem.weighted(&model);
    let residual_norm = weighted.iter().map(|r| r * r).sum::<f64>().sqrt();
    let signal_norm = signal.sqrt();
    let covariance = covariance(&problem, gamma, beta0, residual_norm)?;

    Ok(FitResult {
        gamma,
        beta0,
        gamma_stderr: covariance[0][0].max(0.0).sqrt(),
        beta0_stderr: covariance[1][1].max(0.0).sqrt(),
        covariance,
        residual_norm,
        signal_norm,
        residuals: series
            .points
            .iter()
            .zip(&model)
            .map(|(p, &m)| Residual {
                t: p.t,
                observed: p.value,
                model: m,
            })
            .collect(),
        fixed,
        start_index,
        iterations: best.iterations,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        history: best.history.clone(),
    })
}

/// `s^2 (J^T J)^-1` with the Jacobian by central differences in log space,
/// mapped back to linear parameters.
fn covariance(problem: &Problem, gamma: f64, beta0: f64, residual_norm: f64) -> Result<[[f64; 2]; 2]> {
    let h = 1e-4;
    let base = [gamma.ln(), beta0.ln()];
    let mut jac = vec![[0.0; 2]; problem.series.len()];
    for k in 0..2 {
        let mut up = base;
        let mut dn = base;
        up[k] += h;
        dn[k] -= h;
        let (gu, bu) = (up[0].exp(), up[1].exp());
        let (gd, bd) = (dn[0].exp(), dn[1].exp());
        let ru = problem.weighted(&problem.model(gu, bu)?);
        let rd = problem.weighted(&problem.model(gd, bd)?);
        let scale = [gamma, beta0][k];
        for (i, row) in jac.iter_mut().enumerate() {
            // d r / d theta = (d r / d ln theta) / theta
            row[k] = (ru[i] - rd[i]) / (2.0 * h) / scale;
        }
    }
    let mut jtj = [[0.0; 2]; 2];
    for row in &jac {
        for a in 0..2 {
            for b in 0..2 {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let dof = (problem.series.len() as f64 - 2.0).max(1.0);
    let s2 = residual_norm * residual_norm / dof;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Ok([[f64::INFINITY; 2]; 2]);
    }
    Ok([
        [s2 * jtj[1][1] / det, -s2 * jtj[0][1] / det],
        [-s2 * jtj[1][0] / det, s2 * jtj[0][0] / det],
    ])
}

//! One function per CLI subcommand. Each returns a human summary, a JSON
//! document and any CSV tables; the binary only decides where they go.

use serde::Serialize;

use crate::config::RunConfig;
use crate::dynamics::{
    classify, phase_diagram, simulate, Classification, Peak, PhaseDiagram, RateCoefficients, Regime,
    SimulationOptions,
};
use crate::equilibrium::{
    equilibrium_report, mc_weight_integrals, trap_domain, weight_integrals, CloudState, EquilibriumReport,
    McEstimate, Proposal, Region, WeightIntegrals,
};
use crate::error::{Error, Result};
use crate::estimation::{fit_transport, FitInputs, FitOptions, FitResult, CUBIC_CENTIMETRE};
use crate::potential::{
    critical_arm_depth, effective_depth, hessian_frequencies, CrossedDipoleTrap, DepthReport, TrapFrequencies,
};
use crate::report::{self, Document};
use crate::units::{K_B, MICRO};

/// Named CSV table produced by a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Trajectory,
    Grid,
    Boundary,
    Temperature,
    Residuals,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub summary: String,
    pub document: String,
    pub tables: Vec<(Table, String)>,
}

impl Output {
    pub fn table(&self, which: Table) -> Option<&str> {
        self.tables.iter().find(|(t, _)| *t == which).map(|(_, s)| s.as_str())
    }
}

fn uk(x: f64) -> f64 {
    x / MICRO
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthOutput {
    pub depth_uk: f64,
    pub effective_depth_uk: f64,
    pub arm_depth_uk: f64,
    pub critical_arm_depth_uk: f64,
    pub report: DepthReport,
    pub frequencies: Option<TrapFrequencies>,
}

pub fn cmd_depth(cfg: &RunConfig) -> Result<Output> {
    let trap = cfg.trap()?;
    let r = effective_depth(&trap);
    let frequencies = if r.trapped_center { Some(hessian_frequencies(&trap)?) } else { None };
    let out = DepthOutput {
        depth_uk: uk(trap.depth),
        effective_depth_uk: uk(r.u_eff),
        arm_depth_uk: uk(r.u_arm),
        critical_arm_depth_uk: uk(critical_arm_depth(&trap)),
        report: r,
        frequencies,
    };
    let mut summary = format!(
        "U0 = {:.3} uK\nU_eff = {:.3} uK\nU_ae = {:.3} uK\ncritical arm depth = {:.4} uK\ntrapped centre = {}, trapped arms = {}\n",
        out.depth_uk, out.effective_depth_uk, out.arm_depth_uk, out.critical_arm_depth_uk, r.trapped_center, r.trapped_arms
    );
    if let Some(f) = &out.frequencies {
        summary.push_str(&format!(
            "trap frequencies = {:.2}, {:.2}, {:.2} Hz\n",
            f.omega[0] / std::f64::consts::TAU,
            f.omega[1] / std::f64::consts::TAU,
            f.omega[2] / std::f64::consts::TAU
        ));
    }
    Ok(Output {
        summary,
        document: Document::new("depth", &out).to_json()?,
        tables: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumOutput {
    pub temperature_uk: f64,
    pub effective_depth_uk: f64,
    pub report: EquilibriumReport,
}

pub fn cmd_equilibrium(cfg: &RunConfig) -> Result<Output> {
    let trap = cfg.trap()?;
    let t = cfg.temperature(&trap);
    let state = CloudState::thermal(cfg.run.n0, t)?;
    let rep = equilibrium_report(&state, &trap, &cfg.roi(), &Region::FullTrap, cfg.molasses())?;
    let out = EquilibriumOutput {
        temperature_uk: uk(t),
        effective_depth_uk: uk(effective_depth(&trap).u_eff),
        report: rep,
    };
    let summary = format!(
        "T = {:.3} uK (U_eff = {:.3} uK)\nln Z = {:.6} (Z in m^3)\nV_c = {:.6e} m^3\nalpha = {:.6}\npeak at z = {:.4} um\n",
        out.temperature_uk,
        out.effective_depth_uk,
        rep.log_partition,
        rep.effective_volume,
        rep.center_fraction,
        rep.peak_location[2] / MICRO
    );
    Ok(Output {
        summary,
        document: Document::new("equilibrium", &out).to_json()?,
        tables: Vec::new(),
    })
}

fn start(cfg: &RunConfig, n_c0: Option<f64>, n0: Option<f64>) -> (f64, f64) {
    (n_c0.unwrap_or(cfg.run.n_c0), n0.unwrap_or(cfg.run.n0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub n_c0: f64,
    pub n0: f64,
    pub coefficients: RateCoefficients,
    pub classification: Classification,
    pub regime: Regime,
    pub peak: Option<Peak>,
    pub horizon_s: f64,
}

pub fn cmd_simulate(cfg: &RunConfig, n_c0: Option<f64>, n0: Option<f64>) -> Result<Output> {
    let (n_c0, n0) = start(cfg, n_c0, n0);
    if n_c0 > n0 {
        return Err(Error::domain(format!("N_c0 = {n_c0} exceeds N0 = {n0}")));
    }
    let coeffs = cfg.rate_coefficients()?;
    let opts = SimulationOptions {
        horizon: cfg.run.horizon_s,
        samples: cfg.run.samples,
        ode: cfg.ode(),
    };
    let sim = simulate(n_c0, n0, &coeffs, &opts)?;
    let out = SimulateOutput {
        n_c0,
        n0,
        coefficients: coeffs,
        classification: classify(n_c0, n0, &coeffs)?,
        regime: sim.regime,
        peak: sim.peak,
        horizon_s: sim.horizon,
    };
    let peak = match sim.peak {
        Some(p) => format!("t_m = {:.6} s, N_c(t_m) = {:.6e}", p.t, p.n_c),
        None => "no interior maximum".into(),
    };
    let summary = format!(
        "regime {}; {}\nGamma = {:.5} 1/s, gamma = {:.5} 1/s, beta0 = {:.4e} cm^3/s, V_c = {:.4e} m^3, beta = {:.4e} 1/s\n",
        sim.regime,
        peak,
        coeffs.gamma_loss,
        coeffs.gamma,
        coeffs.beta0 / CUBIC_CENTIMETRE,
        coeffs.effective_volume,
        coeffs.beta
    );
    Ok(Output {
        summary,
        document: Document::new("simulate", &out).to_json()?,
        tables: vec![(Table::Trajectory, report::trajectory_csv(&sim.trajectory))],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOutput {
    pub n_c0: f64,
    pub n0: f64,
    pub coefficients: RateCoefficients,
    pub classification: Classification,
}

pub fn cmd_classify(cfg: &RunConfig, n_c0: Option<f64>, n0: Option<f64>) -> Result<Output> {
    let (n_c0, n0) = start(cfg, n_c0, n0);
    let coeffs = cfg.rate_coefficients()?;
    let c = classify(n_c0, n0, &coeffs)?;
    let threshold = match c.threshold.value() {
        Some(x) => format!("N_c0* = {x:.6e} (margin {:+.3e})", x - n_c0),
        None => format!("{:?}", c.threshold),
    };
    let summary = format!(
        "regime {} at N_c0 = {n_c0:.6e}, alpha = {:.4}; {threshold}; dN_c/dt(0) = {:.6e} atoms/s\n",
        c.regime, c.alpha, c.initial_slope
    );
    let out = ClassifyOutput {
        n_c0,
        n0,
        coefficients: coeffs,
        classification: c,
    };
    Ok(Output {
        summary,
        document: Document::new("classify", &out).to_json()?,
        tables: Vec::new(),
    })
}

pub fn cmd_fit(cfg: &RunConfig, data_csv: &str) -> Result<Output> {
    let series = report::read_series_csv(data_csv)?;
    let coeffs = cfg.rate_coefficients()?;
    let fixed = FitInputs {
        gamma_loss: coeffs.gamma_loss,
        n0: cfg.run.n0,
        n_c0: cfg.run.n_c0,
        effective_volume: coeffs.effective_volume,
    };
    let opts = FitOptions {
        ode: cfg.ode(),
        ..FitOptions::default()
    };
    let fit: FitResult = fit_transport(&series, fixed, &opts)?;
    let summary = format!(
        "gamma = {:.6} +- {:.6} 1/s\nbeta0 = {:.6e} +- {:.3e} cm^3/s\nresidual norm = {:.6e} (signal {:.6e})\n",
        fit.gamma,
        fit.gamma_stderr,
        fit.beta0 / CUBIC_CENTIMETRE,
        fit.beta0_stderr / CUBIC_CENTIMETRE,
        fit.residual_norm,
        fit.signal_norm
    );
    Ok(Output {
        summary,
        document: Document::new("fit", &fit).to_json()?,
        tables: vec![(Table::Residuals, report::residual_csv(&fit.residuals))],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseOutput {
    pub alpha: f64,
    pub eta: f64,
    pub diagram: PhaseDiagram,
}

pub fn cmd_phase_diagram(cfg: &RunConfig) -> Result<Output> {
    let model = cfg.coefficient_model()?;
    let u = cfg.run.grid.u_eff_axis()?;
    let n = cfg.run.grid.n_c0_axis()?;
    let crit = critical_arm_depth(&model.trap);
    if let Some(bad) = u.iter().find(|&&x| x <= crit) {
        return Err(Error::domain(format!(
            "U_eff = {:.3} uK is not above the critical arm depth {:.3} uK",
            uk(*bad),
            uk(crit)
        )));
    }
    let d = phase_diagram(&u, &n, &model)?;
    let temps: Vec<(f64, f64)> = u.iter().map(|&x| (x, model.eta * x)).collect();
    let mut summary = String::new();
    for b in &d.boundary {
        summary.push_str(&format!("U_eff = {:.3} uK: N_c0* = {:.6e}\n", uk(b.u_eff), b.n_c0_star));
    }
    let out = PhaseOutput {
        alpha: model.alpha,
        eta: model.eta,
        diagram: d,
    };
    Ok(Output {
        summary,
        document: Document::new("phase-diagram", &out).to_json()?,
        tables: vec![
            (Table::Grid, report::grid_csv(&out.diagram)),
            (Table::Boundary, report::boundary_csv(&out.diagram.boundary)),
            (Table::Temperature, report::temperature_csv(&temps)),
        ],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct McCheckOutput {
    pub temperature_uk: f64,
    pub seed: u64,
    pub quadrature: WeightIntegrals,
    pub monte_carlo: McEstimate,
    /// `(MC - quadrature) / quadrature` for `int w`.
    pub relative_difference: f64,
    /// Difference in units of the MC standard error.
    pub standard_errors: f64,
}

pub fn cmd_mc_check(cfg: &RunConfig, seed: u64) -> Result<Output> {
    let trap = cfg.trap()?;
    let t = cfg.temperature(&trap);
    let domain = trap_domain(&trap, &Region::FullTrap, t, cfg.molasses())?;
    let pot = CrossedDipoleTrap::new(&trap);
    let kt = K_B * t;
    let q = weight_integrals(&pot, &domain, kt, cfg.run.quadrature_rtol)?;
    let proposal = Proposal::for_trap(&trap, &domain, t);
    let mc = mc_weight_integrals(&pot, &domain, kt, &proposal, cfg.run.mc_samples, seed)?;
    let diff = mc.first - q.first;
    let out = McCheckOutput {
        temperature_uk: uk(t),
        seed,
        quadrature: q,
        monte_carlo: mc,
        relative_difference: diff / q.first,
        standard_errors: diff / mc.first_stderr,
    };
    let summary = format!(
        "quadrature int w = {:.8e} m^3\nmonte carlo int w = {:.8e} +- {:.2e} m^3 ({} samples, seed {seed})\nrelative difference = {:+.3e} ({:+.2} standard errors)\n",
        q.first, mc.first, mc.first_stderr, mc.samples, out.relative_difference, out.standard_errors
    );
    Ok(Output {
        summary,
        document: Document::new("mc-check", &out).to_json()?,
        tables: Vec::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemaCheckOutput {
    pub files: Vec<(String, report::SchemaReport)>,
}

/// Validate each `(name, contents)` pair; fails on the first bad file.
pub fn cmd_schema_check(files: &[(String, String)]) -> Result<Output> {
    let mut out = SchemaCheckOutput { files: Vec::new() };
    let mut summary = String::new();
    for (name, text) in files {
        let r = report::schema_check(text).map_err(|e| Error::data(format!("{name}: {e}")))?;
        summary.push_str(&format!("{name}: ok ({:?}, {} rows)\n", r.kind, r.rows));
        out.files.push((name.clone(), r));
    }
    Ok(Output {
        summary,
        document: Document::new("schema-check", &out).to_json()?,
        tables: Vec::new(),
    })
}

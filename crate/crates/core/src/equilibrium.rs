//! Quasi-static equilibrium statistics of a cloud held in the trap.
//!
//! The cloud is described by a Boltzmann density `n(r) = N w(r) / Z` over a
//! bounded domain. For domains built from a [`TrapConfig`], the weight is the
//! Boltzmann factor of a Maxwell-Boltzmann gas truncated at the escape
//! energy `E_esc`:
//!
//! ```text
//! w(r) = exp(-(U(r) - U_ref)/kT) * P(3/2, (E_esc - U(r))/kT),   U(r) < E_esc
//! ```
//!
//! where `P` is the regularised lower incomplete gamma function. Deep inside
//! the trap `P -> 1` and the plain Boltzmann factor is recovered; near the
//! rim only the atoms with too little kinetic energy to leave are counted.
//! Without gravity the escape energy is zero, the potential far from the
//! beams. With gravity it is the saddle energy and the domain is floored at
//! the saddle height. Hand-built [`Domain`]s without an escape energy use
//! the plain Boltzmann factor.
//!
//! `U_ref` is the potential at the trap minimum; it keeps the weights finite
//! for cold clouds and cancels in every normalised quantity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate, NeumaierSum, Tolerance};
use crate::potential::{effective_depth, CrossedDipoleTrap, Potential, TrapConfig};
use crate::units::K_B;

/// Snapshot of the trapped ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudState {
    /// s
    pub time: f64,
    /// Atoms in the centre region.
    pub center_number: f64,
    /// Atoms in the whole trap.
    pub total_number: f64,
    /// K
    pub temperature: f64,
}

impl CloudState {
    pub fn new(time: f64, center_number: f64, total_number: f64, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::domain(format!("temperature must be positive, got {temperature} K")));
        }
        if !(center_number >= 0.0 && center_number <= total_number) || !total_number.is_finite() {
            return Err(Error::domain(format!(
                "need 0 <= N_c <= N, got N_c = {center_number}, N = {total_number}"
            )));
        }
        Ok(CloudState {
            time,
            center_number,
            total_number,
            temperature,
        })
    }

    /// A cloud of `total_number` atoms at `temperature`, at t = 0.
    pub fn thermal(total_number: f64, temperature: f64) -> Result<Self> {
        CloudState::new(0.0, total_number, total_number, temperature)
    }
}

/// Extent of the molasses the trap was loaded from, m. Bounds the arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MolassesExtent {
    pub l1: f64,
    pub l2: f64,
}

impl Default for MolassesExtent {
    fn default() -> Self {
        MolassesExtent { l1: 4e-3, l2: 4e-3 }
    }
}

/// Integration regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    /// `l1 x l2` rectangle in the x-y plane (m), z over the whole bound range.
    CenterRoi { l1: f64, l2: f64 },
    /// The whole bound domain.
    FullTrap,
    /// Centred box with the given half-extents (m), clipped to the bound domain.
    CustomBox { half_extents: [f64; 3] },
}

impl Region {
    /// The imaging rectangle `6 w0 x 4.5 w0`.
    pub fn default_roi(waist: f64) -> Self {
        Region::CenterRoi {
            l1: 6.0 * waist,
            l2: 4.5 * waist,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::CenterRoi { l1, l2 } => l1 > 0.0 && l2 > 0.0,
            Region::FullTrap => true,
            Region::CustomBox { half_extents } => half_extents.iter().all(|&h| h > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("region extents must be positive: {self:?}")))
        }
    }
}

/// Where features of the integrand sit, so the quadrature can split there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureHints {
    pub centre: [f64; 3],
    /// Characteristic widths of the central feature per axis, m.
    pub widths: Vec<[f64; 3]>,
    /// In-plane slopes `dy/dx` of ridges through the centre.
    pub ridge_slopes: Vec<f64>,
    /// Characteristic half-widths of those ridges along y and z, m.
    pub ridge_widths: Vec<[f64; 2]>,
}

impl FeatureHints {
    pub fn centred(centre: [f64; 3], width: [f64; 3]) -> Self {
        FeatureHints {
            centre,
            widths: vec![width],
            ridge_slopes: Vec::new(),
            ridge_widths: Vec::new(),
        }
    }
}

/// An axis-aligned box, optionally truncated at an escape energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    /// J. `None` means the plain Boltzmann factor over the whole box.
    pub escape_energy: Option<f64>,
    /// J, subtracted before exponentiation.
    pub reference_energy: f64,
    pub hints: FeatureHints,
}

impl Domain {
    pub fn boxed(lower: [f64; 3], upper: [f64; 3]) -> Self {
        let centre = std::array::from_fn(|i| 0.5 * (lower[i] + upper[i]));
        let width = std::array::from_fn(|i| 0.25 * (upper[i] - lower[i]));
        Domain {
            lower,
            upper,
            escape_energy: None,
            reference_energy: 0.0,
            hints: FeatureHints::centred(centre, width),
        }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| (self.upper[i] - self.lower[i]).max(0.0)).product()
    }

    pub fn contains(&self, r: [f64; 3]) -> bool {
        (0..3).all(|i| r[i] >= self.lower[i] && r[i] <= self.upper[i])
    }

    /// True if `other`'s box lies inside this one.
    pub fn encloses(&self, other: &Domain) -> bool {
        let slack = |i: usize| 1e-12 * (self.upper[i] - self.lower[i]);
        (0..3).all(|i| other.lower[i] >= self.lower[i] - slack(i) && other.upper[i] <= self.upper[i] + slack(i))
    }

    /// Statistical weight of a point with potential energy `u` (J).
    #[inline]
    pub fn weight(&self, u: f64, kt: f64) -> f64 {
        let boltzmann = (-(u - self.reference_energy) / kt).exp();
        match self.escape_energy {
            None => boltzmann,
            Some(e) if u < e => boltzmann * bound_fraction((e - u) / kt),
            Some(_) => 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.volume() > 0.0) {
            return Err(Error::DegenerateDomain(format!(
                "box {:?}..{:?} has zero volume",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Fraction of a Maxwell-Boltzmann velocity distribution with kinetic
/// energy below `kappa kT`: the regularised incomplete gamma `P(3/2, kappa)`.
pub fn bound_fraction(kappa: f64) -> f64 {
    if !(kappa > 0.0) {
        return 0.0;
    }
    if kappa < 1e-3 {
        // series: 4/(3 sqrt(pi)) k^{3/2} (1 - 3k/5 + 3k^2/14)
        return 4.0 / (3.0 * PI.sqrt()) * kappa.powf(1.5) * (1.0 - 0.6 * kappa + 3.0 / 14.0 * kappa * kappa);
    }
    let s = kappa.sqrt();
    libm::erf(s) - 2.0 * (kappa / PI).sqrt() * (-kappa).exp()
}

/// Build the integration domain for `region` around the configured trap.
pub fn trap_domain(cfg: &TrapConfig, region: &Region, temperature: f64, molasses: MolassesExtent) -> Result<Domain> {
    region.validate()?;
    let report = effective_depth(cfg);
    if !report.trapped_center {
        return Err(Error::DegenerateDomain(
            "the crossing holds no atoms under this gravity".into(),
        ));
    }
    let w = cfg.geometry.waist;
    let zr = cfg.geometry.rayleigh_length();
    let trap = CrossedDipoleTrap::new(cfg);
    let z_min = report.z_min.unwrap_or(0.0);
    let hx = (3.0 * zr).min(0.5 * molasses.l1);
    let hy = (3.0 * zr).min(0.5 * molasses.l2);
    let hz = 3.0 * w;
    let floor = report.z_saddle.map_or(-hz, |zs| zs.max(-hz));
    let escape = match report.z_saddle {
        Some(zs) => trap.energy([0.0, 0.0, zs]),
        None => 0.0,
    };
    let (bx, by, bz) = match *region {
        Region::FullTrap => (hx, hy, hz),
        Region::CenterRoi { l1, l2 } => ((0.5 * l1).min(hx), (0.5 * l2).min(hy), hz),
        Region::CustomBox { half_extents: h } => (h[0].min(hx), h[1].min(hy), h[2].min(hz)),
    };
    let lower = [-bx, -by, (-bz).max(floor)];
    let upper = [bx, by, bz];

    // thermal width relative to the waist, capped at the waist
    let s = (temperature / (4.0 * cfg.depth)).sqrt().min(1.0);
    let half = 0.5 * cfg.geometry.angle;
    let (sin_h, cos_h) = (half.sin(), half.cos());
    let axis = [w / sin_h.max(1e-3), w / cos_h.max(1e-3), w];
    let widths = vec![
        [s * axis[0], s * axis[1], s * axis[2]],
        [axis[0], axis[1], axis[2]],
    ];
    let ridge = [w / cos_h.max(1e-3), w];
    let domain = Domain {
        lower,
        upper,
        escape_energy: Some(escape),
        reference_energy: trap.energy([0.0, 0.0, z_min]),
        hints: FeatureHints {
            centre: [0.0, 0.0, z_min],
            widths,
            ridge_slopes: vec![half.tan(), -half.tan()],
            ridge_widths: vec![[s * ridge[0], s * ridge[1]], ridge],
        },
    };
    domain.check()?;
    Ok(domain)
}

/// `int w` and `int w^2` over a domain (in the domain's reference scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightIntegrals {
    /// m^3
    pub first: f64,
    /// m^3
    pub second: f64,
    /// Estimated absolute errors.
    pub first_error: f64,
    pub second_error: f64,
}

impl WeightIntegrals {
    /// `(int w)^2 / int w^2`, m^3.
    pub fn effective_volume(&self) -> f64 {
        self.first * self.first / self.second
    }
}

fn breakpoints(centre: f64, widths: impl Iterator<Item = f64>, out: &mut Vec<f64>) {
    out.push(centre);
    for w in widths {
        for k in [1.0, 3.0, 6.0] {
            out.push(centre - k * w);
            out.push(centre + k * w);
        }
    }
}

/// Deterministic nested adaptive Gauss-Kronrod quadrature of the weight
/// and its square. `rel_tol` applies per axis.
pub fn weight_integrals<P: Potential + ?Sized>(pot: &P, domain: &Domain, kt: f64, rel_tol: f64) -> Result<WeightIntegrals> {
    domain.check()?;
    if !(kt > 0.0) {
        return Err(Error::domain(format!("kT must be positive, got {kt}")));
    }
    let hints = &domain.hints;
    let mut xb = Vec::new();
    breakpoints(hints.centre[0], hints.widths.iter().map(|w| w[0]), &mut xb);
    let mut zb = Vec::new();
    breakpoints(hints.centre[2], hints.widths.iter().map(|w| w[2]), &mut zb);
    for rw in &hints.ridge_widths {
        for k in [1.0, 3.0] {
            zb.push(hints.centre[2] - k * rw[1]);
            zb.push(hints.centre[2] + k * rw[1]);
        }
    }
    let tol = Tolerance {
        relative: rel_tol,
        absolute: 0.0,
        max_intervals: 2000,
    };

    let column = |x: f64, y: f64| -> [f64; 2] {
        integrate(
            |z| {
                let w = domain.weight(pot.energy([x, y, z]), kt);
                [w, w * w]
            },
            domain.lower[2],
            domain.upper[2],
            &zb,
            tol,
        )
        .value
    };
    let slice = |x: f64| -> [f64; 2] {
        let mut yb = Vec::new();
        breakpoints(hints.centre[1], hints.widths.iter().map(|w| w[1]), &mut yb);
        for &slope in &hints.ridge_slopes {
            let yc = hints.centre[1] + slope * (x - hints.centre[0]);
            breakpoints(yc, hints.ridge_widths.iter().map(|w| w[0]), &mut yb);
        }
        integrate(|y| column(x, y), domain.lower[1], domain.upper[1], &yb, tol).value
    };

    // outer panels are independent; evaluate them in parallel, reduce in order
    let mut nodes: Vec<f64> = xb
        .into_iter()
        .filter(|&x| x > domain.lower[0] && x < domain.upper[0])
        .collect();
    nodes.push(domain.lower[0]);
    nodes.push(domain.upper[0]);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let pieces: Vec<_> = nodes
        .par_windows(2)
        .map(|ab| integrate(slice, ab[0], ab[1], &[], tol))
        .collect();
    let mut first = NeumaierSum::default();
    let mut second = NeumaierSum::default();
    let (mut e1, mut e2) = (0.0, 0.0);
    for p in &pieces {
        first.add(p.value[0]);
        second.add(p.value[1]);
        e1 += p.error[0];
        e2 += p.error[1];
    }
    let first = first.total();
    let second = second.total();
    if !(first > 0.0) || !(second > 0.0) || !first.is_finite() || !second.is_finite() {
        return Err(Error::DegenerateDomain(format!(
            "weight integral vanished or overflowed (int w = {first:e})"
        )));
    }
    Ok(WeightIntegrals {
        first,
        second,
        first_error: e1,
        second_error: e2,
    })
}

/// Default per-axis relative tolerance for trap quadratures.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;

/// A normalised equilibrium cloud: density evaluable anywhere.
#[derive(Debug, Clone)]
pub struct EquilibriumCloud<P> {
    pub potential: P,
    pub domain: Domain,
    pub kt: f64,
    pub number: f64,
    pub integrals: WeightIntegrals,
}

/// Density at a point, with a flag for points outside the bound domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensitySample {
    /// m^-3
    pub density: f64,
    pub in_domain: bool,
}

impl<P: Potential> EquilibriumCloud<P> {
    pub fn new(potential: P, domain: Domain, temperature: f64, number: f64, rel_tol: f64) -> Result<Self> {
        let kt = K_B * temperature;
        let integrals = weight_integrals(&potential, &domain, kt, rel_tol)?;
        Ok(EquilibriumCloud {
            potential,
            domain,
            kt,
            number,
            integrals,
        })
    }

    pub fn density(&self, r: [f64; 3]) -> DensitySample {
        if !self.domain.contains(r) {
            return DensitySample {
                density: 0.0,
                in_domain: false,
            };
        }
        let w = self.domain.weight(self.potential.energy(r), self.kt);
        DensitySample {
            density: self.number * w / self.integrals.first,
            in_domain: w > 0.0 || self.domain.escape_energy.is_none(),
        }
    }

    /// Partition integral `int exp(-U/kT)` (truncated), m^3. Overflows to
    /// infinity for very cold clouds; see [`Self::log_partition`].
    pub fn partition(&self) -> f64 {
        self.log_partition().exp()
    }

    pub fn log_partition(&self) -> f64 {
        self.integrals.first.ln() - self.domain.reference_energy / self.kt
    }

    pub fn effective_volume(&self) -> f64 {
        self.integrals.effective_volume()
    }
}

impl EquilibriumCloud<CrossedDipoleTrap> {
    pub fn in_trap(state: &CloudState, cfg: &TrapConfig, region: &Region, molasses: MolassesExtent) -> Result<Self> {
        let domain = trap_domain(cfg, region, state.temperature, molasses)?;
        EquilibriumCloud::new(
            CrossedDipoleTrap::new(cfg),
            domain,
            state.temperature,
            state.total_number,
            QUADRATURE_TOLERANCE,
        )
    }
}

/// Boltzmann density of `state` at `r` over `region`.
///
/// Normalises by a full quadrature on every call; build an
/// [`EquilibriumCloud`] when evaluating many points.
pub fn boltzmann_density(r: [f64; 3], state: &CloudState, cfg: &TrapConfig, region: &Region) -> Result<DensitySample> {
    Ok(EquilibriumCloud::in_trap(state, cfg, region, MolassesExtent::default())?.density(r))
}

/// `V_c = (int n)^2 / int n^2` over `region`, m^3.
pub fn effective_volume(state: &CloudState, cfg: &TrapConfig, region: &Region) -> Result<f64> {
    effective_volume_with(state, cfg, region, MolassesExtent::default())
}

pub fn effective_volume_with(state: &CloudState, cfg: &TrapConfig, region: &Region, molasses: MolassesExtent) -> Result<f64> {
    let domain = trap_domain(cfg, region, state.temperature, molasses)?;
    let ints = weight_integrals(&CrossedDipoleTrap::new(cfg), &domain, K_B * state.temperature, QUADRATURE_TOLERANCE)?;
    Ok(ints.effective_volume())
}

/// Fraction of atoms inside `roi` relative to `total`.
pub fn center_fraction(state: &CloudState, cfg: &TrapConfig, roi: &Region, total: &Region) -> Result<f64> {
    center_fraction_with(state, cfg, roi, total, MolassesExtent::default())
}

pub fn center_fraction_with(
    state: &CloudState,
    cfg: &TrapConfig,
    roi: &Region,
    total: &Region,
    molasses: MolassesExtent,
) -> Result<f64> {
    let roi_d = trap_domain(cfg, roi, state.temperature, molasses)?;
    let total_d = trap_domain(cfg, total, state.temperature, molasses)?;
    fraction_between(&CrossedDipoleTrap::new(cfg), &roi_d, &total_d, K_B * state.temperature)
}

/// `int_roi w / int_total w` for two domains sharing weight conventions.
pub fn fraction_between<P: Potential + ?Sized>(pot: &P, roi: &Domain, total: &Domain, kt: f64) -> Result<f64> {
    if !total.encloses(roi) {
        return Err(Error::config("region of interest is not inside the total region"));
    }
    if roi == total {
        return Ok(1.0);
    }
    let a = weight_integrals(pot, roi, kt, QUADRATURE_TOLERANCE)?.first;
    let b = weight_integrals(pot, total, kt, QUADRATURE_TOLERANCE)?.first;
    Ok((a / b).min(1.0))
}

/// Equilibrium summary of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// Natural log of the partition integral in m^3.
    pub log_partition: f64,
    /// m^3
    pub partition: f64,
    /// Effective volume of the region of interest, m^3.
    pub effective_volume: f64,
    pub center_fraction: f64,
    /// m
    pub peak_location: [f64; 3],
}

pub fn equilibrium_report(
    state: &CloudState,
    cfg: &TrapConfig,
    roi: &Region,
    total: &Region,
    molasses: MolassesExtent,
) -> Result<EquilibriumReport> {
    let total_cloud = EquilibriumCloud::in_trap(state, cfg, total, molasses)?;
    let roi_domain = trap_domain(cfg, roi, state.temperature, molasses)?;
    if !total_cloud.domain.encloses(&roi_domain) {
        return Err(Error::config("region of interest is not inside the total region"));
    }
    let roi_ints = weight_integrals(&total_cloud.potential, &roi_domain, total_cloud.kt, QUADRATURE_TOLERANCE)?;
    Ok(EquilibriumReport {
        log_partition: total_cloud.log_partition(),
        partition: total_cloud.partition(),
        effective_volume: roi_ints.effective_volume(),
        center_fraction: (roi_ints.first / total_cloud.integrals.first).min(1.0),
        peak_location: total_cloud.domain.hints.centre,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// One component of an importance-sampling mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Component {
    /// Uniform over the domain box.
    Uniform,
    /// Axis-aligned Gaussian.
    Gaussian { mean: [f64; 3], sd: [f64; 3] },
    /// Uniform along a horizontal line through `origin` with in-plane
    /// direction angle `heading`, Gaussian across it (in-plane and in z).
    Ridge {
        origin: [f64; 3],
        heading: f64,
        half_length: f64,
        sd_across: f64,
        sd_z: f64,
    },
}

/// Mixture proposal density: `(probability, component)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proposal {
    pub components: Vec<(f64, Component)>,
}

impl Proposal {
    pub fn uniform() -> Self {
        Proposal {
            components: vec![(1.0, Component::Uniform)],
        }
    }

    /// Mixture tuned to the crossed-trap density: core, both arms, and a
    /// uniform floor that keeps the estimator unbiased everywhere.
    pub fn for_trap(cfg: &TrapConfig, domain: &Domain, temperature: f64) -> Self {
        let w = cfg.geometry.waist;
        let centre = domain.hints.centre;
        let s = (temperature / (4.0 * cfg.depth)).sqrt().clamp(0.05, 1.0);
        let half = 0.5 * cfg.geometry.angle;
        let sd = [
            (s * w / half.sin().max(1e-3)).min(domain.upper[0] - domain.lower[0]),
            (s * w / half.cos().max(1e-3)).min(domain.upper[1] - domain.lower[1]),
            s * w,
        ];
        let half_length = (domain.upper[0].powi(2) + domain.upper[1].powi(2)).sqrt();
        let ridge = |heading: f64| Component::Ridge {
            origin: centre,
            heading,
            half_length,
            sd_across: (1.5 * s * w).min(w),
            sd_z: (1.5 * s * w).min(w),
        };
        Proposal {
            components: vec![
                (0.15, Component::Uniform),
                (0.35, Component::Gaussian { mean: centre, sd }),
                (0.25, ridge(half)),
                (0.25, ridge(-half)),
            ],
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, domain: &Domain) -> [f64; 3] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1].1;
        for (p, c) in &self.components {
            acc += p;
            if u < acc {
                chosen = c;
                break;
            }
        }
        match *chosen {
            Component::Uniform => std::array::from_fn(|i| {
                domain.lower[i] + rng.random::<f64>() * (domain.upper[i] - domain.lower[i])
            }),
            Component::Gaussian { mean, sd } => std::array::from_fn(|i| {
                mean[i] + sd[i] * normal(rng)
            }),
            Component::Ridge {
                origin,
                heading,
                half_length,
                sd_across,
                sd_z,
            } => {
                let along = (2.0 * rng.random::<f64>() - 1.0) * half_length;
                let across = sd_across * normal(rng);
                let dz = sd_z * normal(rng);
                let (s, c) = heading.sin_cos();
                [
                    origin[0] + c * along - s * across,
                    origin[1] + s * along + c * across,
                    origin[2] + dz,
                ]
            }
        }
    }

    fn density(&self, r: [f64; 3], domain: &Domain, volume: f64) -> f64 {
        let gauss = |x: f64, m: f64, s: f64| (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * PI).sqrt());
        self.components
            .iter()
            .map(|(p, c)| {
                p * match *c {
                    Component::Uniform => {
                        if domain.contains(r) {
                            1.0 / volume
                        } else {
                            0.0
                        }
                    }
                    Component::Gaussian { mean, sd } => (0..3).map(|i| gauss(r[i], mean[i], sd[i])).product(),
                    Component::Ridge {
                        origin,
                        heading,
                        half_length,
                        sd_across,
                        sd_z,
                    } => {
                        let (s, c) = heading.sin_cos();
                        let dx = r[0] - origin[0];
                        let dy = r[1] - origin[1];
                        let along = c * dx + s * dy;
                        let across = -s * dx + c * dy;
                        if along.abs() > half_length {
                            0.0
                        } else {
                            gauss(across, 0.0, sd_across) * gauss(r[2], origin[2], sd_z) / (2.0 * half_length)
                        }
                    }
                }
            })
            .sum()
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Monte Carlo estimates of `int w` and `int w^2` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub first: f64,
    pub first_stderr: f64,
    pub second: f64,
    pub second_stderr: f64,
    pub samples: usize,
}

const MC_BATCH: usize = 4096;

/// Importance-sampled Monte Carlo integration of the weight and its square.
///
/// Samples are drawn in fixed batches, each from its own ChaCha stream
/// derived from `seed`, and reduced in batch order, so the estimate is
/// bit-identical for a given seed regardless of thread count.
pub fn mc_weight_integrals<P: Potential + ?Sized>(
    pot: &P,
    domain: &Domain,
    kt: f64,
    proposal: &Proposal,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(Error::domain(format!("need at least 1000 samples, got {samples}")));
    }
    domain.check()?;
    let volume = domain.volume();
    let batches = samples.div_ceil(MC_BATCH);
    let partial: Vec<[f64; 4]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let n = MC_BATCH.min(samples - b * MC_BATCH);
            let mut acc = [NeumaierSum::default(); 4];
            for _ in 0..n {
                let r = proposal.sample(&mut rng, domain);
                let (f1, f2) = if domain.contains(r) {
                    let w = domain.weight(pot.energy(r), kt);
                    let q = proposal.density(r, domain, volume);
                    (w / q, w * w / q)
                } else {
                    (0.0, 0.0)
                };
                acc[0].add(f1);
                acc[1].add(f1 * f1);
                acc[2].add(f2);
                acc[3].add(f2 * f2);
            }
            [acc[0].total(), acc[1].total(), acc[2].total(), acc[3].total()]
        })
        .collect();
    let mut sums = [NeumaierSum::default(); 4];
    for p in &partial {
        for k in 0..4 {
            sums[k].add(p[k]);
        }
    }
    let n = samples as f64;
    let stats = |s: f64, s2: f64| {
        let mean = s / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    };
    let (first, first_stderr) = stats(sums[0].total(), sums[1].total());
    let (second, second_stderr) = stats(sums[2].total(), sums[3].total());
    Ok(McEstimate {
        first,
        first_stderr,
        second,
        second_stderr,
        samples,
    })
}

/// Monte Carlo partition integrals of `state` over `region` of the trap.
pub fn mc_partition(
    state: &CloudState,
    cfg: &TrapConfig,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let domain = trap_domain(cfg, region, state.temperature, MolassesExtent::default())?;
    let proposal = Proposal::for_trap(cfg, &domain, state.temperature);
    mc_weight_integrals(
        &CrossedDipoleTrap::new(cfg),
        &domain,
        K_B * state.temperature,
        &proposal,
        samples,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{hessian_frequencies, potential};
    use crate::units::MICRO;
    use approx::assert_relative_eq;

    fn reference(depth_uk: f64) -> TrapConfig {
        TrapConfig::rubidium_reference(depth_uk * MICRO).unwrap()
    }

    #[test]
    fn bound_fraction_limits() {
        assert_eq!(bound_fraction(0.0), 0.0);
        assert_eq!(bound_fraction(-1.0), 0.0);
        assert_relative_eq!(bound_fraction(50.0), 1.0, max_relative = 1e-15);
        // continuity across the series switch
        let a = bound_fraction(0.999_999e-3);
        let b = bound_fraction(1.000_001e-3);
        assert_relative_eq!(a, b, max_relative = 1e-5);
        // P(3/2, 1) = erf(1) - 2/sqrt(pi)/e
        assert_relative_eq!(bound_fraction(1.0), 0.427_593_295_529_120_2, max_relative = 1e-12);
    }

    #[test]
    fn cloud_state_validation() {
        assert!(CloudState::new(0.0, 2.0, 1.0, 1e-6).is_err());
        assert!(CloudState::new(0.0, 1.0, 2.0, 0.0).is_err());
        assert!(CloudState::new(0.0, 1.0, 2.0, 1e-6).is_ok());
    }

    #[test]
    fn flat_potential_box_volume() {
        let d = Domain::boxed([-1.0, -2.0, -0.5], [1.0, 2.0, 0.5]);
        let flat = |_: [f64; 3]| 0.0;
        let ints = weight_integrals(&flat, &d, 1.0, 1e-8).unwrap();
        assert_relative_eq!(ints.first, 8.0, max_relative = 1e-12);
        assert_relative_eq!(ints.effective_volume(), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn harmonic_gaussian_effective_volume() {
        let kt = 1.0;
        let sd = [0.3, 0.5, 0.2];
        let pot = move |r: [f64; 3]| (0..3).map(|i| 0.5 * kt * (r[i] / sd[i]).powi(2)).sum::<f64>();
        let lower = [-8.0 * sd[0], -8.0 * sd[1], -8.0 * sd[2]];
        let upper = [8.0 * sd[0], 8.0 * sd[1], 8.0 * sd[2]];
        let mut d = Domain::boxed(lower, upper);
        d.hints = FeatureHints::centred([0.0; 3], sd);
        let v = weight_integrals(&pot, &d, kt, 1e-6).unwrap().effective_volume();
        let closed = 8.0 * PI.powf(1.5) * sd[0] * sd[1] * sd[2];
        assert_relative_eq!(v, closed, max_relative = 1e-2);
    }

    #[test]
    fn effective_volume_independent_of_number() {
        let cfg = reference(300.0);
        let t = 0.3 * cfg.depth;
        let roi = Region::default_roi(cfg.geometry.waist);
        let a = effective_volume(&CloudState::thermal(1e5, t).unwrap(), &cfg, &roi).unwrap();
        let b = effective_volume(&CloudState::thermal(2e5, t).unwrap(), &cfg, &roi).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn density_normalises_to_number() {
        let cfg = reference(400.0).with_gravity(0.0);
        let state = CloudState::thermal(1e6, 0.1 * cfg.depth).unwrap();
        let cloud = EquilibriumCloud::in_trap(&state, &cfg, &Region::FullTrap, MolassesExtent::default()).unwrap();
        let d = &cloud.domain;
        let total = integrate(
            |x| {
                integrate(
                    |y| {
                        integrate(|z| [cloud.density([x, y, z]).density], d.lower[2], d.upper[2], &[-1e-5, 0.0, 1e-5], Tolerance::relative(1e-6)).value
                    },
                    d.lower[1],
                    d.upper[1],
                    &[-2e-5, 0.0, 2e-5],
                    Tolerance::relative(1e-6),
                )
                .value
            },
            d.lower[0],
            d.upper[0],
            &[-5e-5, 0.0, 5e-5],
            Tolerance::relative(1e-6),
        );
        assert_relative_eq!(total.value[0], 1e6, max_relative = 1e-3);
    }

    #[test]
    fn cold_cloud_peaks_at_centre() {
        let cfg = reference(400.0).with_gravity(0.0);
        let state = CloudState::thermal(1e6, 0.02 * cfg.depth).unwrap();
        let cloud = EquilibriumCloud::in_trap(&state, &cfg, &Region::FullTrap, MolassesExtent::default()).unwrap();
        let w = cfg.geometry.waist;
        let n0 = cloud.density([0.0; 3]).density;
        for r in [[0.5 * w, 0.0, 0.0], [0.0, 0.5 * w, 0.0], [0.0, 0.0, 0.5 * w]] {
            assert!(n0 > std::f64::consts::E * cloud.density(r).density);
        }
    }

    #[test]
    fn outside_domain_is_flagged() {
        let cfg = reference(400.0);
        let state = CloudState::thermal(1e6, 0.2 * cfg.depth).unwrap();
        let s = boltzmann_density([0.0, 0.0, -1.0], &state, &cfg, &Region::FullTrap).unwrap();
        assert_eq!(s.density, 0.0);
        assert!(!s.in_domain);
    }

    #[test]
    fn central_density_rises_as_cloud_cools() {
        let cfg = reference(400.0);
        let mut prev = 0.0;
        for eta in [0.6, 0.5, 0.4, 0.3, 0.2] {
            let state = CloudState::thermal(1e6, eta * cfg.depth).unwrap();
            let cloud = EquilibriumCloud::in_trap(&state, &cfg, &Region::FullTrap, MolassesExtent::default()).unwrap();
            let n0 = cloud.density(cloud.domain.hints.centre).density;
            assert!(n0 > prev, "eta = {eta}");
            prev = n0;
        }
    }

    #[test]
    #[ignore = "equilibrium density at the ROI long edge is far below 1/e of the centre at T = 0.475 U0"]
    fn roi_edge_density_near_one_over_e() {
        let cfg = reference(657.0).with_gravity(0.0);
        let state = CloudState::thermal(1e6, 0.475 * cfg.depth).unwrap();
        let cloud = EquilibriumCloud::in_trap(&state, &cfg, &Region::FullTrap, MolassesExtent::default()).unwrap();
        let w = cfg.geometry.waist;
        let ratio = cloud.density([0.0, 2.25 * w, 0.0]).density / cloud.density([0.0; 3]).density;
        assert!((ratio * std::f64::consts::E - 1.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn whole_region_fraction_is_one() {
        let cfg = reference(400.0);
        let state = CloudState::thermal(1e6, 0.3 * cfg.depth).unwrap();
        let a = center_fraction(&state, &cfg, &Region::FullTrap, &Region::FullTrap).unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn roi_outside_total_rejected() {
        let cfg = reference(400.0);
        let state = CloudState::thermal(1e6, 0.3 * cfg.depth).unwrap();
        let big = Region::CustomBox { half_extents: [1e-3, 1e-3, 1e-4] };
        let small = Region::CustomBox { half_extents: [1e-4, 1e-4, 1e-4] };
        assert!(matches!(center_fraction(&state, &cfg, &big, &small), Err(Error::Config(_))));
    }

    #[test]
    fn center_fraction_falls_with_temperature() {
        let cfg = reference(657.0);
        let roi = Region::default_roi(cfg.geometry.waist);
        let alphas: Vec<f64> = [0.15, 0.25, 0.35, 0.45, 0.55]
            .iter()
            .map(|eta| {
                let s = CloudState::thermal(1e6, eta * cfg.depth).unwrap();
                center_fraction(&s, &cfg, &roi, &Region::FullTrap).unwrap()
            })
            .collect();
        assert!(alphas.windows(2).all(|w| w[1] < w[0]), "{alphas:?}");
        assert!(alphas.iter().all(|&a| a > 0.0 && a <= 1.0));
    }

    #[test]
    fn mc_flat_potential_exact() {
        let d = Domain::boxed([0.0, 0.0, 0.0], [2.0, 1.0, 3.0]);
        let u0 = 0.7;
        let flat = move |_: [f64; 3]| u0;
        let e = mc_weight_integrals(&flat, &d, 1.0, &Proposal::uniform(), 5000, 1).unwrap();
        let exact = 6.0 * (-u0).exp();
        assert!((e.first - exact).abs() <= 3.0 * e.first_stderr + 1e-12 * exact);
    }

    #[test]
    fn mc_is_reproducible() {
        let cfg = reference(300.0);
        let state = CloudState::thermal(1e6, 0.4 * cfg.depth).unwrap();
        let a = mc_partition(&state, &cfg, &Region::FullTrap, 20_000, 7).unwrap();
        let b = mc_partition(&state, &cfg, &Region::FullTrap, 20_000, 7).unwrap();
        assert_eq!(a, b);
        let c = mc_partition(&state, &cfg, &Region::FullTrap, 20_000, 8).unwrap();
        assert_ne!(a.first, c.first);
    }

    #[test]
    fn mc_rejects_small_sample_and_empty_box() {
        let d = Domain::boxed([0.0; 3], [1.0, 1.0, 0.0]);
        let flat = |_: [f64; 3]| 0.0;
        assert!(mc_weight_integrals(&flat, &d, 1.0, &Proposal::uniform(), 999, 1).is_err());
        assert!(matches!(
            mc_weight_integrals(&flat, &d, 1.0, &Proposal::uniform(), 1000, 1),
            Err(Error::DegenerateDomain(_))
        ));
    }

    #[test]
    fn peak_location_is_trap_minimum() {
        let cfg = reference(400.0);
        let state = CloudState::thermal(1e6, 0.3 * cfg.depth).unwrap();
        let roi = Region::default_roi(cfg.geometry.waist);
        let rep = equilibrium_report(&state, &cfg, &roi, &Region::FullTrap, MolassesExtent::default()).unwrap();
        let z = rep.peak_location[2];
        let h = 1e-3 * cfg.geometry.waist;
        assert!(potential([0.0, 0.0, z], &cfg) < potential([0.0, 0.0, z + h], &cfg));
        assert!(potential([0.0, 0.0, z], &cfg) < potential([0.0, 0.0, z - h], &cfg));
        assert!(rep.center_fraction > 0.0 && rep.center_fraction < 1.0);
        assert!(rep.effective_volume > 0.0);
    }

    #[test]
    fn harmonic_frequencies_available_for_low_temperature_oracle() {
        let cfg = reference(657.0).with_gravity(0.0);
        assert!(hessian_frequencies(&cfg).is_ok());
    }
}

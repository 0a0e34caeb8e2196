//! Crossed-beam dipole potential under gravity and the quantities derived from it.
//!
//! Two identical Gaussian beams cross at their waists in the horizontal
//! `x`-`y` plane with full angle `theta`; beam `i` propagates along `x_i`,
//! rotated by `+-theta/2` from `x`. Gravity enters as `+m g z`, so atoms
//! escape towards negative `z`: the minimum sits slightly below the origin
//! and the escape saddle further down.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::roots::{bisect, bisect_predicate};
use crate::units::{joules_to_kelvin, Environment, SpeciesConstants, K_B};

/// A scalar potential energy field, in joules.
pub trait Potential: Sync {
    fn energy(&self, r: [f64; 3]) -> f64;
}

impl<F> Potential for F
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    fn energy(&self, r: [f64; 3]) -> f64 {
        self(r)
    }
}

/// Waist, wavelength and crossing angle of the two beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamGeometry {
    /// 1/e^2 intensity radius at the focus, m.
    pub waist: f64,
    /// m
    pub wavelength: f64,
    /// Full crossing angle, rad.
    pub angle: f64,
}

impl BeamGeometry {
    pub fn new(waist: f64, wavelength: f64, angle: f64) -> Result<Self> {
        if !(waist > 0.0) || !waist.is_finite() {
            return Err(Error::domain(format!("waist must be positive, got {waist} m")));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::domain(format!(
                "wavelength must be positive, got {wavelength} m"
            )));
        }
        if !(angle > 0.0 && angle < PI) {
            return Err(Error::domain(format!(
                "crossing angle must lie in (0, pi), got {angle} rad"
            )));
        }
        Ok(BeamGeometry {
            waist,
            wavelength,
            angle,
        })
    }

    /// `pi w0^2 / lambda`, m.
    pub fn rayleigh_length(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }
}

/// Everything that defines the potential field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapConfig {
    pub geometry: BeamGeometry,
    /// Depth of the crossing without gravity, K.
    pub depth: f64,
    pub species: SpeciesConstants,
    pub environment: Environment,
}

impl TrapConfig {
    pub fn new(
        geometry: BeamGeometry,
        depth: f64,
        species: SpeciesConstants,
        environment: Environment,
    ) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::domain(format!("trap depth must be positive, got {depth} K")));
        }
        // re-validate in case the parts were built by hand
        BeamGeometry::new(geometry.waist, geometry.wavelength, geometry.angle)?;
        SpeciesConstants::new(species.name.clone(), species.mass, species.cross_section)?;
        Environment::new(
            environment.gravity,
            environment.background_temperature,
            environment.background,
        )?;
        Ok(TrapConfig {
            geometry,
            depth,
            species,
            environment,
        })
    }

    /// 87Rb in a 55 um / 1064 nm / 45 degree crossing under laboratory gravity.
    pub fn rubidium_reference(depth_k: f64) -> Result<Self> {
        TrapConfig::new(
            BeamGeometry::new(55e-6, 1064e-9, 45f64.to_radians())?,
            depth_k,
            SpeciesConstants::rubidium87(),
            Environment::laboratory(),
        )
    }

    pub fn with_depth(&self, depth_k: f64) -> Self {
        TrapConfig {
            depth: depth_k,
            ..self.clone()
        }
    }

    pub fn with_gravity(&self, gravity: f64) -> Self {
        let mut c = self.clone();
        c.environment.gravity = gravity;
        c
    }

    /// Gravitational force `m g`, N.
    pub fn weight(&self) -> f64 {
        self.species.mass * self.environment.gravity
    }

    /// `zeta = m g w0 / k_B`, K.
    pub fn tilt_scale(&self) -> f64 {
        self.weight() * self.geometry.waist / K_B
    }
}

/// Closed-form depth below which a single tilted beam holds nothing:
/// `e^(1/2) m g w0 / k_B`, in K.
pub fn critical_arm_depth(cfg: &TrapConfig) -> f64 {
    0.5f64.exp() * cfg.tilt_scale()
}

/// The crossed-beam potential as an evaluable field.
#[derive(Debug, Clone, Copy)]
pub struct CrossedDipoleTrap {
    /// Peak depth of each beam, J.
    beam_depth: [f64; 2],
    waist: f64,
    rayleigh: f64,
    cos_half: f64,
    sin_half: f64,
    weight: f64,
}

impl CrossedDipoleTrap {
    pub fn new(cfg: &TrapConfig) -> Self {
        let half = 0.5 * K_B * cfg.depth;
        CrossedDipoleTrap {
            beam_depth: [half, half],
            waist: cfg.geometry.waist,
            rayleigh: cfg.geometry.rayleigh_length(),
            cos_half: (0.5 * cfg.geometry.angle).cos(),
            sin_half: (0.5 * cfg.geometry.angle).sin(),
            weight: cfg.weight(),
        }
    }

    /// Scale the two beams independently (1 = nominal). Used to isolate a
    /// single beam.
    pub fn with_beam_scales(mut self, scales: [f64; 2]) -> Self {
        self.beam_depth = [self.beam_depth[0] * scales[0], self.beam_depth[1] * scales[1]];
        self
    }

    /// Beam coordinates `(x1, y1, x2, y2)` for a lab-frame position.
    pub fn beam_frames(&self, x: f64, y: f64) -> (f64, f64, f64, f64) {
        let (c, s) = (self.cos_half, self.sin_half);
        (c * x + s * y, -s * x + c * y, c * x - s * y, -s * x - c * y)
    }

    #[inline]
    fn beam(&self, depth: f64, axial: f64, transverse: f64, z: f64) -> f64 {
        let spread = 1.0 + axial * axial / (self.rayleigh * self.rayleigh);
        depth * (-2.0 * (transverse * transverse + z * z) / (self.waist * self.waist * spread)).exp()
            / spread
    }

    /// Optical part only (no gravity), J.
    pub fn optical(&self, r: [f64; 3]) -> f64 {
        let [x, y, z] = r;
        let (x1, y1, x2, y2) = self.beam_frames(x, y);
        -(self.beam(self.beam_depth[0], x1, y1, z) + self.beam(self.beam_depth[1], x2, y2, z))
    }
}

impl Potential for CrossedDipoleTrap {
    #[inline]
    fn energy(&self, r: [f64; 3]) -> f64 {
        self.optical(r) + self.weight * r[2]
    }
}

/// Potential energy at `r`, J.
pub fn potential(r: [f64; 3], cfg: &TrapConfig) -> f64 {
    CrossedDipoleTrap::new(cfg).energy(r)
}

/// Depth of a vertical Gaussian well `-A exp(-2 z^2/w^2) + F z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellProfile {
    /// J
    pub amplitude: f64,
    /// m
    pub waist: f64,
    /// N
    pub force: f64,
}

/// Stationary points of a [`WellProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellAnalysis {
    pub trapped: bool,
    /// J, zero when untrapped.
    pub depth: f64,
    pub z_min: Option<f64>,
    pub z_saddle: Option<f64>,
}

impl WellProfile {
    pub fn energy(&self, z: f64) -> f64 {
        -self.amplitude * (-2.0 * z * z / (self.waist * self.waist)).exp() + self.force * z
    }

    pub fn slope(&self, z: f64) -> f64 {
        let w2 = self.waist * self.waist;
        self.amplitude * 4.0 * z / w2 * (-2.0 * z * z / w2).exp() + self.force
    }

    pub fn curvature(&self, z: f64) -> f64 {
        let w2 = self.waist * self.waist;
        self.amplitude * 4.0 / w2 * (1.0 - 4.0 * z * z / w2) * (-2.0 * z * z / w2).exp()
    }

    /// Locate minimum and escape saddle by bracketing sign changes of the slope.
    pub fn analyse(&self) -> WellAnalysis {
        let w = self.waist;
        let xtol = 1e-10 * w;
        if self.amplitude <= 0.0 {
            return WellAnalysis {
                trapped: false,
                depth: 0.0,
                z_min: None,
                z_saddle: None,
            };
        }
        if self.force == 0.0 {
            return WellAnalysis {
                trapped: true,
                depth: self.amplitude,
                z_min: Some(0.0),
                z_saddle: None,
            };
        }
        // escape is towards -z for F > 0; mirror otherwise
        let sign = self.force.signum();
        let slope = |z: f64| sign * self.slope(sign * z);
        let curvature = |z: f64| self.curvature(sign * z);

        // steepest restoring slope: the inflection on the escape side
        let inflection = bisect(curvature, -5.0 * w, -1e-12 * w, xtol).unwrap_or(-0.5 * w);
        if slope(inflection) >= 0.0 {
            return WellAnalysis {
                trapped: false,
                depth: 0.0,
                z_min: None,
                z_saddle: None,
            };
        }
        let z_min = bisect(slope, inflection, 0.0, xtol).expect("slope changes sign on [inflection, 0]");
        let mut lo = -5.0 * w;
        let mut expansions = 0;
        while slope(lo) <= 0.0 && expansions < 64 {
            lo *= 2.0;
            expansions += 1;
        }
        let z_saddle = bisect(slope, lo, inflection, xtol).expect("slope changes sign below inflection");
        let (z_min, z_saddle) = (sign * z_min, sign * z_saddle);
        WellAnalysis {
            trapped: true,
            depth: self.energy(z_saddle) - self.energy(z_min),
            z_min: Some(z_min),
            z_saddle: Some(z_saddle),
        }
    }
}

/// Effective depths of the crossing and of the arms under gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthReport {
    /// Effective crossing depth, K.
    pub u_eff: f64,
    /// Effective arm depth, K.
    pub u_arm: f64,
    /// Closed-form arm threshold `e^(1/2) zeta`, K.
    pub critical_arm_depth: f64,
    /// Vertical offset of the minimum, m.
    pub z_min: Option<f64>,
    /// Vertical position of the escape saddle, m. Absent without gravity.
    pub z_saddle: Option<f64>,
    pub trapped_center: bool,
    pub trapped_arms: bool,
}

/// The vertical profile through the crossing centre.
pub fn center_profile(cfg: &TrapConfig) -> WellProfile {
    WellProfile {
        amplitude: K_B * cfg.depth,
        waist: cfg.geometry.waist,
        force: cfg.weight(),
    }
}

/// The vertical profile of one arm at its waist.
pub fn arm_profile(cfg: &TrapConfig) -> WellProfile {
    WellProfile {
        amplitude: 0.5 * K_B * cfg.depth,
        waist: cfg.geometry.waist,
        force: cfg.weight(),
    }
}

pub fn effective_depth(cfg: &TrapConfig) -> DepthReport {
    let center = center_profile(cfg).analyse();
    let arm = arm_profile(cfg).analyse();
    DepthReport {
        u_eff: joules_to_kelvin(center.depth),
        u_arm: joules_to_kelvin(arm.depth),
        critical_arm_depth: critical_arm_depth(cfg),
        z_min: center.z_min,
        z_saddle: center.z_saddle,
        trapped_center: center.trapped,
        trapped_arms: arm.trapped,
    }
}

/// Arm threshold located by bisection on the root-finder `trapped_arms` flag, K.
pub fn critical_arm_depth_numeric(cfg: &TrapConfig, rel_tol: f64) -> f64 {
    let closed = critical_arm_depth(cfg);
    if closed == 0.0 {
        return 0.0;
    }
    let trapped = |u0: f64| arm_profile(&cfg.with_depth(u0)).analyse().trapped;
    let (mut lo, mut hi) = (0.25 * closed, 4.0 * closed);
    while trapped(lo) {
        lo *= 0.5;
    }
    while !trapped(hi) {
        hi *= 2.0;
    }
    bisect_predicate(trapped, lo, hi, rel_tol * closed)
}

/// Depth `U0` (K) whose effective depth under the configured gravity equals
/// `u_eff` (K).
pub fn depth_for_effective(cfg: &TrapConfig, u_eff: f64) -> Result<f64> {
    if !(u_eff > 0.0) || !u_eff.is_finite() {
        return Err(Error::domain(format!("effective depth must be positive, got {u_eff} K")));
    }
    if cfg.environment.gravity == 0.0 {
        return Ok(u_eff);
    }
    let eff = |u0: f64| effective_depth(&cfg.with_depth(u0)).u_eff;
    let lo = u_eff;
    let mut hi = u_eff + 2.0 * critical_arm_depth(cfg).max(1e-12);
    let mut guard = 0;
    while eff(hi) < u_eff {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::domain("effective depth unreachable"));
        }
    }
    Ok(bisect_predicate(|u0| eff(u0) >= u_eff, lo, hi, 1e-12 * u_eff))
}

/// Harmonic characterisation of the trap minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapFrequencies {
    /// Angular frequencies, rad/s, ascending.
    pub omega: [f64; 3],
    /// Unit principal axes, matching `omega`.
    pub axes: [[f64; 3]; 3],
    /// Position of the minimum, m.
    pub minimum: [f64; 3],
}

/// Curvature of `pot` at `at` by central differences with step `h`.
pub fn hessian<P: Potential + ?Sized>(pot: &P, at: [f64; 3], h: f64) -> Matrix3<f64> {
    let shifted = |d: [f64; 3]| pot.energy([at[0] + d[0], at[1] + d[1], at[2] + d[2]]);
    let unit = |i: usize, s: f64| {
        let mut d = [0.0; 3];
        d[i] = s;
        d
    };
    let centre = pot.energy(at);
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        m[(i, i)] = (shifted(unit(i, h)) - 2.0 * centre + shifted(unit(i, -h))) / (h * h);
        for j in (i + 1)..3 {
            let corner = |si: f64, sj: f64| {
                let mut d = unit(i, si * h);
                d[j] = sj * h;
                shifted(d)
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Normal-mode frequencies of a particle of mass `mass` at the minimum `at`.
pub fn frequencies_at<P: Potential + ?Sized>(pot: &P, at: [f64; 3], mass: f64, h: f64) -> Result<TrapFrequencies> {
    let eig = SymmetricEigen::new(hessian(pot, at, h));
    let mut modes: Vec<(f64, [f64; 3])> = (0..3)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (eig.eigenvalues[k], [v[0], v[1], v[2]])
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((bad, _)) = modes.iter().find(|(l, _)| !(*l > 0.0)) {
        return Err(Error::NotAMinimum(format!(
            "Hessian eigenvalue {bad:e} J/m^2 is not positive"
        )));
    }
    Ok(TrapFrequencies {
        omega: [
            (modes[0].0 / mass).sqrt(),
            (modes[1].0 / mass).sqrt(),
            (modes[2].0 / mass).sqrt(),
        ],
        axes: [modes[0].1, modes[1].1, modes[2].1],
        minimum: at,
    })
}

/// Harmonic frequencies at the (gravity-shifted) crossing minimum, using
/// central differences with step `1e-4 w0`.
pub fn hessian_frequencies(cfg: &TrapConfig) -> Result<TrapFrequencies> {
    let report = effective_depth(cfg);
    let z_min = match (report.trapped_center, report.z_min) {
        (true, Some(z)) => z,
        _ => {
            return Err(Error::NotAMinimum(
                "the crossing holds no minimum under this gravity".into(),
            ))
        }
    };
    frequencies_at(
        &CrossedDipoleTrap::new(cfg),
        [0.0, 0.0, z_min],
        cfg.species.mass,
        1e-4 * cfg.geometry.waist,
    )
}

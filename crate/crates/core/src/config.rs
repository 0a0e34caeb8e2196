//! TOML run configuration. Key names carry their units; unknown keys are
//! rejected with the offending key and line in the message.
//!
//! ```toml
//! [trap]
//! waist_um = 55.0
//! wavelength_nm = 1064.0
//! angle_deg = 45.0
//! effective_depth_uk = 657.0   # or depth_uk = U0, not both
//!
//! [environment]
//! gravity_m_s2 = 9.81
//! background_temperature_k = 300.0
//! background_pressure_pa = 1.3e-9
//!
//! [coefficients]
//! gamma_per_s = 0.979
//! eta = 0.475
//!
//! [run]
//! seed = 1
//!
//! [run.grid]
//! u_eff_min_uk = 200.0
//! u_eff_max_uk = 1400.0
//! u_eff_points = 13
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dynamics::{CoefficientModel, RateCoefficients, VolumeModel};
use crate::equilibrium::{effective_volume_with, CloudState, MolassesExtent, Region};
use crate::error::{Error, Result};
use crate::estimation::{beta0_collisional, gamma_background, CUBIC_CENTIMETRE, DEFAULT_LOSS_PROBABILITY};
use crate::numerics::ode::OdeOptions;
use crate::potential::{depth_for_effective, effective_depth, BeamGeometry, TrapConfig};
use crate::units::{
    BackgroundGas, Environment, SpeciesConstants, ATOMIC_MASS_UNIT, DEFAULT_GRAVITY, MICRO, RB87_MASS,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trap: TrapSection,
    pub species: SpeciesSection,
    pub environment: EnvironmentSection,
    pub regions: RegionsSection,
    pub coefficients: CoefficientsSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub waist_um: f64,
    pub wavelength_nm: f64,
    /// Full crossing angle.
    pub angle_deg: f64,
    /// Depth without gravity, U0.
    pub depth_uk: Option<f64>,
    /// Depth from the tilted minimum to the escape saddle; converted to U0.
    pub effective_depth_uk: Option<f64>,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            waist_um: 55.0,
            wavelength_nm: 1064.0,
            angle_deg: 45.0,
            depth_uk: None,
            effective_depth_uk: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub name: String,
    pub mass_amu: f64,
    /// Defaults to `8 pi a^2` with `a = 98 a0`.
    pub cross_section_m2: Option<f64>,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        SpeciesSection {
            name: "Rb-87".into(),
            mass_amu: RB87_MASS / ATOMIC_MASS_UNIT,
            cross_section_m2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    /// 0 for microgravity.
    pub gravity_m_s2: f64,
    pub background_temperature_k: f64,
    /// Exactly one of pressure and density; pressure defaults to 1.3e-9 Pa.
    pub background_pressure_pa: Option<f64>,
    pub background_density_m3: Option<f64>,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        EnvironmentSection {
            gravity_m_s2: DEFAULT_GRAVITY,
            background_temperature_k: 300.0,
            background_pressure_pa: None,
            background_density_m3: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionsSection {
    /// Centre rectangle along x, in waists.
    pub roi_l1_waists: f64,
    /// Centre rectangle along y, in waists.
    pub roi_l2_waists: f64,
    pub molasses_l1_m: f64,
    pub molasses_l2_m: f64,
}

impl Default for RegionsSection {
    fn default() -> Self {
        let m = MolassesExtent::default();
        RegionsSection {
            roi_l1_waists: 6.0,
            roi_l2_waists: 4.5,
            molasses_l1_m: m.l1,
            molasses_l2_m: m.l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsSection {
    /// Background loss rate; derived from the environment when absent.
    pub gamma_loss_per_s: Option<f64>,
    /// Damping (loading) coefficient.
    pub gamma_per_s: f64,
    /// Two-body coefficient; collisional estimate when absent.
    pub beta0_cm3_per_s: Option<f64>,
    /// Effective centre volume; equilibrium quadrature when absent.
    pub effective_volume_m3: Option<f64>,
    pub eta: f64,
    /// Centre fraction used by the phase diagram.
    pub alpha: f64,
    pub loss_probability: f64,
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        CoefficientsSection {
            gamma_loss_per_s: None,
            gamma_per_s: 0.979,
            beta0_cm3_per_s: None,
            effective_volume_m3: None,
            eta: 0.475,
            alpha: 0.658,
            loss_probability: DEFAULT_LOSS_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Centre population at t = 0.
    pub n_c0: f64,
    /// Atoms available for loading.
    pub n0: f64,
    /// Cloud temperature; `eta * U_eff` when absent.
    pub temperature_uk: Option<f64>,
    /// `max(6 / gamma, 5 s)` when absent.
    pub horizon_s: Option<f64>,
    pub samples: usize,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub quadrature_rtol: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub grid: GridSection,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            n_c0: 1.41e6,
            n0: 1.41e6 / 0.658,
            temperature_uk: None,
            horizon_s: None,
            samples: 201,
            ode_rtol: 1e-8,
            ode_atol: 1e-3,
            quadrature_rtol: 1e-4,
            seed: 1,
            mc_samples: 200_000,
            grid: GridSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub u_eff_min_uk: f64,
    pub u_eff_max_uk: f64,
    pub u_eff_points: usize,
    pub n_c0_min: f64,
    pub n_c0_max: f64,
    pub n_c0_points: usize,
    /// Logarithmic spacing along N_c0.
    pub n_c0_log: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            u_eff_min_uk: 200.0,
            u_eff_max_uk: 1400.0,
            u_eff_points: 7,
            n_c0_min: 1e5,
            n_c0_max: 1e7,
            n_c0_points: 21,
            n_c0_log: true,
        }
    }
}

impl GridSection {
    /// Effective depths in kelvin.
    pub fn u_eff_axis(&self) -> Result<Vec<f64>> {
        linspace(self.u_eff_min_uk, self.u_eff_max_uk, self.u_eff_points, false, "u_eff")
            .map(|v| v.into_iter().map(|u| u * MICRO).collect())
    }

    pub fn n_c0_axis(&self) -> Result<Vec<f64>> {
        linspace(self.n_c0_min, self.n_c0_max, self.n_c0_points, self.n_c0_log, "n_c0")
    }
}

fn linspace(lo: f64, hi: f64, n: usize, log: bool, name: &str) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config(format!("run.grid.{name}_points must be at least 1")));
    }
    if !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::config(format!("run.grid.{name} range must satisfy 0 < min <= max")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let s = i as f64 / last;
            if i == n - 1 {
                hi
            } else if log {
                (lo.ln() + s * (hi.ln() - lo.ln())).exp()
            } else {
                lo + s * (hi - lo)
            }
        })
        .collect())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn species(&self) -> Result<SpeciesConstants> {
        let s = &self.species;
        let sigma = s
            .cross_section_m2
            .unwrap_or_else(|| SpeciesConstants::rubidium87().cross_section);
        SpeciesConstants::new(s.name.clone(), s.mass_amu * ATOMIC_MASS_UNIT, sigma)
    }

    pub fn environment(&self) -> Result<Environment> {
        let e = &self.environment;
        let gas = match (e.background_pressure_pa, e.background_density_m3) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "environment: give background_pressure_pa or background_density_m3, not both",
                ))
            }
            (Some(p), None) => BackgroundGas::Pressure(p),
            (None, Some(n)) => BackgroundGas::Density(n),
            (None, None) => BackgroundGas::Pressure(1.3e-9),
        };
        Environment::new(e.gravity_m_s2, e.background_temperature_k, gas)
    }

    /// Trap with `U0` resolved from whichever depth key was given.
    pub fn trap(&self) -> Result<TrapConfig> {
        let t = &self.trap;
        let geometry = BeamGeometry::new(t.waist_um * MICRO, t.wavelength_nm * 1e-9, t.angle_deg.to_radians())?;
        let species = self.species()?;
        let environment = self.environment()?;
        match (t.depth_uk, t.effective_depth_uk) {
            (Some(_), Some(_)) => Err(Error::config("trap: give depth_uk or effective_depth_uk, not both")),
            (Some(u0), None) => TrapConfig::new(geometry, u0 * MICRO, species, environment),
            (None, target) => {
                let u_eff = target.unwrap_or(657.0) * MICRO;
                let probe = TrapConfig::new(geometry, u_eff, species, environment)?;
                let u0 = depth_for_effective(&probe, u_eff)?;
                Ok(probe.with_depth(u0))
            }
        }
    }

    pub fn molasses(&self) -> MolassesExtent {
        MolassesExtent {
            l1: self.regions.molasses_l1_m,
            l2: self.regions.molasses_l2_m,
        }
    }

    pub fn roi(&self) -> Region {
        let w = self.trap.waist_um * MICRO;
        Region::CenterRoi {
            l1: self.regions.roi_l1_waists * w,
            l2: self.regions.roi_l2_waists * w,
        }
    }

    /// Cloud temperature for a trap, K.
    pub fn temperature(&self, trap: &TrapConfig) -> f64 {
        match self.run.temperature_uk {
            Some(t) => t * MICRO,
            None => self.coefficients.eta * effective_depth(trap).u_eff,
        }
    }

    pub fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.run.ode_rtol,
            atol: self.run.ode_atol,
            ..OdeOptions::default()
        }
    }

    pub fn gamma_loss(&self) -> Result<f64> {
        match self.coefficients.gamma_loss_per_s {
            Some(g) => Ok(g),
            None => Ok(gamma_background(&self.environment()?, &self.species()?)),
        }
    }

    /// Rate coefficients for the configured trap, resolving every
    /// coefficient not overridden from the physical model.
    pub fn rate_coefficients(&self) -> Result<RateCoefficients> {
        let trap = self.trap()?;
        let c = &self.coefficients;
        let temperature = self.temperature(&trap);
        let beta0 = match c.beta0_cm3_per_s {
            Some(b) => b * CUBIC_CENTIMETRE,
            None => beta0_collisional(temperature, &trap.species, c.loss_probability)?,
        };
        let v_c = match c.effective_volume_m3 {
            Some(v) => v,
            None => {
                let state = CloudState::thermal(1.0, temperature)?;
                effective_volume_with(&state, &trap, &self.roi(), self.molasses())?
            }
        };
        Ok(RateCoefficients::new(self.gamma_loss()?, beta0, v_c, c.gamma_per_s)?.with_eta(c.eta))
    }

    pub fn coefficient_model(&self) -> Result<CoefficientModel> {
        let c = &self.coefficients;
        Ok(CoefficientModel {
            trap: self.trap()?,
            eta: c.eta,
            alpha: c.alpha,
            gamma_loss: self.gamma_loss()?,
            gamma: c.gamma_per_s,
            loss_probability: c.loss_probability,
            beta0: c.beta0_cm3_per_s.map(|b| b * CUBIC_CENTIMETRE),
            volume: match c.effective_volume_m3 {
                Some(v) => VolumeModel::Fixed { effective_volume: v },
                None => VolumeModel::Equilibrium,
            },
            roi: self.roi(),
            molasses: self.molasses(),
        })
    }
}

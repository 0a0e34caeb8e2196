//! Physical constants, unit conventions and the species / environment types.
//!
//! Conventions used throughout the crate:
//!
//! * energies are stored in joules;
//! * trap depths and temperatures are reported in kelvin ("temperature
//!   units", energy divided by `k_B`);
//! * lengths in metres, times in seconds, atom numbers are plain `f64`.
//!
//! Functions that take a depth in kelvin say so in the argument name
//! (`depth_k`, `temperature_k`, ...).

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (exact, SI 2019).
pub const K_B: f64 = 1.380_649e-23;
/// Bohr radius, m (CODATA 2018).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Atomic mass constant, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Standard gravitational acceleration used as the default, m/s^2.
pub const DEFAULT_GRAVITY: f64 = 9.81;
/// Mass of 87Rb, kg.
pub const RB87_MASS: f64 = 86.909_180_531 * ATOMIC_MASS_UNIT;
/// s-wave scattering length of 87Rb used for the default cross-section, in Bohr radii.
///
/// Literature value for the triplet channel; the cross-section is not part of
/// the transport model itself, so it is kept as a configurable default.
pub const RB87_SCATTERING_LENGTH_BOHR: f64 = 98.0;

pub const MICRO: f64 = 1e-6;

/// Convert an energy in joules to temperature units.
#[inline]
pub fn joules_to_kelvin(energy_j: f64) -> f64 {
    energy_j / K_B
}

/// Convert a temperature-unit energy to joules.
#[inline]
pub fn kelvin_to_joules(energy_k: f64) -> f64 {
    energy_k * K_B
}

/// Mean speed of a Maxwell-Boltzmann gas, `sqrt(8 k_B T / (pi m))`, in m/s.
pub fn mean_thermal_speed(temperature_k: f64, mass_kg: f64) -> Result<f64> {
    if !(temperature_k > 0.0) || !temperature_k.is_finite() {
        return Err(Error::domain(format!(
            "temperature must be positive, got {temperature_k} K"
        )));
    }
    if !(mass_kg > 0.0) || !mass_kg.is_finite() {
        return Err(Error::domain(format!(
            "mass must be positive, got {mass_kg} kg"
        )));
    }
    Ok((8.0 * K_B * temperature_k / (PI * mass_kg)).sqrt())
}

/// Ideal-gas number density `P / (k_B T)`, in m^-3.
pub fn background_density(pressure_pa: f64, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) || !temperature_k.is_finite() {
        return Err(Error::domain(format!(
            "background temperature must be positive, got {temperature_k} K"
        )));
    }
    if !(pressure_pa >= 0.0) || !pressure_pa.is_finite() {
        return Err(Error::domain(format!(
            "pressure must be non-negative, got {pressure_pa} Pa"
        )));
    }
    Ok(pressure_pa / (K_B * temperature_k))
}

/// Atomic species: mass and elastic scattering cross-section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesConstants {
    pub name: String,
    /// kg
    pub mass: f64,
    /// m^2
    pub cross_section: f64,
}

impl SpeciesConstants {
    pub fn new(name: impl Into<String>, mass: f64, cross_section: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::domain(format!("species mass must be positive, got {mass}")));
        }
        if !(cross_section > 0.0) || !cross_section.is_finite() {
            return Err(Error::domain(format!(
                "cross-section must be positive, got {cross_section}"
            )));
        }
        Ok(SpeciesConstants {
            name: name.into(),
            mass,
            cross_section,
        })
    }

    /// 87Rb with `sigma = 8 pi a^2`, `a = 98 a_0` (about 6.8e-16 m^2).
    pub fn rubidium87() -> Self {
        let a = RB87_SCATTERING_LENGTH_BOHR * BOHR_RADIUS;
        SpeciesConstants {
            name: "87Rb".to_string(),
            mass: RB87_MASS,
            cross_section: 8.0 * PI * a * a,
        }
    }

    pub fn mean_speed(&self, temperature_k: f64) -> Result<f64> {
        mean_thermal_speed(temperature_k, self.mass)
    }
}

/// How the background gas is specified. The other quantity is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundGas {
    /// Pa
    Pressure(f64),
    /// m^-3
    Density(f64),
}

/// Gravity and background-gas environment of the trap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    /// m/s^2, zero for microgravity.
    pub gravity: f64,
    /// K
    pub background_temperature: f64,
    pub background: BackgroundGas,
}

impl Environment {
    pub fn new(gravity: f64, background_temperature: f64, background: BackgroundGas) -> Result<Self> {
        if !(gravity >= 0.0) || !gravity.is_finite() {
            return Err(Error::domain(format!("gravity must be >= 0, got {gravity}")));
        }
        if !(background_temperature > 0.0) || !background_temperature.is_finite() {
            return Err(Error::domain(format!(
                "background temperature must be positive, got {background_temperature}"
            )));
        }
        match background {
            BackgroundGas::Pressure(p) if !(p >= 0.0) || !p.is_finite() => {
                return Err(Error::domain(format!("pressure must be >= 0, got {p}")))
            }
            BackgroundGas::Density(n) if !(n >= 0.0) || !n.is_finite() => {
                return Err(Error::domain(format!("density must be >= 0, got {n}")))
            }
            _ => {}
        }
        Ok(Environment {
            gravity,
            background_temperature,
            background,
        })
    }

    /// Laboratory defaults: g = 9.81 m/s^2, 300 K, 1.3e-9 Pa.
    pub fn laboratory() -> Self {
        Environment {
            gravity: DEFAULT_GRAVITY,
            background_temperature: 300.0,
            background: BackgroundGas::Pressure(1.3e-9),
        }
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.gravity = gravity;
        self
    }

    /// Background number density, m^-3.
    pub fn background_density(&self) -> f64 {
        match self.background {
            BackgroundGas::Density(n) => n,
            BackgroundGas::Pressure(p) => p / (K_B * self.background_temperature),
        }
    }

    /// Background pressure, Pa.
    pub fn background_pressure(&self) -> f64 {
        match self.background {
            BackgroundGas::Pressure(p) => p,
            BackgroundGas::Density(n) => n * K_B * self.background_temperature,
        }
    }

    pub fn is_microgravity(&self) -> bool {
        self.gravity == 0.0
    }
}

//! Kinetics of atom transport between the arms and the crossing of a
//! crossed optical dipole trap, with or without gravity.
//!
//! - [`potential`]: the two-beam potential, effective and arm depths,
//!   harmonic frequencies.
//! - [`equilibrium`]: truncated-Boltzmann statistics: density, effective
//!   volume, centre fraction, with a Monte Carlo cross-check.
//! - [`dynamics`]: loss and loading rates, the centre-population rate
//!   equation, regime classification, peaks and phase diagrams.
//! - [`estimation`]: coefficients from physical inputs and fits to data.
//! - [`config`], [`report`], [`commands`]: configuration, file formats and
//!   the operations behind the `codt` binary.

pub mod commands;
pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod numerics;
pub mod potential;
pub mod report;
pub mod units;

pub use error::{Error, Result};

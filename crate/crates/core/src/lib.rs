//! Semiclassical friction and diffusion of a polarizable particle in pumped,
//! high-finesse cavity modes, plus stochastic ensemble dynamics.
//!
//! Physical inputs live in [`params`] and are converted once into scaled
//! units (length `1/k`, time `1/κ`, momentum `ħk`, energy `ħκ`). Everything
//! downstream of [`params`] works in those scaled units with `ħ = k = κ = 1`.

pub mod coefficients;
pub mod confocal;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod langevin;
pub mod memory;
pub mod modes;
pub mod output;
pub mod params;
pub mod psd;
pub mod quadrature;
pub mod units;

pub use error::{Error, Result};

/// Position along the cavity axis and conjugate momentum, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

//! Physical constants, CODATA 2018 exact or recommended values.

/// Reduced Planck constant (J·s), exact since the 2019 SI redefinition.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s), exact.
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Atomic mass constant (kg), CODATA 2018.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// One ångström (m).
pub const ANGSTROM: f64 = 1e-10;

/// Bundle of the constants above, for callers that want to carry them around
/// or print them in a manifest.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
    pub eps0: f64,
    pub amu: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: Self = Self {
        hbar: HBAR,
        c: C,
        eps0: EPS0,
        amu: AMU,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

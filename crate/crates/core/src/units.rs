//! Unit-tagged quantities for the physical (SI) boundary of the library.
//!
//! Each quantity is a newtype over `f64` holding the SI value. Construction
//! rejects non-finite values; passing one quantity where another is expected
//! does not compile:
//!
//! ```compile_fail
//! use cavcool::units::{Kilograms, Meters};
//! use cavcool::params::recoil_frequency;
//! let m = Kilograms::from_amu(7000.0).unwrap();
//! let l = Meters::from_micrometers(1.5).unwrap();
//! // arguments swapped: wavelength where a mass is expected
//! let _ = recoil_frequency(l, m);
//! ```

use crate::constants::{AMU, ANGSTROM, EPS0};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! quantity {
    ($(#[$meta:meta])* $name:ident, $unit:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(f64);

        impl $name {
            /// Wraps an SI value; fails on NaN or infinity.
            pub fn new(si: f64) -> Result<Self> {
                if si.is_finite() {
                    Ok(Self(si))
                } else {
                    Err(Error::Domain(format!(
                        concat!(stringify!($name), " must be finite, got {}"),
                        si
                    )))
                }
            }

            /// Like [`Self::new`] but additionally requires a strictly positive value.
            pub fn positive(si: f64) -> Result<Self> {
                let q = Self::new(si)?;
                if si > 0.0 {
                    Ok(q)
                } else {
                    Err(Error::Domain(format!(
                        concat!(stringify!($name), " must be positive, got {}"),
                        si
                    )))
                }
            }

            pub fn get(self) -> f64 {
                self.0
            }

            pub const UNIT: &'static str = $unit;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:e} {}", self.0, $unit)
            }
        }

        impl std::ops::Mul<f64> for $name {
            type Output = $name;
            fn mul(self, rhs: f64) -> $name {
                $name(self.0 * rhs)
            }
        }
    };
}

quantity!(
    /// Mass.
    Kilograms, "kg"
);
quantity!(
    /// Length.
    Meters, "m"
);
quantity!(
    /// Area, used for cross sections.
    SquareMeters, "m^2"
);
quantity!(
    /// Volume, used for cavity mode volumes.
    CubicMeters, "m^3"
);
quantity!(
    /// Angular frequency or rate.
    RadPerSec, "rad/s"
);
quantity!(
    /// Optical power.
    Watts, "W"
);
quantity!(
    /// Scalar polarizability χ with induced dipole d = χE.
    Polarizability, "C m^2/V"
);

impl Kilograms {
    pub fn from_amu(amu: f64) -> Result<Self> {
        Self::new(amu * AMU)
    }

    pub fn to_amu(self) -> f64 {
        self.0 / AMU
    }
}

impl Meters {
    pub fn from_micrometers(um: f64) -> Result<Self> {
        Self::new(um * 1e-6)
    }

    pub fn from_millimeters(mm: f64) -> Result<Self> {
        Self::new(mm * 1e-3)
    }
}

impl SquareMeters {
    pub fn from_square_angstroms(a2: f64) -> Result<Self> {
        Self::new(a2 * ANGSTROM * ANGSTROM)
    }
}

impl CubicMeters {
    pub fn from_cubic_millimeters(mm3: f64) -> Result<Self> {
        Self::new(mm3 * 1e-9)
    }
}

impl RadPerSec {
    /// Rates quoted "in MHz" throughout this crate mean 10⁶ s⁻¹, with no
    /// factor 2π.
    pub fn from_mhz(mhz: f64) -> Result<Self> {
        Self::new(mhz * 1e6)
    }

    pub fn to_mhz(self) -> f64 {
        self.0 * 1e-6
    }
}

impl Polarizability {
    /// From the polarizability volume χ/(4πε₀) in Å³.
    pub fn from_angstrom3(a3: f64) -> Result<Self> {
        Self::new(a3 * ANGSTROM.powi(3) * 4.0 * std::f64::consts::PI * EPS0)
    }

    pub fn to_angstrom3(self) -> f64 {
        self.0 / (ANGSTROM.powi(3) * 4.0 * std::f64::consts::PI * EPS0)
    }
}

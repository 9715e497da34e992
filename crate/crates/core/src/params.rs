//! Single-particle coupling constants and photon rates from measurable inputs,
//! plus conversion to the scaled units used by every other module.

use crate::constants::{PhysicalConstants, AMU, ANGSTROM, EPS0};
use crate::error::{domain, Error, Result};
use crate::units::{
    CubicMeters, Kilograms, Meters, Polarizability, RadPerSec, SquareMeters, Watts,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Size parameter 2πR/λ above which the small-sphere formulas are flagged.
pub const SIZE_PARAMETER_WARN: f64 = 0.3;

/// A polarizable particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpecies {
    pub label: String,
    pub mass: Kilograms,
    pub chi: Polarizability,
    pub sigma_abs: SquareMeters,
    pub sigma_sca: SquareMeters,
}

impl ParticleSpecies {
    pub fn new(
        label: impl Into<String>,
        mass: Kilograms,
        chi: Polarizability,
        sigma_abs: SquareMeters,
        sigma_sca: SquareMeters,
    ) -> Result<Self> {
        let label = label.into();
        if mass.get() <= 0.0 {
            return domain(format!("{label}: mass must be positive"));
        }
        if chi.get() < 0.0 {
            return domain(format!("{label}: polarizability must be non-negative"));
        }
        if sigma_abs.get() < 0.0 || sigma_sca.get() < 0.0 {
            return domain(format!("{label}: cross sections must be non-negative"));
        }
        Ok(Self {
            label,
            mass,
            chi,
            sigma_abs,
            sigma_sca,
        })
    }
}

/// Cavity mode volume, wavelength and field decay rate κ (half the photon
/// loss rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub mode_volume: CubicMeters,
    pub wavelength: Meters,
    pub kappa: RadPerSec,
}

impl CavityGeometry {
    pub fn new(mode_volume: CubicMeters, wavelength: Meters, kappa: RadPerSec) -> Result<Self> {
        if mode_volume.get() <= 0.0 || wavelength.get() <= 0.0 || kappa.get() <= 0.0 {
            return domain("cavity volume, wavelength and kappa must be positive");
        }
        Ok(Self {
            mode_volume,
            wavelength,
            kappa,
        })
    }

    /// V = 0.1 mm³, λ = 1.5 µm, κ = 1 MHz.
    pub fn table1() -> Self {
        Self {
            mode_volume: CubicMeters::new(0.1e-9).unwrap(),
            wavelength: Meters::new(1.5e-6).unwrap(),
            kappa: RadPerSec::new(1e6).unwrap(),
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength.get()
    }
}

/// Rates derived from a species in a cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub omega_r: RadPerSec,
    /// Signed; non-positive for a non-negative polarizability.
    pub u0: RadPerSec,
    pub gamma_abs: RadPerSec,
    pub gamma_sca: RadPerSec,
}

impl DerivedRates {
    pub fn compute(species: &ParticleSpecies, cavity: &CavityGeometry) -> Result<Self> {
        Ok(Self {
            omega_r: recoil_frequency(species.mass, cavity.wavelength)?,
            u0: coupling_constant(species.chi, cavity.wavelength, cavity.mode_volume)?,
            gamma_abs: photon_rate(species.sigma_abs, cavity.mode_volume)?,
            gamma_sca: photon_rate(species.sigma_sca, cavity.mode_volume)?,
        })
    }
}

/// Where the pump amplitude comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpSource {
    Power(Watts),
    PhotonNumber(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub source: PumpSource,
    /// Cavity resonance minus pump frequency.
    pub detuning: RadPerSec,
    pub pumped_mode_id: String,
}

impl PumpConfig {
    pub fn photon_number(&self, cavity: &CavityGeometry) -> Result<f64> {
        match self.source {
            PumpSource::PhotonNumber(n) if n >= 0.0 && n.is_finite() => Ok(n),
            PumpSource::PhotonNumber(n) => domain(format!("photon number must be >= 0, got {n}")),
            PumpSource::Power(p) => pump_photon_number(p, cavity.kappa, cavity.wavelength),
        }
    }
}

/// ħk²/2m.
pub fn recoil_frequency(mass: Kilograms, wavelength: Meters) -> Result<RadPerSec> {
    if mass.get() <= 0.0 || wavelength.get() <= 0.0 {
        return domain("recoil_frequency needs positive mass and wavelength");
    }
    let k = 2.0 * PI / wavelength.get();
    RadPerSec::new(PhysicalConstants::CODATA_2018.hbar * k * k / (2.0 * mass.get()))
}

/// −ω_c χ / (2ε₀V).
pub fn coupling_constant(
    chi: Polarizability,
    wavelength: Meters,
    mode_volume: CubicMeters,
) -> Result<RadPerSec> {
    if mode_volume.get() <= 0.0 {
        return domain("mode volume must be positive");
    }
    if wavelength.get() <= 0.0 {
        return domain("wavelength must be positive");
    }
    let omega_c = 2.0 * PI * PhysicalConstants::CODATA_2018.c / wavelength.get();
    RadPerSec::new(-omega_c * chi.get() / (2.0 * EPS0 * mode_volume.get()))
}

/// cσ/V. The table's "2γ" columns are twice this.
pub fn photon_rate(sigma: SquareMeters, mode_volume: CubicMeters) -> Result<RadPerSec> {
    if sigma.get() < 0.0 {
        return domain("cross section must be non-negative");
    }
    if mode_volume.get() <= 0.0 {
        return domain("mode volume must be positive");
    }
    RadPerSec::new(PhysicalConstants::CODATA_2018.c * sigma.get() / mode_volume.get())
}

fn clausius_mossotti(epsilon: Complex64) -> Result<Complex64> {
    let den = epsilon + 2.0;
    if den.norm() < 1e-12 {
        return Err(Error::Singularity(format!(
            "dielectric constant {epsilon} hits the sphere resonance at -2"
        )));
    }
    Ok((epsilon - 1.0) / den)
}

fn check_sphere(radius: Meters, wavelength: Option<Meters>) -> Result<()> {
    if radius.get() <= 0.0 {
        return domain("sphere radius must be positive");
    }
    if let Some(l) = wavelength {
        if l.get() <= 0.0 {
            return domain("wavelength must be positive");
        }
        let size = 2.0 * PI * radius.get() / l.get();
        if size > SIZE_PARAMETER_WARN {
            log::warn!("size parameter 2πR/λ = {size:.3} is not small; Rayleigh limit inaccurate");
        }
    }
    Ok(())
}

/// Complex polarizability 4πε₀R³(ε−1)/(ε+2) of a dielectric sphere.
pub fn sphere_polarizability(radius: Meters, epsilon: Complex64) -> Result<Complex64> {
    check_sphere(radius, None)?;
    Ok(clausius_mossotti(epsilon)? * (4.0 * PI * EPS0 * radius.get().powi(3)))
}

pub fn absorption_cross_section(
    radius: Meters,
    epsilon: Complex64,
    wavelength: Meters,
) -> Result<SquareMeters> {
    check_sphere(radius, Some(wavelength))?;
    let r = radius.get();
    let size = 2.0 * PI * r / wavelength.get();
    SquareMeters::new(4.0 * PI * size * r * r * clausius_mossotti(epsilon)?.im)
}

pub fn rayleigh_cross_section(
    radius: Meters,
    epsilon: Complex64,
    wavelength: Meters,
) -> Result<SquareMeters> {
    check_sphere(radius, Some(wavelength))?;
    let r = radius.get();
    let size = 2.0 * PI * r / wavelength.get();
    SquareMeters::new(8.0 * PI / 3.0 * size.powi(4) * r * r * clausius_mossotti(epsilon)?.norm_sqr())
}

/// Rayleigh cross section k⁴χ²/(6πε₀²) written directly in terms of a real
/// polarizability, for species listed without an explicit σ_s.
pub fn rayleigh_cross_section_from_chi(
    chi: Polarizability,
    wavelength: Meters,
) -> Result<SquareMeters> {
    if wavelength.get() <= 0.0 {
        return domain("wavelength must be positive");
    }
    let k = 2.0 * PI / wavelength.get();
    SquareMeters::new(k.powi(4) * chi.get().powi(2) / (6.0 * PI * EPS0 * EPS0))
}

/// P / (2κħω_p).
pub fn pump_photon_number(power: Watts, kappa: RadPerSec, wavelength: Meters) -> Result<f64> {
    if power.get() < 0.0 {
        return domain("pump power must be non-negative");
    }
    if kappa.get() <= 0.0 || wavelength.get() <= 0.0 {
        return domain("kappa and wavelength must be positive");
    }
    let c = PhysicalConstants::CODATA_2018;
    let omega_p = 2.0 * PI * c.c / wavelength.get();
    Ok(power.get() / (2.0 * kappa.get() * c.hbar * omega_p))
}

// ---------------------------------------------------------------------------
// Weak-coupling diagnostics

pub const VALIDITY_WARN: f64 = 0.3;
pub const VALIDITY_FAIL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl Verdict {
    pub fn of(ratio: f64) -> Self {
        if !(ratio < VALIDITY_FAIL) {
            Verdict::Fail
        } else if ratio >= VALIDITY_WARN {
            Verdict::Warn
        } else {
            Verdict::Pass
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub ratio: f64,
    pub verdict: Verdict,
}

impl ValidityCheck {
    fn new(ratio: f64) -> Self {
        Self {
            ratio,
            verdict: Verdict::of(ratio),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// |U₀|/κ
    pub single_photon: ValidityCheck,
    /// |U₀α|/κ
    pub pumped: ValidityCheck,
    /// N|U₀α|/κ
    pub ensemble: ValidityCheck,
    /// 4|ω_r α / kv|·|U₀α/κ| at the reference velocity
    pub shearing: ValidityCheck,
}

impl ValidityReport {
    pub fn overall(&self) -> Verdict {
        [self.single_photon, self.pumped, self.ensemble, self.shearing]
            .iter()
            .map(|c| c.verdict)
            .max()
            .unwrap_or(Verdict::Pass)
    }
}

/// Weak-coupling and shearing ratios. `reference_kv` is the Doppler rate kv
/// at which the shearing condition is judged; it defaults to κ.
pub fn validity_report(
    rates: &DerivedRates,
    cavity: &CavityGeometry,
    photon_number: f64,
    particle_count: usize,
    reference_kv: Option<RadPerSec>,
) -> ValidityReport {
    let kappa = cavity.kappa.get();
    let alpha = photon_number.max(0.0).sqrt();
    let u0 = rates.u0.get().abs();
    let pumped = u0 * alpha / kappa;
    let kv = reference_kv.map_or(kappa, |r| r.get().abs());
    let shearing = if alpha == 0.0 {
        0.0
    } else {
        4.0 * (rates.omega_r.get() * alpha / kv) * pumped
    };
    ValidityReport {
        single_photon: ValidityCheck::new(u0 / kappa),
        pumped: ValidityCheck::new(pumped),
        ensemble: ValidityCheck::new(particle_count as f64 * pumped),
        shearing: ValidityCheck::new(shearing),
    }
}

// ---------------------------------------------------------------------------
// Scaled units

/// Single-particle parameters in units with ħ = k = κ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParticle {
    /// κ/(2ω_r); momentum p and velocity relate by kv/κ = p/mass.
    pub mass: f64,
    /// U₀/κ, signed.
    pub u0: f64,
    pub gamma_abs: f64,
    pub gamma_sca: f64,
}

impl ScaledParticle {
    pub fn from_rates(rates: &DerivedRates, cavity: &CavityGeometry) -> Self {
        let kappa = cavity.kappa.get();
        Self {
            mass: kappa / (2.0 * rates.omega_r.get()),
            u0: rates.u0.get() / kappa,
            gamma_abs: rates.gamma_abs.get() / kappa,
            gamma_sca: rates.gamma_sca.get() / kappa,
        }
    }

    /// Particle with ω_r/κ = `recoil` and no photon loss channels.
    pub fn from_recoil(recoil: f64, u0: f64) -> Result<Self> {
        if !(recoil > 0.0) {
            return domain("recoil ratio must be positive");
        }
        Ok(Self {
            mass: 1.0 / (2.0 * recoil),
            u0,
            gamma_abs: 0.0,
            gamma_sca: 0.0,
        })
    }

    pub fn recoil(&self) -> f64 {
        1.0 / (2.0 * self.mass)
    }
}

// ---------------------------------------------------------------------------
// Catalogue

#[derive(Debug, Clone, Deserialize)]
struct CatalogueEntry {
    label: String,
    mass_amu: f64,
    #[serde(rename = "chi_A3")]
    chi_a3: f64,
    #[serde(rename = "sigma_abs_A2")]
    sigma_abs_a2: Option<f64>,
    #[serde(rename = "sigma_sca_A2")]
    sigma_sca_a2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct CatalogueFile {
    #[serde(default)]
    species: Vec<CatalogueEntry>,
}

const SHIPPED_CATALOGUE: &str = include_str!("../data/species.toml");

/// Species list read from a TOML `[[species]]` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalogue {
    pub species: Vec<ParticleSpecies>,
}

impl Catalogue {
    /// Parses a catalogue. Missing scattering cross sections are computed at
    /// `wavelength` from the polarizability.
    pub fn parse(text: &str, wavelength: Meters) -> Result<Self> {
        let file: CatalogueFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("species catalogue: {e}")))?;
        let mut species = Vec::with_capacity(file.species.len());
        for e in file.species {
            let chi = Polarizability::from_angstrom3(e.chi_a3)?;
            let sigma_sca = match e.sigma_sca_a2 {
                Some(s) => SquareMeters::from_square_angstroms(s)?,
                None => rayleigh_cross_section_from_chi(chi, wavelength)?,
            };
            species.push(ParticleSpecies::new(
                e.label,
                Kilograms::new(e.mass_amu * AMU)?,
                chi,
                SquareMeters::new(e.sigma_abs_a2.unwrap_or(0.0) * ANGSTROM * ANGSTROM)?,
                sigma_sca,
            )?);
        }
        Ok(Self { species })
    }

    pub fn load(path: &Path, wavelength: Meters) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, wavelength)
    }

    /// The six-species table at λ = 1.5 µm.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_CATALOGUE, CavityGeometry::table1().wavelength)
            .expect("shipped catalogue parses")
    }

    pub fn get(&self, label: &str) -> Option<&ParticleSpecies> {
        self.species.iter().find(|s| s.label == label)
    }
}

/// A row of reference derived values, in MHz (10⁶ s⁻¹).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct ReferenceRow {
    pub label: String,
    pub omega_r: f64,
    pub u0_abs: f64,
    pub two_gamma_a: Option<f64>,
    pub two_gamma_s: Option<f64>,
    /// Columns given only as an order of magnitude.
    #[serde(default)]
    pub approx: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct ReferenceFile {
    row: Vec<ReferenceRow>,
}

const SHIPPED_REFERENCE: &str = include_str!("../data/table1_reference.toml");

pub fn table1_reference() -> Vec<ReferenceRow> {
    toml::from_str::<ReferenceFile>(SHIPPED_REFERENCE)
        .expect("shipped reference parses")
        .row
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn li1000() -> ParticleSpecies {
        Catalogue::shipped().get("Li1000").unwrap().clone()
    }

    #[test]
    fn recoil_li1000() {
        let wr = recoil_frequency(
            Kilograms::from_amu(7000.0).unwrap(),
            Meters::from_micrometers(1.5).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(wr.to_mhz(), 8.0e-5, max_relative = 0.01);
    }

    #[test]
    fn recoil_au1000() {
        let wr = recoil_frequency(
            Kilograms::from_amu(197000.0).unwrap(),
            Meters::from_micrometers(1.5).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(wr.to_mhz(), 2.8e-6, max_relative = 0.02);
    }

    #[test]
    fn recoil_halves_with_double_mass() {
        let l = Meters::from_micrometers(1.5).unwrap();
        let a = recoil_frequency(Kilograms::from_amu(100.0).unwrap(), l).unwrap();
        let b = recoil_frequency(Kilograms::from_amu(200.0).unwrap(), l).unwrap();
        assert_eq!(a.get(), 2.0 * b.get());
    }

    #[test]
    fn recoil_rejects_non_positive() {
        let l = Meters::from_micrometers(1.5).unwrap();
        assert!(recoil_frequency(Kilograms::new(0.0).unwrap(), l).is_err());
        assert!(recoil_frequency(Kilograms::new(1.0).unwrap(), Meters::new(-1.0).unwrap()).is_err());
    }

    #[test]
    fn coupling_constant_examples() {
        let l = Meters::from_micrometers(1.5).unwrap();
        let v = CubicMeters::from_cubic_millimeters(0.1).unwrap();
        let li1000 =
            coupling_constant(Polarizability::from_angstrom3(5501.0).unwrap(), l, v).unwrap();
        assert!(li1000.get() < 0.0);
        assert_relative_eq!(li1000.to_mhz().abs(), 4.3e-7, max_relative = 0.02);
        let li = coupling_constant(Polarizability::from_angstrom3(24.0).unwrap(), l, v).unwrap();
        assert_relative_eq!(li.to_mhz().abs(), 1.9e-9, max_relative = 0.02);
        let zero = coupling_constant(Polarizability::new(0.0).unwrap(), l, v).unwrap();
        assert_eq!(zero.get().abs(), 0.0);
        assert!(coupling_constant(
            Polarizability::new(1.0).unwrap(),
            l,
            CubicMeters::new(0.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn photon_rate_matches_table_columns() {
        let v = CubicMeters::from_cubic_millimeters(0.1).unwrap();
        let li = photon_rate(SquareMeters::from_square_angstroms(0.26).unwrap(), v).unwrap();
        assert_relative_eq!(2.0 * li.to_mhz(), 1.5e-8, max_relative = 0.05);
        let au = photon_rate(SquareMeters::from_square_angstroms(8.2e-2).unwrap(), v).unwrap();
        assert_relative_eq!(2.0 * au.to_mhz(), 4.9e-9, max_relative = 0.01);
        let zero = photon_rate(SquareMeters::new(0.0).unwrap(), v).unwrap();
        assert_eq!(zero.get(), 0.0);
    }

    #[test]
    fn sphere_limits() {
        let r = Meters::new(1e-9).unwrap();
        let vol = 4.0 * PI * EPS0 * 1e-27;
        let conductor = sphere_polarizability(r, Complex64::new(1e12, 0.0)).unwrap();
        assert_relative_eq!(conductor.re, vol, max_relative = 1e-10);
        let vacuum = sphere_polarizability(r, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(vacuum.norm(), 0.0);
        assert!(matches!(
            sphere_polarizability(r, Complex64::new(-2.0, 0.0)),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn lossy_sphere_has_positive_imaginary_polarizability() {
        let r = Meters::new(5e-9).unwrap();
        for i in 0..20 {
            for j in 1..20 {
                let eps = Complex64::new(-10.0 + i as f64, 0.1 * j as f64);
                assert!(sphere_polarizability(r, eps).unwrap().im > 0.0, "{eps}");
            }
        }
    }

    #[test]
    fn cross_section_examples() {
        let l = Meters::from_micrometers(1.5).unwrap();
        let r = Meters::new(1e-8).unwrap();
        let real = Complex64::new(2.1, 0.0);
        assert_eq!(absorption_cross_section(r, real, l).unwrap().get(), 0.0);
        let full = rayleigh_cross_section(r, real, l).unwrap().get();
        let half = rayleigh_cross_section(Meters::new(5e-9).unwrap(), real, l).unwrap().get();
        assert_relative_eq!(half / full, 2f64.powi(-6), max_relative = 1e-12);
    }

    #[test]
    fn rayleigh_li1000() {
        let l = Meters::from_micrometers(1.5).unwrap();
        let s = rayleigh_cross_section_from_chi(Polarizability::from_angstrom3(5501.0).unwrap(), l)
            .unwrap();
        assert_relative_eq!(s.get(), 7.8e-26, max_relative = 0.01);
        let v = CubicMeters::from_cubic_millimeters(0.1).unwrap();
        assert_relative_eq!(
            2.0 * photon_rate(s, v).unwrap().to_mhz(),
            4.7e-13,
            max_relative = 0.01
        );
    }

    #[test]
    fn rayleigh_from_chi_agrees_with_sphere_form() {
        let l = Meters::from_micrometers(1.5).unwrap();
        let r = Meters::new(2e-9).unwrap();
        let eps = Complex64::new(3.0, 0.0);
        let chi = sphere_polarizability(r, eps).unwrap().re;
        let a = rayleigh_cross_section(r, eps, l).unwrap().get();
        let b = rayleigh_cross_section_from_chi(Polarizability::new(chi).unwrap(), l)
            .unwrap()
            .get();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn photon_number_examples() {
        let cav = CavityGeometry::table1();
        let n = pump_photon_number(Watts::new(0.25).unwrap(), cav.kappa, cav.wavelength).unwrap();
        assert_relative_eq!(n, 9.4e11, max_relative = 0.01);
        let zero = pump_photon_number(Watts::new(0.0).unwrap(), cav.kappa, cav.wavelength).unwrap();
        assert_eq!(zero, 0.0);
        let double =
            pump_photon_number(Watts::new(0.5).unwrap(), cav.kappa, cav.wavelength).unwrap();
        assert_eq!(double, 2.0 * n);
    }

    #[test]
    fn validity_gold_cluster_warns() {
        let cav = CavityGeometry::table1();
        let au = Catalogue::shipped().get("Au1000").unwrap().clone();
        let rates = DerivedRates::compute(&au, &cav).unwrap();
        let rep = validity_report(&rates, &cav, 1e12, 1, None);
        assert_relative_eq!(rep.pumped.ratio, 0.33, max_relative = 0.02);
        assert_eq!(rep.pumped.verdict, Verdict::Warn);
    }

    #[test]
    fn validity_zero_pump_passes() {
        let cav = CavityGeometry::table1();
        let rates = DerivedRates::compute(&li1000(), &cav).unwrap();
        let rep = validity_report(&rates, &cav, 0.0, 5, None);
        assert_eq!(rep.pumped.ratio, 0.0);
        assert_eq!(rep.ensemble.ratio, 0.0);
        assert_eq!(rep.shearing.ratio, 0.0);
        // |U₀|/κ is pump independent and tiny
        assert_eq!(rep.overall(), Verdict::Pass);
    }

    #[test]
    fn validity_thousand_fullerenes_fail() {
        let cav = CavityGeometry::table1();
        let c60 = Catalogue::shipped().get("C60").unwrap().clone();
        let rates = DerivedRates::compute(&c60, &cav).unwrap();
        assert_eq!(validity_report(&rates, &cav, 1e12, 1, None).ensemble.verdict, Verdict::Pass);
        let rep = validity_report(&rates, &cav, 1e12, 1000, None);
        assert_eq!(rep.ensemble.verdict, Verdict::Fail);
    }

    #[test]
    fn catalogue_has_six_species() {
        let cat = Catalogue::shipped();
        assert_eq!(cat.species.len(), 6);
        assert_eq!(cat.get("He1000").unwrap().sigma_abs.get(), 0.0);
        assert!(Catalogue::parse("[[species]]\nlabel = 'x'\nmass_amu = -1.0\nchi_A3 = 1.0\n",
            CavityGeometry::table1().wavelength).is_err());
        assert!(Catalogue::parse("not toml [", CavityGeometry::table1().wavelength).is_err());
    }

    #[test]
    fn scaled_mass_matches_recoil() {
        let cav = CavityGeometry::table1();
        let rates = DerivedRates::compute(&li1000(), &cav).unwrap();
        let s = ScaledParticle::from_rates(&rates, &cav);
        assert_relative_eq!(s.recoil(), rates.omega_r.get() / cav.kappa.get(), max_relative = 1e-14);
        assert!(s.u0 < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn recoil_decreasing_in_mass(a in 1.0f64..1e6, f in 1.001f64..10.0) {
                let l = Meters::from_micrometers(1.5).unwrap();
                let light = recoil_frequency(Kilograms::from_amu(a).unwrap(), l).unwrap();
                let heavy = recoil_frequency(Kilograms::from_amu(a * f).unwrap(), l).unwrap();
                prop_assert!(heavy.get() < light.get());
            }

            #[test]
            fn coupling_increasing_in_chi(a in 0.1f64..1e5, f in 1.001f64..10.0) {
                let l = Meters::from_micrometers(1.5).unwrap();
                let v = CubicMeters::from_cubic_millimeters(0.1).unwrap();
                let lo = coupling_constant(Polarizability::from_angstrom3(a).unwrap(), l, v).unwrap();
                let hi = coupling_constant(Polarizability::from_angstrom3(a * f).unwrap(), l, v).unwrap();
                prop_assert!(hi.get().abs() > lo.get().abs());
            }

            #[test]
            fn rate_linear_in_sigma(s in 0.0f64..10.0, f in 0.0f64..100.0) {
                let v = CubicMeters::from_cubic_millimeters(0.1).unwrap();
                let one = photon_rate(SquareMeters::from_square_angstroms(s).unwrap(), v).unwrap();
                let many = photon_rate(SquareMeters::from_square_angstroms(s * f).unwrap(), v).unwrap();
                prop_assert!((many.get() - f * one.get()).abs() <= 1e-12 * many.get().abs().max(1e-30));
            }
        }
    }
}

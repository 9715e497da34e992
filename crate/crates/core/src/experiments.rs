//! Experiment runners shared by the command-line front end and the
//! acceptance tests. Each takes its section of an [`ExperimentConfig`] and
//! returns data tables plus a JSON summary.

use crate::coefficients::{
    averaged_friction_scaling, cooling_limit, cooling_limit_fokker_planck, diffusion_budget,
    fp_averaged, fp_local_diffusion, DissipativeModel, PumpOrientation, ScatteringPattern,
    DEFAULT_MEMORY_TOLERANCE,
};
use crate::confocal::{friction_profile, saturation_sweep, transverse_overlaps, ConfocalStudy};
use crate::error::{Error, Result};
use crate::langevin::{
    run_ensemble, velocity_capture_scan, CaptureScan, ClampPolicy, InitialState, SimulationConfig,
};
use crate::modes::{export_modes_json, ConfocalSetup, ModeChannel, ModeGeometry};
use crate::output::{Cell, CsvTable};
use crate::params::{
    pump_photon_number, table1_reference, validity_report, Catalogue, CavityGeometry, DerivedRates,
    ReferenceRow, ScaledParticle, Verdict,
};
use crate::units::{CubicMeters, Meters, RadPerSec, Watts};
use crate::PhaseSpacePoint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::path::PathBuf;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    pub mode_volume_mm3: f64,
    pub wavelength_um: f64,
    /// κ in 10⁶ s⁻¹.
    pub kappa_mhz: f64,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            mode_volume_mm3: 0.1,
            wavelength_um: 1.5,
            kappa_mhz: 1.0,
        }
    }
}

impl CavitySection {
    pub fn geometry(&self) -> Result<CavityGeometry> {
        CavityGeometry::new(
            CubicMeters::from_cubic_millimeters(self.mode_volume_mm3)?,
            Meters::from_micrometers(self.wavelength_um)?,
            RadPerSec::from_mhz(self.kappa_mhz)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSection {
    /// |α|²; takes precedence over `power_w`.
    pub photon_number: Option<f64>,
    pub power_w: Option<f64>,
    /// Δ in units of κ.
    pub detuning: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            photon_number: Some(1e12),
            power_w: None,
            detuning: INV_SQRT3,
        }
    }
}

impl PumpSection {
    pub fn photon_number(&self, cavity: &CavityGeometry) -> Result<f64> {
        match (self.photon_number, self.power_w) {
            (Some(n), _) if n >= 0.0 && n.is_finite() => Ok(n),
            (Some(n), _) => Err(config_err(format!("photon_number must be >= 0, got {n}"))),
            (None, Some(p)) => pump_photon_number(Watts::new(p)?, cavity.kappa, cavity.wavelength),
            (None, None) => Err(config_err("pump needs photon_number or power_w")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Section {
    /// Species file; the shipped six-species table when absent.
    pub catalogue: Option<PathBuf>,
    /// Relative tolerance against the reference values.
    pub tolerance: f64,
}

impl Default for Table1Section {
    fn default() -> Self {
        Self {
            catalogue: None,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceScanSection {
    pub recoil: f64,
    /// |U₀α|/κ.
    pub coupling: f64,
    pub detunings: Vec<f64>,
    pub kv_max: f64,
    pub points: usize,
    /// Random positions per grid point for the sampled force; 0 skips it.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ForceScanSection {
    fn default() -> Self {
        Self {
            recoil: 1e-3,
            coupling: 0.1,
            detunings: vec![INV_SQRT3, 2.0, 5.0],
            kv_max: 10.0,
            points: 401,
            samples: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffScanSection {
    pub recoil: f64,
    pub coupling: f64,
    pub detuning: f64,
    pub velocities: Vec<f64>,
    pub points: usize,
}

impl Default for DiffScanSection {
    fn default() -> Self {
        Self {
            recoil: 1e-3,
            coupling: 0.1,
            detuning: INV_SQRT3,
            velocities: vec![0.0, 1.0, 2.0, 5.0],
            points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfocalSection {
    pub mirror_distance_mm: f64,
    pub n0: i64,
    /// Transverse order caps whose β(x) curves are written.
    pub profile_caps: Vec<u32>,
    /// Largest order for the saturation sweep.
    pub sweep_cap: u32,
    pub detuning: f64,
    pub coupling: f64,
    pub recoil: f64,
    pub box_half_width: f64,
    pub pump_waist: f64,
    pub min_grid: usize,
    pub max_grid: usize,
    pub grid_tolerance: f64,
    pub points: usize,
    /// kx range of the profiles, centred on the cavity middle.
    pub x_span: f64,
}

impl Default for ConfocalSection {
    fn default() -> Self {
        Self {
            mirror_distance_mm: 10.0,
            n0: 20_000,
            profile_caps: vec![0, 8, 18],
            sweep_cap: 54,
            detuning: INV_SQRT3,
            coupling: 0.1,
            recoil: 1e-3,
            box_half_width: 4.0,
            pump_waist: 1.0,
            min_grid: 64,
            max_grid: 2048,
            grid_tolerance: 1e-3,
            points: 401,
            x_span: 2.0 * PI,
        }
    }
}

impl ConfocalSection {
    pub fn study(&self) -> Result<ConfocalStudy> {
        Ok(ConfocalStudy {
            setup: ConfocalSetup::with_order_cap(self.mirror_distance_mm * 1e-3, self.n0, self.sweep_cap)?,
            delta: self.detuning,
            coupling: self.coupling,
            recoil: self.recoil,
            box_half_width: self.box_half_width,
            pump_waist: self.pump_waist,
            min_grid: self.min_grid,
            max_grid: self.max_grid,
            grid_tolerance: self.grid_tolerance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolSection {
    pub recoil: f64,
    pub coupling: f64,
    pub detuning: f64,
    pub trajectories: usize,
    pub dt: f64,
    pub phase_step: f64,
    pub t_end: f64,
    pub samples: usize,
    pub steady_from: f64,
    pub initial_kv: f64,
    pub initial_x: Option<f64>,
    pub clamp_policy: ClampPolicy,
    pub clamp_floor: Option<f64>,
    /// Adds the dipole force of the pump lattice.
    pub conservative: bool,
    pub seed: u64,
    /// Relative band around the stationary-energy estimate counted as a pass.
    pub tolerance: f64,
}

impl Default for CoolSection {
    fn default() -> Self {
        Self {
            recoil: 1e-3,
            coupling: 0.1,
            detuning: INV_SQRT3,
            trajectories: 10_000,
            dt: 20.0,
            phase_step: 0.5,
            t_end: 4e5,
            samples: 200,
            steady_from: 0.5,
            initial_kv: 0.0,
            initial_x: None,
            clamp_policy: ClampPolicy::ProjectPsd,
            clamp_floor: None,
            conservative: false,
            seed: 1,
            tolerance: 0.3,
        }
    }
}

impl CoolSection {
    pub fn simulation(&self, memory_tolerance: f64) -> Result<SimulationConfig> {
        let mut c = SimulationConfig::single_mode(self.recoil, self.detuning, self.coupling)?;
        c.trajectories = self.trajectories;
        c.dt = self.dt;
        c.phase_step = self.phase_step;
        c.t_end = self.t_end;
        c.samples = self.samples;
        c.steady_from = self.steady_from;
        c.seed = self.seed;
        c.clamp_policy = self.clamp_policy;
        c.clamp_floor = self.clamp_floor.unwrap_or(self.recoil);
        c.conservative = self.conservative;
        c.initial = InitialState {
            p: self.initial_kv * c.particle.mass,
            x: self.initial_x,
        };
        c.tolerance = memory_tolerance;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Axial,
    Perpendicular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// Labels to evaluate; all catalogue species when empty.
    pub species: Vec<String>,
    pub orientations: Vec<Orientation>,
    /// Waist of the perpendicular pump.
    pub pump_waist_um: f64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            species: Vec::new(),
            orientations: vec![Orientation::Axial, Orientation::Perpendicular],
            pump_waist_um: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub species: Vec<String>,
    pub particle_count: usize,
    /// Doppler rate kv/κ at which the shearing condition is judged.
    pub reference_kv: f64,
    /// Count the shearing check towards the exit status. It fails near kv = 0
    /// for every pumped species, so by default it is reported only.
    pub shearing_blocks: bool,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            species: Vec::new(),
            particle_count: 1,
            reference_kv: 1.0,
            shearing_blocks: false,
        }
    }
}

/// Full configuration. Every field has a default reproducing the reference
/// parameter set, so an empty file is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub catalogue: Option<PathBuf>,
    pub memory_tolerance: Option<f64>,
    pub cavity: CavitySection,
    pub pump: PumpSection,
    pub table1: Table1Section,
    pub forcescan: ForceScanSection,
    pub diffscan: DiffScanSection,
    pub confocal: ConfocalSection,
    pub cool: CoolSection,
    pub budget: BudgetSection,
    pub validate: ValidateSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn memory_tolerance(&self) -> f64 {
        self.memory_tolerance.unwrap_or(DEFAULT_MEMORY_TOLERANCE)
    }

    pub fn load_catalogue(&self, override_path: Option<&PathBuf>) -> Result<Catalogue> {
        let wavelength = Meters::from_micrometers(self.cavity.wavelength_um)?;
        match override_path.or(self.catalogue.as_ref()) {
            Some(p) => Catalogue::load(p, wavelength),
            None if (self.cavity.wavelength_um - 1.5).abs() < 1e-12 => Ok(Catalogue::shipped()),
            None => Catalogue::parse(include_str!("../data/species.toml"), wavelength),
        }
    }

    fn select<'a>(&self, catalogue: &'a Catalogue, labels: &[String]) -> Result<Vec<&'a crate::params::ParticleSpecies>> {
        if labels.is_empty() {
            return Ok(catalogue.species.iter().collect());
        }
        labels
            .iter()
            .map(|l| catalogue.get(l).ok_or_else(|| config_err(format!("unknown species {l:?}"))))
            .collect()
    }
}

/// Tables and summary produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub name: &'static str,
    pub tables: Vec<(String, CsvTable)>,
    /// Extra non-tabular files, e.g. the exported mode list.
    pub files: Vec<(String, String)>,
    pub summary: Value,
    /// False when a validation check in the experiment failed.
    pub passed: bool,
}

// ---------------------------------------------------------------------------
// Table of derived rates

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub label: String,
    pub omega_r_mhz: f64,
    pub u0_abs_mhz: f64,
    pub two_gamma_a_mhz: f64,
    pub two_gamma_s_mhz: f64,
    /// Worst relative deviation from the reference row, if one exists.
    pub worst_deviation: Option<f64>,
    pub failed_columns: Vec<String>,
}

fn compare_cell(computed: f64, reference: Option<f64>, approx: bool, tolerance: f64) -> (f64, bool) {
    match reference {
        None => (if computed == 0.0 { 0.0 } else { f64::INFINITY }, computed == 0.0),
        Some(p) if approx => {
            let dev = (computed / p).log10().abs();
            (dev, dev <= 1.0)
        }
        Some(p) => {
            let dev = (computed - p).abs() / p.abs();
            (dev, dev <= tolerance)
        }
    }
}

pub fn table1_rows(
    catalogue: &Catalogue,
    cavity: &CavityGeometry,
    reference: &[ReferenceRow],
    tolerance: f64,
) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for sp in &catalogue.species {
        let r = DerivedRates::compute(sp, cavity)?;
        let mut row = Table1Row {
            label: sp.label.clone(),
            omega_r_mhz: r.omega_r.to_mhz(),
            u0_abs_mhz: r.u0.to_mhz().abs(),
            two_gamma_a_mhz: 2.0 * r.gamma_abs.to_mhz(),
            two_gamma_s_mhz: 2.0 * r.gamma_sca.to_mhz(),
            worst_deviation: None,
            failed_columns: Vec::new(),
        };
        if let Some(refrow) = reference.iter().find(|q| q.label == sp.label) {
            let cols = [
                ("omega_r", row.omega_r_mhz, Some(refrow.omega_r)),
                ("u0_abs", row.u0_abs_mhz, Some(refrow.u0_abs)),
                ("two_gamma_a", row.two_gamma_a_mhz, refrow.two_gamma_a),
                ("two_gamma_s", row.two_gamma_s_mhz, refrow.two_gamma_s),
            ];
            let mut worst: f64 = 0.0;
            for (name, v, reference) in cols {
                let approx = refrow.approx.iter().any(|a| a == name);
                let (dev, ok) = compare_cell(v, reference, approx, tolerance);
                if !approx {
                    worst = worst.max(dev);
                }
                if !ok {
                    row.failed_columns.push(name.to_string());
                }
            }
            row.worst_deviation = Some(worst);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_table1(config: &ExperimentConfig, catalogue: &Catalogue) -> Result<ExperimentOutput> {
    let cavity = config.cavity.geometry()?;
    let reference = table1_reference();
    let rows = table1_rows(catalogue, &cavity, &reference, config.table1.tolerance)?;
    let mut table = CsvTable::new(&[
        "label",
        "omega_r_mhz",
        "u0_abs_mhz",
        "two_gamma_a_mhz",
        "two_gamma_s_mhz",
        "worst_deviation",
        "failed_columns",
    ]);
    for r in &rows {
        table.push(vec![
            r.label.as_str().into(),
            r.omega_r_mhz.into(),
            r.u0_abs_mhz.into(),
            r.two_gamma_a_mhz.into(),
            r.two_gamma_s_mhz.into(),
            r.worst_deviation.into(),
            r.failed_columns.join(" ").into(),
        ]);
    }
    let missing: Vec<&str> = reference
        .iter()
        .filter(|q| catalogue.get(&q.label).is_none())
        .map(|q| q.label.as_str())
        .collect();
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| !r.failed_columns.is_empty())
        .map(|r| r.label.as_str())
        .collect();
    let passed = !rows.is_empty() && missing.is_empty() && failed.is_empty();
    Ok(ExperimentOutput {
        name: "table1",
        tables: vec![("table1.csv".into(), table)],
        files: vec![],
        summary: json!({
            "rows": rows,
            "missing_species": missing,
            "deviating_species": failed,
        }),
        passed,
    })
}

// ---------------------------------------------------------------------------
// Averaged force and capture range

pub fn run_forcescan(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.forcescan;
    if s.points < 2 || !(s.kv_max > 0.0) {
        return Err(config_err("forcescan needs points >= 2 and kv_max > 0"));
    }
    let scan = CaptureScan {
        mass: 1.0 / (2.0 * s.recoil),
        coupling_sq: s.coupling * s.coupling,
        samples: s.samples,
        seed: s.seed,
    };
    let kv: Vec<f64> = (0..s.points)
        .map(|i| s.kv_max * (2 * i as i64 - (s.points as i64 - 1)) as f64 / (s.points - 1) as f64)
        .collect();
    let rows = velocity_capture_scan(&scan, &kv, &s.detunings)?;
    let mut table = CsvTable::new(&["delta", "kv", "force", "sampled_force", "sampled_sem"]);
    for r in &rows {
        table.push(vec![
            r.delta.into(),
            r.kv.into(),
            r.force.into(),
            r.sampled.into(),
            r.sampled_sem.into(),
        ]);
    }
    let extrema: Vec<Value> = s
        .detunings
        .iter()
        .enumerate()
        .map(|(d, &delta)| {
            let curve = &rows[d * kv.len()..(d + 1) * kv.len()];
            let best = curve
                .iter()
                .filter(|r| r.kv > 0.0)
                .min_by(|a, b| a.force.total_cmp(&b.force))
                .map(|r| (r.kv, r.force));
            json!({ "delta": delta, "kv_of_strongest_damping": best.map(|b| b.0), "force": best.map(|b| b.1) })
        })
        .collect();
    Ok(ExperimentOutput {
        name: "forcescan",
        tables: vec![("forcescan.csv".into(), table)],
        files: vec![],
        summary: json!({ "extrema": extrema }),
        passed: true,
    })
}

// ---------------------------------------------------------------------------
// Position-resolved diffusion

pub fn run_diffscan(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.diffscan;
    if s.points < 2 {
        return Err(config_err("diffscan needs points >= 2"));
    }
    let mass = 1.0 / (2.0 * s.recoil);
    let g = s.coupling * s.coupling;
    let channel = ModeChannel::new(ModeGeometry::standing_cos(1.0), 1.0, s.detuning, s.coupling)?;
    let mut model = DissipativeModel::single(channel, Complex64::new(1.0, 0.0), mass)?;
    model.tolerance = config.memory_tolerance();
    let mut table = CsvTable::new(&["kv", "kx", "d_pp_closed", "d_pp_memory", "d_xp_memory"]);
    let mut per_velocity = Vec::new();
    let mut negative_at_rest = false;
    for &kv in &s.velocities {
        let mut min: f64 = f64::INFINITY;
        let mut mean = 0.0;
        for i in 0..s.points {
            let x = PI * i as f64 / s.points as f64;
            let closed = fp_local_diffusion(x, kv, 1.0, s.detuning, g);
            let t = model.terms(PhaseSpacePoint::new(x, kv * mass))?;
            table.push(vec![kv.into(), x.into(), closed.into(), t.d_pp.into(), t.d_xp.into()]);
            min = min.min(closed);
            mean += closed / s.points as f64;
        }
        if kv == 0.0 && min < 0.0 {
            negative_at_rest = true;
        }
        per_velocity.push(json!({
            "kv": kv,
            "min": min,
            "mean": mean,
            "averaged_closed_form": fp_averaged(kv, 1.0, s.detuning, g).d_pp,
        }));
    }
    Ok(ExperimentOutput {
        name: "diffscan",
        tables: vec![("diffscan.csv".into(), table)],
        files: vec![],
        summary: json!({ "velocities": per_velocity }),
        passed: !negative_at_rest,
    })
}

// ---------------------------------------------------------------------------
// Confocal multimode friction

/// Property checks on the confocal curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfocalChecks {
    pub monotone_in_modes: bool,
    pub all_negative: bool,
    /// min|β| ≥ 0.1·max|β| on the largest profile.
    pub largest_zero_free: bool,
    pub sweep_monotone: bool,
    /// Gain per added mode never increases along the sweep.
    pub sweep_concave: bool,
    pub grid_converged: bool,
}

impl ConfocalChecks {
    pub fn all(&self) -> bool {
        self.monotone_in_modes
            && self.all_negative
            && self.largest_zero_free
            && self.sweep_monotone
            && self.sweep_concave
            && self.grid_converged
    }
}

pub fn run_confocal(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.confocal;
    let study = s.study()?;
    if let Some(bad) = s.profile_caps.iter().find(|c| **c > s.sweep_cap || **c % 2 == 1) {
        return Err(config_err(format!(
            "profile cap {bad} must be even and at most sweep_cap {}",
            s.sweep_cap
        )));
    }
    let table = transverse_overlaps(&study)?;
    let xs: Vec<f64> = (0..s.points)
        .map(|i| -0.5 * s.x_span + s.x_span * i as f64 / (s.points - 1).max(1) as f64)
        .collect();
    let mut profile = CsvTable::new(&["modes", "kx", "friction_first", "friction_second", "friction_total", "friction_1e6"]);
    let mut curves = Vec::new();
    for &cap in &s.profile_caps {
        let count = table.count_up_to(cap);
        let p = friction_profile(&table, &study, count, &xs);
        for (x, t) in xs.iter().zip(&p) {
            profile.push(vec![
                count.into(),
                (*x).into(),
                t.first_order.into(),
                t.second_order.into(),
                t.total().into(),
                (t.total() * 1e6).into(),
            ]);
        }
        curves.push((count, p.iter().map(|t| t.total()).collect::<Vec<f64>>()));
    }
    let sweep = saturation_sweep(&table, &study);
    let mut sweep_table = CsvTable::new(&["order_cap", "modes", "mean_friction", "relative"]);
    for p in &sweep {
        sweep_table.push(vec![p.order_cap.into(), p.modes.into(), p.mean_friction.into(), p.relative.into()]);
    }
    let mut weights = CsvTable::new(&["n", "m", "l", "parity", "weight"]);
    for (r, w) in table.modes.iter().zip(&table.weights) {
        weights.push(vec![
            Cell::Int(r.n),
            r.m.into(),
            r.l.into(),
            format!("{:?}", r.parity).to_lowercase().into(),
            (*w).into(),
        ]);
    }

    let monotone_in_modes = curves.windows(2).all(|w| {
        w[0].1.iter().zip(&w[1].1).all(|(a, b)| b.abs() >= a.abs())
    });
    let all_negative = curves.iter().all(|(_, c)| c.iter().all(|v| *v < 0.0));
    let largest_zero_free = curves.last().is_some_and(|(_, c)| {
        let max = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let min = c.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        min >= 0.1 * max
    });
    let rel: Vec<f64> = sweep.iter().map(|p| p.relative).collect();
    let sweep_monotone = rel.windows(2).all(|w| w[1] > w[0]);
    let gains: Vec<f64> = sweep
        .windows(2)
        .map(|w| (w[1].relative - w[0].relative) / (w[1].modes - w[0].modes) as f64)
        .collect();
    let sweep_concave = gains.windows(2).all(|w| w[1] <= w[0]);
    let checks = ConfocalChecks {
        monotone_in_modes,
        all_negative,
        largest_zero_free,
        sweep_monotone,
        sweep_concave,
        grid_converged: table.converged,
    };
    let peaks: Vec<Value> = curves
        .iter()
        .map(|(m, c)| json!({ "modes": m, "peak": c.iter().copied().fold(0.0, f64::min) }))
        .collect();
    Ok(ExperimentOutput {
        name: "confocal",
        tables: vec![
            ("confocal_profile.csv".into(), profile),
            ("confocal_sweep.csv".into(), sweep_table),
            ("confocal_weights.csv".into(), weights),
        ],
        files: vec![("confocal_modes.json".into(), export_modes_json(&table.modes))],
        summary: json!({
            "w0_m": study.setup.w0,
            "wavelength_m": study.setup.wavelength(),
            "mode_count": table.modes.len(),
            "degeneracy_estimate": study.setup.degeneracy_estimate(),
            "grid": table.grid,
            "grid_relative_change": table.max_relative_change,
            "peaks": peaks,
            "checks": checks,
        }),
        passed: checks.all(),
    })
}

// ---------------------------------------------------------------------------
// Cooling run

pub fn run_cool(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let s = &config.cool;
    let sim = s.simulation(config.memory_tolerance())?;
    let stats = run_ensemble(&sim)?;
    let estimate = cooling_limit(1.0, s.detuning)?;
    let fokker_planck = cooling_limit_fokker_planck(1.0, s.detuning)?;
    let mut series = CsvTable::new(&["t", "kinetic", "kinetic_sem", "mean_p", "var_p", "mean_x_mod"]);
    for i in 0..stats.times.len() {
        series.push(vec![
            stats.times[i].into(),
            stats.kinetic[i].into(),
            stats.kinetic_sem[i].into(),
            stats.mean_p[i].into(),
            stats.var_p[i].into(),
            stats.mean_x_mod[i].into(),
        ]);
    }
    let mut hist = CsvTable::new(&["p_low", "p_high", "count"]);
    let h = &stats.final_p_histogram;
    for (i, c) in h.counts.iter().enumerate() {
        hist.push(vec![h.edges[i].into(), h.edges[i + 1].into(), Cell::Int(*c as i64)]);
    }
    let rel = stats.steady_kinetic / estimate - 1.0;
    let passed = rel.abs() <= s.tolerance && stats.clamped_time_fraction < 0.01;
    Ok(ExperimentOutput {
        name: "cool",
        tables: vec![("cool_series.csv".into(), series), ("cool_final_p.csv".into(), hist)],
        files: vec![],
        summary: json!({
            "steady_kinetic": stats.steady_kinetic,
            "steady_kinetic_sem": stats.steady_kinetic_sem,
            "cooling_limit": estimate,
            "fokker_planck_limit": fokker_planck,
            "relative_to_cooling_limit": rel,
            "relative_to_fokker_planck_limit": stats.steady_kinetic / fokker_planck - 1.0,
            "clamped_step_fraction": stats.clamped_step_fraction,
            "clamped_time_fraction": stats.clamped_time_fraction,
            "steady_clamped_time_fraction": stats.steady_clamped_time_fraction,
            "mean_clamped_magnitude": stats.mean_clamped_magnitude,
            "steps": stats.steps,
            "trajectories": stats.trajectories,
        }),
        passed,
    })
}

// ---------------------------------------------------------------------------
// Diffusion budget

pub fn run_budget(config: &ExperimentConfig, catalogue: &Catalogue) -> Result<ExperimentOutput> {
    let cavity = config.cavity.geometry()?;
    let n = config.pump.photon_number(&cavity)?;
    let waist = config.budget.pump_waist_um * 1e-6 * cavity.wavenumber();
    let mut table = CsvTable::new(&[
        "label",
        "orientation",
        "d_cavity",
        "d_absorption",
        "d_scattering",
        "absorption_ratio",
        "scattering_ratio",
        "reemission_ratio",
        "inflation",
        "friction_hz",
    ]);
    for sp in config.select(catalogue, &config.budget.species)? {
        let rates = DerivedRates::compute(sp, &cavity)?;
        let particle = ScaledParticle::from_rates(&rates, &cavity);
        let pumped = rates.u0.get().abs() * n.sqrt() / cavity.kappa.get();
        let friction = averaged_friction_scaling(pumped, rates.omega_r.get());
        for o in &config.budget.orientations {
            let orientation = match o {
                Orientation::Axial => PumpOrientation::Axial,
                Orientation::Perpendicular => PumpOrientation::Perpendicular { waist },
            };
            let b = diffusion_budget(&particle, n, config.pump.detuning, orientation)?;
            table.push(vec![
                sp.label.as_str().into(),
                format!("{o:?}").to_lowercase().into(),
                b.d_cavity.into(),
                b.d_absorption.into(),
                b.d_scattering.into(),
                b.absorption_ratio.into(),
                b.scattering_ratio.into(),
                b.reemission_ratio.into(),
                b.inflation.into(),
                friction.into(),
            ]);
        }
    }
    Ok(ExperimentOutput {
        name: "budget",
        tables: vec![("budget.csv".into(), table)],
        files: vec![],
        summary: json!({ "photon_number": n, "scaled_pump_waist": waist }),
        passed: true,
    })
}

// ---------------------------------------------------------------------------
// Validity

pub fn run_validate(config: &ExperimentConfig, catalogue: &Catalogue) -> Result<ExperimentOutput> {
    let cavity = config.cavity.geometry()?;
    let n = config.pump.photon_number(&cavity)?;
    let v = &config.validate;
    let kv = RadPerSec::new(v.reference_kv * cavity.kappa.get())?;
    let mut table = CsvTable::new(&[
        "label",
        "single_photon",
        "pumped",
        "ensemble",
        "shearing",
        "weak_coupling_verdict",
        "shearing_verdict",
    ]);
    let mut worst = Verdict::Pass;
    for sp in config.select(catalogue, &v.species)? {
        let rates = DerivedRates::compute(sp, &cavity)?;
        let r = validity_report(&rates, &cavity, n, v.particle_count, Some(kv));
        let coupling = r.single_photon.verdict.max(r.pumped.verdict).max(r.ensemble.verdict);
        worst = worst.max(coupling);
        if v.shearing_blocks {
            worst = worst.max(r.shearing.verdict);
        }
        table.push(vec![
            sp.label.as_str().into(),
            r.single_photon.ratio.into(),
            r.pumped.ratio.into(),
            r.ensemble.ratio.into(),
            r.shearing.ratio.into(),
            format!("{coupling:?}").to_lowercase().into(),
            format!("{:?}", r.shearing.verdict).to_lowercase().into(),
        ]);
    }
    Ok(ExperimentOutput {
        name: "validate",
        tables: vec![("validate.csv".into(), table)],
        files: vec![],
        summary: json!({ "photon_number": n, "worst": worst }),
        passed: worst != Verdict::Fail,
    })
}

/// Scattering pattern used for free-space recoil in budgets and runs.
pub fn default_pattern() -> ScatteringPattern {
    ScatteringPattern::isotropic()
}

//! Euler–Maruyama ensembles of (x, p) trajectories driven by the local drift
//! and the PSD-projected diffusion matrix.
//!
//! The step adapts to the particle velocity: `dt = min(dt_max,
//! phase_step/|p/m|)`, so a trajectory never advances more than `phase_step`
//! in kx per step while slow particles take long steps.

use crate::coefficients::{
    absorption_terms, conservative_force, fp_averaged, friction_channel, scattering_terms,
    CoefficientField, DissipativeModel, ForceParts, ScatteringPattern, DEFAULT_MEMORY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::modes::{ModeChannel, ModeGeometry};
use crate::params::ScaledParticle;
use crate::psd::{project_psd_2x2, Mat2, Projection2};
use crate::PhaseSpacePoint;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest kx advance allowed per step.
pub const MAX_PHASE_STEP: f64 = 0.5;

/// Clamped-time share above which a run logs a warning.
pub const CLAMP_WARNING: f64 = 0.01;

/// Trajectories per reduction block; fixed so results do not depend on the
/// thread count.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClampPolicy {
    /// Clamp negative eigenvalues of the full 2×2 matrix.
    #[default]
    ProjectPsd,
    /// Keep only max(D_pp, 0) and max(D_xx, 0); drops D_xp.
    ZeroNegativeDpp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub p: f64,
    /// Fixed start position; `None` draws x uniformly over one period.
    pub x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub particle: ScaledParticle,
    pub photon_number: f64,
    pub pump: ModeGeometry,
    pub channels: Vec<ModeChannel>,
    /// Include −U₀|α|²∂x|f|². Needs `particle.u0` and `photon_number` to be
    /// the physical values rather than just their product |U₀α|.
    pub conservative: bool,
    pub absorption: bool,
    pub scattering: Option<ScatteringPattern>,
    /// Particles sharing the pump; enters the weak-coupling check only.
    pub particle_count: usize,
    pub trajectories: usize,
    /// Upper bound on the step.
    pub dt: f64,
    pub phase_step: f64,
    pub t_end: f64,
    /// Number of equally spaced sample times after t = 0.
    pub samples: usize,
    /// Fraction of `t_end` after which samples count as stationary.
    pub steady_from: f64,
    pub seed: u64,
    pub clamp_policy: ClampPolicy,
    /// Relative size −λ_min/λ_max above which a projection counts as
    /// altering D.
    pub clamp_floor: f64,
    pub initial: InitialState,
    pub tolerance: f64,
}

impl SimulationConfig {
    /// One cos(kx) mode pumped at detuning `delta` with |U₀α| = `coupling`.
    pub fn single_mode(recoil: f64, delta: f64, coupling: f64) -> Result<Self> {
        let particle = ScaledParticle::from_recoil(recoil, coupling)?;
        let pump = ModeGeometry::standing_cos(1.0);
        let channel = ModeChannel::new(pump.clone(), 1.0, delta, coupling)?;
        Ok(Self {
            particle,
            photon_number: 1.0,
            pump,
            channels: vec![channel],
            conservative: false,
            absorption: false,
            scattering: None,
            particle_count: 1,
            trajectories: 1000,
            dt: 10.0,
            phase_step: 0.25,
            t_end: 1e4,
            samples: 100,
            steady_from: 0.5,
            seed: 1,
            clamp_policy: ClampPolicy::ProjectPsd,
            clamp_floor: recoil,
            initial: InitialState { p: 0.0, x: None },
            tolerance: DEFAULT_MEMORY_TOLERANCE,
        })
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.photon_number.sqrt(), 0.0)
    }

    /// Largest admissible `dt`: 1% of the fastest friction time and of the
    /// oscillation period in the optical potential.
    pub fn max_time_step(&self) -> f64 {
        let m = self.particle.mass;
        let friction: f64 = self
            .channels
            .iter()
            .map(|c| {
                let g = c.coupling * c.coupling * self.photon_number;
                let k2 = c.geometry.wavenumber().powi(2).max(1.0);
                friction_channel(g, c.kappa, c.delta, m, 4.0 * k2, 16.0 * k2 * k2).total().abs()
            })
            .sum();
        let curvature = if self.conservative {
            (4.0 * (self.particle.u0 * self.photon_number).abs() / m).sqrt()
        } else {
            0.0
        };
        let rate = friction.max(curvature);
        if rate > 0.0 {
            0.01 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.trajectories == 0 {
            return cfg("trajectories must be at least 1".into());
        }
        if !(self.particle.mass > 0.0) {
            return cfg("particle mass must be positive".into());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return cfg(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.samples == 0 {
            return cfg("need at least one sample time".into());
        }
        if !(0.0..1.0).contains(&self.steady_from) {
            return cfg("steady_from must lie in [0, 1)".into());
        }
        if !(self.photon_number >= 0.0) {
            return cfg("photon number must be non-negative".into());
        }
        let suggested = self.max_time_step();
        if !(self.dt > 0.0) || self.dt > suggested {
            return Err(Error::TimeStep {
                dt: self.dt,
                suggested,
            });
        }
        if !(self.phase_step > 0.0 && self.phase_step <= MAX_PHASE_STEP) {
            return cfg(format!(
                "phase_step must lie in (0, {MAX_PHASE_STEP}], got {}",
                self.phase_step
            ));
        }
        Ok(())
    }
}

/// Drift, diffusion and its projected square root at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSde {
    pub drift: [f64; 2],
    pub diffusion: Mat2,
    pub factor: Mat2,
    pub projection: Projection2,
    pub clamped: bool,
    pub clamped_magnitude: f64,
    pub field: CoefficientField,
}

/// Precomputed coefficient model for a configuration.
#[derive(Debug, Clone)]
pub struct SdeModel {
    config: SimulationConfig,
    dissipative: DissipativeModel,
}

impl SdeModel {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let mut dissipative = DissipativeModel::new(
            config.pump.clone(),
            config.alpha(),
            config.channels.clone(),
            config.particle.mass,
            [0.0, 0.0],
        )?;
        dissipative.tolerance = config.tolerance;
        Ok(Self {
            config: config.clone(),
            dissipative,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn coefficients(&self, x: f64, p: f64) -> Result<CoefficientField> {
        let c = &self.config;
        let n = c.photon_number;
        let point = [x, 0.0, 0.0];
        let diss = self.dissipative.terms(PhaseSpacePoint::new(x, p))?;
        let mut forces = ForceParts {
            dissipative_first: diss.first_order,
            dissipative_second: diss.second_order,
            ..Default::default()
        };
        let mut d_pp = diss.d_pp;
        if c.conservative {
            forces.coherent = conservative_force(&c.pump, c.particle.u0, n, x);
        }
        if c.absorption {
            let (f, d) = absorption_terms(&c.pump, point, c.particle.gamma_abs + c.particle.gamma_sca, n);
            forces.absorption = f;
            d_pp += d;
        }
        if let Some(pattern) = &c.scattering {
            let (f, d) = scattering_terms(&c.pump, point, c.particle.gamma_sca, n, 1.0, pattern);
            forces.scattering = f;
            d_pp += d;
        }
        let field = CoefficientField {
            g_x: p / c.particle.mass,
            g_p: forces,
            d_pp,
            d_xp: diss.d_xp,
            d_xx: 0.0,
        };
        if !field.is_finite() {
            return Err(Error::NonFinite {
                what: "drift/diffusion",
                x,
                p,
            });
        }
        Ok(field)
    }

    pub fn assemble(&self, x: f64, p: f64) -> Result<LocalSde> {
        let field = self.coefficients(x, p)?;
        let diffusion = [[field.d_xx, field.d_xp], [field.d_xp, field.d_pp]];
        let projection = project_psd_2x2(diffusion);
        let (factor, clamped, clamped_magnitude) = match self.config.clamp_policy {
            ClampPolicy::ProjectPsd => (
                projection.factor,
                projection.is_clamped(self.config.clamp_floor),
                projection.clamped_magnitude(),
            ),
            ClampPolicy::ZeroNegativeDpp => (
                [[field.d_xx.max(0.0).sqrt(), 0.0], [0.0, field.d_pp.max(0.0).sqrt()]],
                field.d_pp < 0.0,
                (-field.d_pp).max(0.0),
            ),
        };
        if clamped {
            log::trace!("PSD clamp at x = {x}, p = {p}: removed {clamped_magnitude:e}");
        }
        Ok(LocalSde {
            drift: [field.g_x, field.g_p.total()],
            diffusion,
            factor,
            projection,
            clamped,
            clamped_magnitude,
            field,
        })
    }
}

pub fn assemble_local_sde(x: f64, p: f64, config: &SimulationConfig) -> Result<LocalSde> {
    SdeModel::new(config)?.assemble(x, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// ⟨p²/2m⟩ in units of ħκ.
    pub kinetic: Vec<f64>,
    pub kinetic_sem: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub var_p: Vec<f64>,
    /// ⟨x mod π⟩, the period of the cos² light pattern.
    pub mean_x_mod: Vec<f64>,
    /// Ensemble mean of each trajectory's time-averaged kinetic energy over
    /// samples with t ≥ steady_from·t_end.
    pub steady_kinetic: f64,
    pub steady_kinetic_sem: f64,
    /// Fraction of steps whose diffusion matrix was altered by the clamp.
    pub clamped_step_fraction: f64,
    /// Fraction of simulated time spent in clamped steps.
    pub clamped_time_fraction: f64,
    /// Mean removed eigenvalue magnitude over clamped steps.
    pub mean_clamped_magnitude: f64,
    /// The two clamp fractions restricted to t ≥ steady_from·t_end.
    pub steady_clamped_step_fraction: f64,
    pub steady_clamped_time_fraction: f64,
    pub final_p_histogram: Histogram,
    pub steps: u64,
    pub trajectories: usize,
}

#[derive(Debug, Clone)]
struct Accumulator {
    ke: Vec<f64>,
    ke2: Vec<f64>,
    p: Vec<f64>,
    p2: Vec<f64>,
    xmod: Vec<f64>,
    steady: f64,
    steady2: f64,
    steps: u64,
    clamped_steps: u64,
    clamped_time: f64,
    total_time: f64,
    clamped_sum: f64,
    /// [steps, clamped steps, time, clamped time] in the steady window.
    steady_clamp: [f64; 4],
    finals: Vec<f64>,
}

impl Accumulator {
    fn new(samples: usize) -> Self {
        Self {
            ke: vec![0.0; samples],
            ke2: vec![0.0; samples],
            p: vec![0.0; samples],
            p2: vec![0.0; samples],
            xmod: vec![0.0; samples],
            steady: 0.0,
            steady2: 0.0,
            steps: 0,
            clamped_steps: 0,
            clamped_time: 0.0,
            total_time: 0.0,
            clamped_sum: 0.0,
            steady_clamp: [0.0; 4],
            finals: Vec::new(),
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        for (a, b) in [
            (&mut self.ke, &o.ke),
            (&mut self.ke2, &o.ke2),
            (&mut self.p, &o.p),
            (&mut self.p2, &o.p2),
            (&mut self.xmod, &o.xmod),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.steady += o.steady;
        self.steady2 += o.steady2;
        self.steps += o.steps;
        self.clamped_steps += o.clamped_steps;
        self.clamped_time += o.clamped_time;
        self.total_time += o.total_time;
        self.clamped_sum += o.clamped_sum;
        for (a, b) in self.steady_clamp.iter_mut().zip(&o.steady_clamp) {
            *a += b;
        }
        self.finals.extend_from_slice(&o.finals);
    }
}

fn sample_times(config: &SimulationConfig) -> Vec<f64> {
    (1..=config.samples)
        .map(|i| config.t_end * i as f64 / config.samples as f64)
        .collect()
}

fn run_trajectory(
    model: &SdeModel,
    index: u64,
    times: &[f64],
    steady_start: usize,
    steady_time: f64,
    acc: &mut Accumulator,
) -> Result<()> {
    let c = model.config();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    rng.set_stream(index);
    let mut x = match c.initial.x {
        Some(x) => x,
        None => rng.gen::<f64>() * std::f64::consts::PI,
    };
    let mut p = c.initial.p;
    let mut t = 0.0;
    let mut steady_sum = 0.0;
    let mass = c.particle.mass;
    for (si, &ts) in times.iter().enumerate() {
        while t < ts {
            let u = (p / mass).abs();
            let mut dt = c.dt;
            if u * dt > c.phase_step {
                dt = c.phase_step / u;
            }
            let last = ts - t <= dt;
            if last {
                dt = ts - t;
            }
            let sde = model.assemble(x, p)?;
            let w0: f64 = rng.sample(StandardNormal);
            let w1: f64 = rng.sample(StandardNormal);
            let sq = dt.sqrt();
            let b = sde.factor;
            x += sde.drift[0] * dt + sq * (b[0][0] * w0 + b[0][1] * w1);
            p += sde.drift[1] * dt + sq * (b[1][0] * w0 + b[1][1] * w1);
            acc.steps += 1;
            acc.total_time += dt;
            if sde.clamped {
                acc.clamped_steps += 1;
                acc.clamped_time += dt;
                acc.clamped_sum += sde.clamped_magnitude;
            }
            if t >= steady_time {
                let c = if sde.clamped { 1.0 } else { 0.0 };
                acc.steady_clamp[0] += 1.0;
                acc.steady_clamp[1] += c;
                acc.steady_clamp[2] += dt;
                acc.steady_clamp[3] += c * dt;
            }
            t = if last { ts } else { t + dt };
        }
        if !(x.is_finite() && p.is_finite()) {
            return Err(Error::NonFinite {
                what: "trajectory state",
                x,
                p,
            });
        }
        let ke = p * p / (2.0 * mass);
        acc.ke[si] += ke;
        acc.ke2[si] += ke * ke;
        acc.p[si] += p;
        acc.p2[si] += p * p;
        acc.xmod[si] += x.rem_euclid(std::f64::consts::PI);
        if si >= steady_start {
            steady_sum += ke;
        }
    }
    let steady = steady_sum / (times.len() - steady_start) as f64;
    acc.steady += steady;
    acc.steady2 += steady * steady;
    acc.finals.push(p);
    Ok(())
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

fn histogram(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

/// Runs the ensemble on the current rayon pool. Trajectory `i` uses ChaCha8
/// stream `i` of the seed, and partial sums are combined in block order, so
/// the output is identical for any thread count.
pub fn run_ensemble(config: &SimulationConfig) -> Result<EnsembleStats> {
    config.validate()?;
    let model = SdeModel::new(config)?;
    let times = sample_times(config);
    let steady_start = times
        .iter()
        .position(|&t| t >= config.steady_from * config.t_end)
        .unwrap_or(times.len() - 1);
    let steady_time = config.steady_from * config.t_end;
    let n = config.trajectories;
    let blocks: Vec<usize> = (0..n.div_ceil(BLOCK)).collect();
    let partials: Vec<Result<Accumulator>> = blocks
        .par_iter()
        .map(|&b| {
            let mut acc = Accumulator::new(times.len());
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                run_trajectory(&model, i as u64, &times, steady_start, steady_time, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(times.len());
    for part in partials {
        total.merge(&part?);
    }
    let nf = n as f64;
    let sem = |sum: f64, sum2: f64| {
        if n > 1 {
            ((sum2 / nf - (sum / nf).powi(2)).max(0.0) / (nf - 1.0)).sqrt()
        } else {
            0.0
        }
    };
    let clamped_time_fraction = if total.total_time > 0.0 {
        total.clamped_time / total.total_time
    } else {
        0.0
    };
    if clamped_time_fraction > CLAMP_WARNING {
        log::warn!(
            "diffusion matrix was projected during {:.2}% of the run; the Fokker-Planck reading is unreliable there",
            100.0 * clamped_time_fraction
        );
    }
    Ok(EnsembleStats {
        kinetic: total.ke.iter().map(|v| v / nf).collect(),
        kinetic_sem: total.ke.iter().zip(&total.ke2).map(|(a, b)| sem(*a, *b)).collect(),
        mean_p: total.p.iter().map(|v| v / nf).collect(),
        var_p: total
            .p
            .iter()
            .zip(&total.p2)
            .map(|(a, b)| (b / nf - (a / nf).powi(2)).max(0.0))
            .collect(),
        mean_x_mod: total.xmod.iter().map(|v| v / nf).collect(),
        steady_kinetic: total.steady / nf,
        steady_kinetic_sem: sem(total.steady, total.steady2),
        clamped_step_fraction: total.clamped_steps as f64 / total.steps.max(1) as f64,
        clamped_time_fraction,
        mean_clamped_magnitude: if total.clamped_steps > 0 {
            total.clamped_sum / total.clamped_steps as f64
        } else {
            0.0
        },
        steady_clamped_step_fraction: ratio(total.steady_clamp[1], total.steady_clamp[0]),
        steady_clamped_time_fraction: ratio(total.steady_clamp[3], total.steady_clamp[2]),
        final_p_histogram: histogram(&total.finals, 50),
        steps: total.steps,
        trajectories: n,
        times,
    })
}

/// Runs [`run_ensemble`] on a dedicated pool of `threads` workers.
pub fn run_ensemble_with_threads(config: &SimulationConfig, threads: usize) -> Result<EnsembleStats> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_ensemble(config))
}

// ---------------------------------------------------------------------------
// Capture range

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureScan {
    pub mass: f64,
    /// |U₀α|² in units of κ².
    pub coupling_sq: f64,
    /// Random positions per grid point for the sampled force; 0 skips it.
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureRow {
    pub delta: f64,
    pub kv: f64,
    /// Position-averaged closed form.
    pub force: f64,
    /// Mean of the full position-dependent dissipative force over random x.
    pub sampled: Option<f64>,
    pub sampled_sem: Option<f64>,
}

/// Mean dissipative force on a cos mode over a (Δ, kv) grid.
pub fn velocity_capture_scan(scan: &CaptureScan, kv_grid: &[f64], delta_grid: &[f64]) -> Result<Vec<CaptureRow>> {
    let mut rows = Vec::with_capacity(kv_grid.len() * delta_grid.len());
    for (di, &delta) in delta_grid.iter().enumerate() {
        let channel = ModeChannel::new(ModeGeometry::standing_cos(1.0), 1.0, delta, scan.coupling_sq.sqrt())?;
        let model = DissipativeModel::single(channel, Complex64::new(1.0, 0.0), scan.mass)?;
        for (vi, &kv) in kv_grid.iter().enumerate() {
            let force = fp_averaged(kv, 1.0, delta, scan.coupling_sq).force;
            let (sampled, sampled_sem) = if scan.samples > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(scan.seed);
                rng.set_stream((di * kv_grid.len() + vi) as u64);
                let p = kv * scan.mass;
                let mut s = 0.0;
                let mut s2 = 0.0;
                for _ in 0..scan.samples {
                    let x = rng.gen::<f64>() * std::f64::consts::PI;
                    let f = model.terms(PhaseSpacePoint::new(x, p))?.force();
                    s += f;
                    s2 += f * f;
                }
                let n = scan.samples as f64;
                let mean = s / n;
                let var = (s2 / n - mean * mean).max(0.0);
                (Some(mean), Some((var / n).sqrt()))
            } else {
                (None, None)
            };
            rows.push(CaptureRow {
                delta,
                kv,
                force,
                sampled,
                sampled_sem,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::fp_local_diffusion;
    use crate::modes::Axis;
    use approx::assert_relative_eq;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    fn base() -> SimulationConfig {
        SimulationConfig::single_mode(1e-3, 1.0 / SQRT3, 0.1).unwrap()
    }

    #[test]
    fn no_clamp_at_rest() {
        let model = SdeModel::new(&base()).unwrap();
        for i in 0..200 {
            let x = std::f64::consts::PI * i as f64 / 200.0;
            let s = model.assemble(x, 0.0).unwrap();
            assert!(!s.clamped, "x = {x}");
            assert!(s.field.d_pp >= 0.0);
        }
    }

    #[test]
    fn fast_particle_gets_clamped_where_diffusion_is_negative() {
        let cfg = base();
        let m = cfg.particle.mass;
        let kv = 5.0;
        let x = (0..1000)
            .map(|i| std::f64::consts::PI * i as f64 / 1000.0)
            .min_by(|a, b| {
                fp_local_diffusion(*a, kv, 1.0, 1.0 / SQRT3, 0.01)
                    .total_cmp(&fp_local_diffusion(*b, kv, 1.0, 1.0 / SQRT3, 0.01))
            })
            .unwrap();
        assert!(fp_local_diffusion(x, kv, 1.0, 1.0 / SQRT3, 0.01) < 0.0);
        let s = assemble_local_sde(x, kv * m, &cfg).unwrap();
        assert!(s.clamped);
        assert!(s.clamped_magnitude > 0.0);
        let p = s.projection.projected;
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        assert!(p[1][1] >= 0.0 && det >= -1e-18);
    }

    #[test]
    fn zero_negative_policy_keeps_only_diagonal() {
        let mut cfg = base();
        cfg.clamp_policy = ClampPolicy::ZeroNegativeDpp;
        let s = assemble_local_sde(0.3, 2500.0, &cfg).unwrap();
        assert_eq!(s.factor[0][1], 0.0);
        assert_eq!(s.factor[1][0], 0.0);
        assert_eq!(s.factor[1][1], s.field.d_pp.max(0.0).sqrt());
    }

    #[test]
    fn refuses_large_step_with_suggestion() {
        let mut cfg = base();
        cfg.dt = 1e6;
        match cfg.validate() {
            Err(Error::TimeStep { suggested, .. }) => {
                assert!(suggested > 0.0 && suggested < 1e6);
                cfg.dt = suggested;
                cfg.validate().unwrap();
            }
            other => panic!("expected a time-step error, got {other:?}"),
        }
    }

    #[test]
    fn free_particle_is_ballistic() {
        let mut cfg = base();
        cfg.channels[0].coupling = 0.0;
        cfg.initial = InitialState { p: 37.0, x: Some(0.1) };
        cfg.trajectories = 10;
        cfg.t_end = 100.0;
        cfg.samples = 5;
        let s = run_ensemble(&cfg).unwrap();
        for (ke, p) in s.kinetic.iter().zip(&s.mean_p) {
            assert_eq!(*p, 37.0);
            assert_relative_eq!(*ke, 37.0 * 37.0 / (2.0 * cfg.particle.mass), max_relative = 1e-15);
        }
        assert_eq!(s.clamped_step_fraction, 0.0);
    }

    #[test]
    fn absorption_moments_grow_linearly() {
        let gamma = 1e-3;
        let n = 10.0;
        let cfg = SimulationConfig {
            particle: ScaledParticle {
                mass: 100.0,
                u0: 0.0,
                gamma_abs: gamma,
                gamma_sca: 0.0,
            },
            photon_number: n,
            pump: ModeGeometry::GaussianRunning {
                axis: Axis::X,
                k: 1.0,
                waist: None,
            },
            channels: vec![],
            absorption: true,
            trajectories: 4000,
            t_end: 200.0,
            samples: 4,
            initial: InitialState { p: 0.0, x: Some(0.0) },
            ..base()
        };
        let s = run_ensemble(&cfg).unwrap();
        let t = cfg.t_end;
        let force = 2.0 * gamma * n;
        let diff = gamma * n;
        let expect_p = force * t;
        let expect_var = diff * t;
        let se = (expect_var / cfg.trajectories as f64).sqrt();
        assert!((s.mean_p[3] - expect_p).abs() < 4.0 * se, "{} vs {expect_p}", s.mean_p[3]);
        assert!((s.var_p[3] / expect_var - 1.0).abs() < 0.1, "{} vs {expect_var}", s.var_p[3]);
    }

    #[test]
    fn seeded_runs_are_identical_across_thread_counts() {
        let mut cfg = base();
        cfg.trajectories = 150;
        cfg.t_end = 2000.0;
        cfg.samples = 10;
        cfg.initial = InitialState { p: 100.0, x: None };
        let a = run_ensemble_with_threads(&cfg, 1).unwrap();
        let b = run_ensemble_with_threads(&cfg, 3).unwrap();
        assert_eq!(a, b);
        cfg.seed = 2;
        let c = run_ensemble_with_threads(&cfg, 1).unwrap();
        assert_ne!(a.kinetic, c.kinetic);
    }

    #[test]
    fn capture_scan_shape() {
        let scan = CaptureScan {
            mass: 500.0,
            coupling_sq: 0.01,
            samples: 0,
            seed: 0,
        };
        let kv: Vec<f64> = (-100..=100).map(|i| 0.05 * i as f64).collect();
        let deltas = [1.0 / SQRT3, 2.0, 5.0];
        let rows = velocity_capture_scan(&scan, &kv, &deltas).unwrap();
        let curve = |d: usize| &rows[d * kv.len()..(d + 1) * kv.len()];
        for d in 0..3 {
            let c = curve(d);
            for i in 0..kv.len() {
                assert_eq!(c[i].force, -c[kv.len() - 1 - i].force);
            }
        }
        let mid = 100;
        let slopes: Vec<f64> = (0..3)
            .map(|d| (curve(d)[mid + 1].force - curve(d)[mid - 1].force) / 0.1)
            .collect();
        assert!(slopes[0] < slopes[1] && slopes[0] < slopes[2]);
        let argmin = |d: usize| {
            curve(d)
                .iter()
                .filter(|r| r.kv > 0.0)
                .min_by(|a, b| a.force.total_cmp(&b.force))
                .unwrap()
                .kv
        };
        assert!(argmin(2) > argmin(0));
    }

    #[test]
    fn sampled_force_matches_closed_form() {
        let scan = CaptureScan {
            mass: 500.0,
            coupling_sq: 0.01,
            samples: 4000,
            seed: 7,
        };
        let rows = velocity_capture_scan(&scan, &[0.2, 1.0, 3.0], &[1.0 / SQRT3, 2.0]).unwrap();
        for r in rows {
            let (m, se) = (r.sampled.unwrap(), r.sampled_sem.unwrap());
            assert!((m - r.force).abs() < 4.0 * se + 1e-6 * r.force.abs(), "{r:?}");
        }
    }
}

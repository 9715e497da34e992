//! Multimode friction of a confocal resonator whose degenerate
//! Laguerre-Gaussian modes scatter photons from a Gaussian pump running
//! along y.
//!
//! With the pump's x-derivative dropped and the pump envelope constant over
//! the few wavelengths of interest along x, the low-velocity friction
//! separates into Σ_m W_m β_m(x): W_m is the (y, z) box average of
//! |f₀|²|u_m|² and β_m the one-dimensional friction of the standing wave.
//! Transverse lengths are in units of the fundamental waist w₀.

use crate::coefficients::{friction_channel, FrictionTerms};
use crate::error::{domain, Result};
use crate::modes::{confocal_degenerate_set, lg_transverse, ConfocalSetup, ModeRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfocalStudy {
    pub setup: ConfocalSetup,
    /// Common detuning of all degenerate modes, units of κ.
    pub delta: f64,
    /// |U α|/κ, shared by all modes.
    pub coupling: f64,
    /// ω_r/κ.
    pub recoil: f64,
    /// Half width of the transverse averaging box, units of w₀.
    pub box_half_width: f64,
    /// Pump waist along z, units of w₀.
    pub pump_waist: f64,
    pub min_grid: usize,
    pub max_grid: usize,
    /// Largest relative change of any W_m under grid doubling.
    pub grid_tolerance: f64,
}

impl ConfocalStudy {
    /// d = 10 mm, n₀ = 2·10⁴, transverse orders up to 54, Δ = κ/√3,
    /// |Uα| = 0.1κ, ω_r = 10⁻³κ, average over ±4w₀.
    pub fn reference_defaults() -> Result<Self> {
        Ok(Self {
            setup: ConfocalSetup::with_order_cap(0.01, 20_000, 54)?,
            delta: 1.0 / 3f64.sqrt(),
            coupling: 0.1,
            recoil: 1e-3,
            box_half_width: 4.0,
            pump_waist: 1.0,
            min_grid: 64,
            max_grid: 2048,
            grid_tolerance: 1e-3,
        })
    }

    pub fn mass(&self) -> f64 {
        1.0 / (2.0 * self.recoil)
    }
}

/// Box-averaged transverse overlaps of the degenerate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub modes: Vec<ModeRecord>,
    pub weights: Vec<f64>,
    /// Trapezoid intervals per axis of the accepted grid.
    pub grid: usize,
    /// Largest relative change between the last two grids.
    pub max_relative_change: f64,
    pub converged: bool,
}

impl OverlapTable {
    /// Number of leading modes with transverse order 2m+ℓ ≤ `cap`.
    pub fn count_up_to(&self, cap: u32) -> usize {
        self.modes.iter().take_while(|r| 2 * r.m + r.l <= cap).count()
    }
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

/// Box average of |f₀|²|u|² on an (n+1)² trapezoid grid.
fn box_average(record: &ModeRecord, half: f64, pump_waist: f64, n: usize) -> f64 {
    let h = 2.0 * half / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let z = -half + h * i as f64;
        let pump = (-2.0 * z * z / (pump_waist * pump_waist)).exp();
        let mut row = 0.0;
        for j in 0..=n {
            let y = -half + h * j as f64;
            let (u, _) = lg_transverse(record.m, record.l, 1.0, y, z);
            row += trapezoid_weight(j, n) * u.norm_sqr();
        }
        total += trapezoid_weight(i, n) * pump * row;
    }
    total * h * h / (4.0 * half * half)
}

/// W_m for every mode, doubling the grid from `min_grid` until all weights
/// change by less than `grid_tolerance` relative to the largest weight.
pub fn transverse_overlaps(study: &ConfocalStudy) -> Result<OverlapTable> {
    if !(study.box_half_width > 0.0) || !(study.pump_waist > 0.0) || study.min_grid < 2 {
        return domain("averaging box, pump waist and grid must be positive");
    }
    let modes = confocal_degenerate_set(&study.setup)?;
    let eval = |n: usize| -> Vec<f64> {
        modes
            .par_iter()
            .map(|r| box_average(r, study.box_half_width, study.pump_waist, n))
            .collect()
    };
    let mut grid = study.min_grid;
    let mut weights = eval(grid);
    loop {
        let finer = eval(2 * grid);
        let scale = finer.iter().copied().fold(0.0, f64::max);
        let change = weights
            .iter()
            .zip(&finer)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        grid *= 2;
        weights = finer;
        let converged = change <= study.grid_tolerance;
        if converged || 2 * grid > study.max_grid {
            if !converged {
                log::warn!("transverse grid not converged: relative change {change:e} at {grid} intervals");
            }
            return Ok(OverlapTable {
                modes,
                weights,
                grid,
                max_relative_change: change,
                converged,
            });
        }
    }
}

/// Low-velocity friction at kx = `x` from the first `count` modes.
pub fn friction_at(table: &OverlapTable, study: &ConfocalStudy, count: usize, x: f64) -> FrictionTerms {
    let g = study.coupling * study.coupling;
    let mass = study.mass();
    let mut out = FrictionTerms::default();
    for (r, w) in table.modes.iter().zip(&table.weights).take(count) {
        let (_, d, dd) = r.parity.wave(1.0, x);
        let t = friction_channel(g, 1.0, study.delta, mass, w * d * d, w * dd * dd);
        out.first_order += t.first_order;
        out.second_order += t.second_order;
    }
    out
}

pub fn friction_profile(table: &OverlapTable, study: &ConfocalStudy, count: usize, xs: &[f64]) -> Vec<FrictionTerms> {
    xs.iter().map(|&x| friction_at(table, study, count, x)).collect()
}

/// Mean total friction over one period π of kx.
pub fn mean_friction(table: &OverlapTable, study: &ConfocalStudy, count: usize) -> f64 {
    // sin² and cos² are trigonometric polynomials of degree 2, so an equally
    // spaced rule with more than 4 points is exact.
    let n = 16;
    (0..n)
        .map(|i| friction_at(table, study, count, std::f64::consts::PI * i as f64 / n as f64).total())
        .sum::<f64>()
        / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    /// Largest transverse order 2m+ℓ included.
    pub order_cap: u32,
    pub modes: usize,
    pub mean_friction: f64,
    /// Relative to the fundamental mode alone.
    pub relative: f64,
}

/// Position-averaged friction for every even order cap up to the setup's.
pub fn saturation_sweep(table: &OverlapTable, study: &ConfocalStudy) -> Vec<SaturationPoint> {
    let top = table.modes.iter().map(|r| 2 * r.m + r.l).max().unwrap_or(0);
    let base = mean_friction(table, study, 1);
    (0..=top)
        .step_by(2)
        .map(|cap| {
            let modes = table.count_up_to(cap);
            let mean = mean_friction(table, study, modes);
            SaturationPoint {
                order_cap: cap,
                modes,
                mean_friction: mean,
                relative: mean / base,
            }
        })
        .collect()
}

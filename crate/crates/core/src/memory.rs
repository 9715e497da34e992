//! Cavity memory integrals along the free past trajectory,
//!
//! G(x, p) = ∫₀^∞ e^{−ντ} F(x − pτ/m) dτ,  F = f_m*·f_n,  ν = κ_m + iΔ_m,
//!
//! with their x- and p-derivatives, in scaled units.

use crate::error::{domain, Error, Result};
use crate::modes::{ModeChannel, ModeGeometry, ModeSample};
use crate::quadrature;
use crate::PhaseSpacePoint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Integration horizon in units of the channel decay time.
pub const TRUNCATION_DECAY_TIMES: f64 = 40.0;
/// Bisection budget per query on top of the initial panels.
pub const MAX_EXTRA_PANELS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryResult {
    pub g: Complex64,
    pub dg_dx: Complex64,
    pub dg_dp: Complex64,
    /// Absolute error bound: quadrature estimate plus truncation remainder.
    pub quadrature_error: f64,
    /// Upper integration limit; infinite for closed forms.
    pub truncation_tau: f64,
    /// False when the requested tolerance was not reached.
    pub converged: bool,
}

impl MemoryResult {
    fn exact(g: Complex64, dg_dx: Complex64, dg_dp: Complex64) -> Self {
        Self {
            g,
            dg_dx,
            dg_dp,
            quadrature_error: 0.0,
            truncation_tau: f64::INFINITY,
            converged: true,
        }
    }
}

/// Inputs of a single memory integral: channel `mode` (supplying f_m and ν)
/// against the `source` mode f_n, at transverse position `transverse` = (y, z).
#[derive(Debug, Clone, Copy)]
pub struct MemoryQuery<'a> {
    pub mode: &'a ModeGeometry,
    pub nu: Complex64,
    pub source: &'a ModeGeometry,
    pub transverse: [f64; 2],
    pub point: PhaseSpacePoint,
    pub mass: f64,
}

impl<'a> MemoryQuery<'a> {
    pub fn new(
        channel: &'a ModeChannel,
        source: &'a ModeGeometry,
        point: PhaseSpacePoint,
        mass: f64,
    ) -> Self {
        Self {
            mode: &channel.geometry,
            nu: channel.nu(),
            source,
            transverse: [0.0, 0.0],
            point,
            mass,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.nu.re > 0.0) {
            return domain(format!("memory integral needs kappa > 0, got {}", self.nu.re));
        }
        if !(self.mass > 0.0) {
            return domain("memory integral needs a positive mass");
        }
        let PhaseSpacePoint { x, p } = self.point;
        if !(x.is_finite() && p.is_finite() && self.nu.im.is_finite()) {
            return Err(Error::NonFinite {
                what: "memory query",
                x,
                p,
            });
        }
        Ok(())
    }

    /// F = f_m*·f_n and its x-derivatives at position `s` along the axis.
    pub fn product(&self, s: f64) -> ModeSample {
        let [y, z] = self.transverse;
        let fm = self.mode.evaluate([s, y, z]);
        let fn_ = self.source.evaluate([s, y, z]);
        fm.conj_product(&fn_)
    }
}

/// Adaptive-quadrature evaluation of G and its derivatives.
///
/// Derivatives are integrated under the integral sign: ∂x brings F′, ∂p
/// brings F′·(−τ/m).
pub fn memory_integral(query: &MemoryQuery<'_>, tolerance: f64) -> Result<MemoryResult> {
    query.validate()?;
    if !(tolerance > 0.0) {
        return domain("tolerance must be positive");
    }
    let kappa = query.nu.re;
    let nu = query.nu;
    let PhaseSpacePoint { x, p } = query.point;
    let m = query.mass;
    let u = p / m;
    let tau_max = TRUNCATION_DECAY_TIMES / kappa;
    let k_max = query
        .mode
        .wavenumber()
        .abs()
        .max(query.source.wavenumber().abs())
        .max(1e-300);

    let mut width = 1.0 / kappa;
    if u != 0.0 {
        width = width.min(PI / (2.0 * k_max * u.abs()));
    }
    width /= 4.0;
    let n = (tau_max / width).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|i| tau_max * i as f64 / n as f64).collect();

    let integrand = |tau: f64| {
        let f = query.product(x - u * tau);
        let w = (-nu * tau).exp();
        let wd = w * f.dx;
        [w * f.value, wd, wd * (-tau / m)]
    };
    let q = quadrature::integrate(&integrand, &breaks, tolerance, n + MAX_EXTRA_PANELS);

    // |F| ≤ 1 and |F′| ≤ 2k for unit-peak modes.
    let tail = (-kappa * tau_max).exp() / kappa;
    let slope = 2.0 * k_max;
    let remainder = tail * (1.0 + slope + slope * (tau_max + 1.0 / kappa) / m);
    let error = q.error + remainder;
    Ok(MemoryResult {
        g: q.value[0],
        dg_dx: q.value[1],
        dg_dp: q.value[2],
        quadrature_error: error,
        truncation_tau: tau_max,
        converged: error <= tolerance,
    })
}

/// Exact G for the standing wave cos x, |f|² = ½ + ¼(e^{2ix} + e^{−2ix}).
pub fn memory_integral_fp_closed(
    x: f64,
    p: f64,
    mass: f64,
    kappa: f64,
    delta: f64,
) -> Result<MemoryResult> {
    if !(kappa > 0.0) {
        return domain(format!("kappa must be positive, got {kappa}"));
    }
    if !(mass > 0.0) {
        return domain("mass must be positive");
    }
    let nu = Complex64::new(kappa, delta);
    let u = p / mass;
    let e = Complex64::from_polar(1.0, 2.0 * x);
    let plus = 1.0 / (nu + 2.0 * I * u);
    let minus = 1.0 / (nu - 2.0 * I * u);
    let (a, b) = (e * plus, e.conj() * minus);
    Ok(MemoryResult::exact(
        0.5 / nu + 0.25 * (a + b),
        0.5 * I * (a - b),
        (0.5 * I / mass) * (b * minus - a * plus),
    ))
}

/// F(x) = Σ c_j e^{i q_j x}, for which G has the closed form
/// Σ c_j e^{i q_j x}/(ν + i q_j p/m).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    terms: Vec<(Complex64, f64)>,
}

impl ExpSum {
    pub fn new(mut terms: Vec<(Complex64, f64)>) -> Self {
        terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut merged: Vec<(Complex64, f64)> = Vec::with_capacity(terms.len());
        for (c, q) in terms {
            match merged.last_mut() {
                Some(last) if (last.1 - q).abs() <= 1e-12 * q.abs().max(1.0) => last.0 += c,
                _ => merged.push((c, q)),
            }
        }
        merged.retain(|(c, _)| *c != Complex64::new(0.0, 0.0));
        Self { terms: merged }
    }

    /// conj(f_m)·f_n as an exponential sum, if both modes have that form
    /// along x at transverse position (y, z).
    pub fn from_pair(mode: &ModeGeometry, source: &ModeGeometry, y: f64, z: f64) -> Option<Self> {
        let a = mode.x_fourier(y, z)?;
        let b = source.x_fourier(y, z)?;
        let mut terms = Vec::with_capacity(a.len() * b.len());
        for (ca, qa) in &a {
            for (cb, qb) in &b {
                terms.push((ca.conj() * cb, qb - qa));
            }
        }
        Some(Self::new(terms))
    }

    pub fn terms(&self) -> &[(Complex64, f64)] {
        &self.terms
    }

    /// e^{i q_j x} for every term. Terms are sorted by q, so a wavenumber
    /// and its negative mirror each other and share one sincos.
    fn phasors(&self, x: f64) -> impl Iterator<Item = Complex64> + '_ {
        let terms = &self.terms;
        let n = terms.len();
        let mut cache = [Complex64::new(1.0, 0.0); 8];
        (0..n).map(move |j| {
            let q = terms[j].1;
            let m = n - 1 - j;
            let e = if q == 0.0 {
                Complex64::new(1.0, 0.0)
            } else if n <= cache.len() && m < j && terms[m].1 == -q {
                cache[n - 1 - j].conj()
            } else {
                Complex64::from_polar(1.0, q * x)
            };
            if j < cache.len() {
                cache[j] = e;
            }
            e
        })
    }

    /// F, F′, F″ at x.
    pub fn sample(&self, x: f64) -> ModeSample {
        let mut s = ModeSample {
            value: Complex64::default(),
            dx: Complex64::default(),
            dxx: Complex64::default(),
        };
        for (&(c, q), e) in self.terms.iter().zip(self.phasors(x)) {
            let t = c * e;
            s.value += t;
            s.dx += I * q * t;
            s.dxx -= q * q * t;
        }
        s
    }

    pub fn memory(&self, nu: Complex64, x: f64, p: f64, mass: f64) -> MemoryResult {
        let u = p / mass;
        let mut r = MemoryResult::exact(Complex64::default(), Complex64::default(), Complex64::default());
        for (&(c, q), e) in self.terms.iter().zip(self.phasors(x)) {
            let inv = 1.0 / (nu + I * q * u);
            let t = c * e * inv;
            r.g += t;
            r.dg_dx += I * q * t;
            r.dg_dp += t * inv * (-I * q / mass);
        }
        r
    }
}

/// Memory integral of the pair (mode, source) for each particle, using the
/// closed form where the modes allow it.
pub fn per_particle_memory(
    mode: &ModeChannel,
    source: &ModeGeometry,
    particles: &[PhaseSpacePoint],
    mass: f64,
    tolerance: f64,
) -> Result<Vec<MemoryResult>> {
    if let Some(sum) = ExpSum::from_pair(&mode.geometry, source, 0.0, 0.0) {
        if !(mode.kappa > 0.0) {
            return domain("memory integral needs kappa > 0");
        }
        return Ok(particles
            .iter()
            .map(|pt| sum.memory(mode.nu(), pt.x, pt.p, mass))
            .collect());
    }
    particles
        .iter()
        .map(|&pt| memory_integral(&MemoryQuery::new(mode, source, pt, mass), tolerance))
        .collect()
}

/// Integrand e^{−ντ}F(x − pτ/m) on a uniform τ grid, for inspection.
pub fn integrand_samples(query: &MemoryQuery<'_>, count: usize) -> Vec<(f64, Complex64)> {
    let tau_max = TRUNCATION_DECAY_TIMES / query.nu.re;
    let u = query.point.p / query.mass;
    (0..count)
        .map(|i| {
            let tau = tau_max * i as f64 / count.saturating_sub(1).max(1) as f64;
            let f = query.product(query.point.x - u * tau).value;
            (tau, (-query.nu * tau).exp() * f)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Parity;

    fn cos_channel(delta: f64) -> ModeChannel {
        ModeChannel::new(ModeGeometry::standing_cos(1.0), 1.0, delta, -1.0).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn static_particle_sees_local_field() {
        let ch = ModeChannel::new(
            ModeGeometry::PlaneStanding {
                axis: crate::modes::Axis::X,
                parity: Parity::Sin,
                k: 1.0,
            },
            1.0,
            0.4,
            -1.0,
        )
        .unwrap();
        let src = ModeGeometry::standing_cos(1.0);
        let x = 0.37;
        let q = MemoryQuery::new(&ch, &src, PhaseSpacePoint::new(x, 0.0), 10.0);
        let r = memory_integral(&q, 1e-13).unwrap();
        let expect = Complex64::new(x.sin() * x.cos(), 0.0) / ch.nu();
        assert!(rel(r.g, expect) < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn uniform_mode_gives_inverse_kappa() {
        let ch = ModeChannel::new(ModeGeometry::Uniform, 2.0, 0.0, -1.0).unwrap();
        let q = MemoryQuery::new(&ch, &ModeGeometry::Uniform, PhaseSpacePoint::new(0.3, 7.0), 5.0);
        let r = memory_integral(&q, 1e-13).unwrap();
        assert!((r.g - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert_eq!(r.dg_dx.norm(), 0.0);
        assert_eq!(r.dg_dp.norm(), 0.0);
    }

    #[test]
    fn rejects_undamped_channel() {
        let mut ch = cos_channel(0.0);
        ch.kappa = 0.0;
        let src = ModeGeometry::standing_cos(1.0);
        let q = MemoryQuery::new(&ch, &src, PhaseSpacePoint::new(0.0, 1.0), 1.0);
        assert!(memory_integral(&q, 1e-10).is_err());
        assert!(memory_integral_fp_closed(0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_static_limit() {
        let nu = Complex64::new(1.0, 0.7);
        for x in [0.0, 0.4, 1.9] {
            let r = memory_integral_fp_closed(x, 0.0, 3.0, 1.0, 0.7).unwrap();
            assert!(rel(r.g, x.cos().powi(2) / nu) < 1e-15);
        }
    }

    #[test]
    fn closed_form_fast_limit() {
        let nu = Complex64::new(1.0, 0.3);
        let m = 1.0;
        let slow = memory_integral_fp_closed(0.3, 1e3, m, 1.0, 0.3).unwrap();
        let fast = memory_integral_fp_closed(0.3, 1e6, m, 1.0, 0.3).unwrap();
        let half = 0.5 / nu;
        let d_slow = (slow.g - half).norm();
        let d_fast = (fast.g - half).norm();
        assert!(d_fast < 1e-6);
        assert!((d_slow / d_fast - 1e3).abs() < 1.0);
    }

    #[test]
    fn closed_form_matches_quadrature_at_reference_point() {
        let delta = 1.0 / 3f64.sqrt();
        let m = 7.0;
        let (x, p) = (PI / 4.0, m);
        let ch = cos_channel(delta);
        let src = ModeGeometry::standing_cos(1.0);
        let q = memory_integral(&MemoryQuery::new(&ch, &src, PhaseSpacePoint::new(x, p), m), 1e-13)
            .unwrap();
        let c = memory_integral_fp_closed(x, p, m, 1.0, delta).unwrap();
        assert!(rel(q.g, c.g) < 1e-11);
        assert!(rel(q.dg_dx, c.dg_dx) < 1e-11);
        assert!(rel(q.dg_dp, c.dg_dp) < 1e-10);
    }

    #[test]
    fn exp_sum_reproduces_cos_closed_form() {
        let g = ModeGeometry::standing_cos(1.0);
        let sum = ExpSum::from_pair(&g, &g, 0.0, 0.0).unwrap();
        assert_eq!(sum.terms().len(), 3);
        let nu = Complex64::new(1.0, 0.6);
        for (x, p) in [(0.1, 0.0), (1.2, 3.0), (-2.0, -40.0)] {
            let a = sum.memory(nu, x, p, 10.0);
            let b = memory_integral_fp_closed(x, p, 10.0, 1.0, 0.6).unwrap();
            assert!(rel(a.g, b.g) < 1e-14);
            assert!(rel(a.dg_dx, b.dg_dx) < 1e-13);
            assert!(rel(a.dg_dp, b.dg_dp) < 1e-13);
        }
    }

    #[test]
    fn per_particle_single_matches_memory_integral() {
        let ch = cos_channel(0.5);
        let src = ModeGeometry::standing_cos(1.0);
        let pt = PhaseSpacePoint::new(0.8, 2.5);
        let a = per_particle_memory(&ch, &src, &[pt], 4.0, 1e-12).unwrap()[0];
        let b = memory_integral_fp_closed(pt.x, pt.p, 4.0, 1.0, 0.5).unwrap();
        assert_eq!(a.g, b.g);
        let twin = per_particle_memory(&ch, &src, &[pt, pt], 4.0, 1e-12).unwrap();
        assert_eq!(twin[0], twin[1]);
    }

    #[test]
    fn two_particle_sum_matches_summed_integrand() {
        let ch = cos_channel(0.5);
        let src = ModeGeometry::standing_cos(1.0);
        let m = 3.0;
        let pts = [PhaseSpacePoint::new(0.3, 1.7), PhaseSpacePoint::new(2.1, -0.9)];
        let per = per_particle_memory(&ch, &src, &pts, m, 1e-12).unwrap();
        let total = per[0].g + per[1].g;
        let nu = ch.nu();
        let integrand = |tau: f64| {
            let w = (-nu * tau).exp();
            let s: f64 = pts
                .iter()
                .map(|pt| (pt.x - pt.p / m * tau).cos().powi(2))
                .sum();
            [w * s]
        };
        let breaks: Vec<f64> = (0..=400).map(|i| 40.0 * i as f64 / 400.0).collect();
        let brute = quadrature::integrate(&integrand, &breaks, 1e-13, 100_000);
        assert!(rel(brute.value[0], total) < 1e-11);
    }

    #[test]
    fn integrand_dump_starts_at_local_field() {
        let ch = cos_channel(0.0);
        let src = ModeGeometry::standing_cos(1.0);
        let q = MemoryQuery::new(&ch, &src, PhaseSpacePoint::new(0.0, 1.0), 1.0);
        let s = integrand_samples(&q, 11);
        assert_eq!(s.len(), 11);
        assert_eq!(s[0].1, Complex64::new(1.0, 0.0));
        assert_eq!(s[10].0, 40.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conjugation_under_detuning_flip(x in -3.0f64..3.0, p in -20.0f64..20.0, d in -3.0f64..3.0) {
                let a = memory_integral_fp_closed(x, p, 10.0, 1.0, d).unwrap();
                let b = memory_integral_fp_closed(x, p, 10.0, 1.0, -d).unwrap();
                prop_assert!((b.g - a.g.conj()).norm() < 1e-14);
                prop_assert!((b.dg_dp - a.dg_dp.conj()).norm() < 1e-14);
            }

            #[test]
            fn static_conjugation(x in -3.0f64..3.0, d in -3.0f64..3.0) {
                let a = memory_integral_fp_closed(x, 0.0, 10.0, 1.0, d).unwrap();
                let b = memory_integral_fp_closed(x, 0.0, 10.0, 1.0, -d).unwrap();
                prop_assert!((b.g - a.g.conj()).norm() < 1e-15);
            }

            #[test]
            fn bounded_by_integrand(x in -3.0f64..3.0, p in -50.0f64..50.0, d in -3.0f64..3.0, k in 0.2f64..5.0) {
                let r = memory_integral_fp_closed(x, p, 5.0, k, d).unwrap();
                prop_assert!(r.g.norm() <= 1.0 / k * (1.0 + 1e-12));
            }

            #[test]
            fn reversal_symmetry(x in -3.0f64..3.0, p in -20.0f64..20.0, d in -3.0f64..3.0) {
                // cos² is even, so reflecting x and p together leaves G unchanged
                let a = memory_integral_fp_closed(x, p, 10.0, 1.0, d).unwrap();
                let b = memory_integral_fp_closed(-x, -p, 10.0, 1.0, d).unwrap();
                prop_assert!((a.g - b.g).norm() < 1e-14);
                prop_assert!((a.dg_dx + b.dg_dx).norm() < 1e-14);
            }

            #[test]
            fn derivatives_match_finite_differences(x in -3.0f64..3.0, p in -20.0f64..20.0, d in -3.0f64..3.0) {
                let m = 10.0;
                let h = 1e-5;
                let r = memory_integral_fp_closed(x, p, m, 1.0, d).unwrap();
                let gx = (memory_integral_fp_closed(x + h, p, m, 1.0, d).unwrap().g
                    - memory_integral_fp_closed(x - h, p, m, 1.0, d).unwrap().g) / (2.0 * h);
                let gp = (memory_integral_fp_closed(x, p + h, m, 1.0, d).unwrap().g
                    - memory_integral_fp_closed(x, p - h, m, 1.0, d).unwrap().g) / (2.0 * h);
                prop_assume!(r.g.norm() > 1e-8);
                prop_assert!((gx - r.dg_dx).norm() <= 1e-6 * r.g.norm().max(r.dg_dx.norm()));
                prop_assert!((gp - r.dg_dp).norm() <= 1e-6 * r.g.norm().max(r.dg_dp.norm()));
            }
        }
    }
}

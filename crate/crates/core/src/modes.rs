//! Cavity and pump mode functions with analytic derivatives along the cavity
//! axis, and the degenerate transverse-mode manifold of a confocal resonator.
//!
//! Lengths are in whatever unit the caller uses for `k` and the waists; the
//! dynamics modules use the scaled unit `1/k` of the pumped mode.

use crate::error::{domain, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Longitudinal standing-wave parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    /// Standing wave of longitudinal index `n`: cosine for even, sine for odd.
    pub fn of_index(n: i64) -> Self {
        if n.rem_euclid(2) == 0 {
            Parity::Cos
        } else {
            Parity::Sin
        }
    }

    /// (value, first, second derivative) of cos(ks) or sin(ks).
    pub fn wave(self, k: f64, s: f64) -> (f64, f64, f64) {
        let (sn, cs) = (k * s).sin_cos();
        match self {
            Parity::Cos => (cs, -k * sn, -k * k * cs),
            Parity::Sin => (sn, k * cs, -k * k * sn),
        }
    }
}

/// Spatial mode function. The lab frame has the cavity axis along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeGeometry {
    /// Uniform field, f ≡ 1.
    Uniform,
    /// cos(k s) or sin(k s) along `axis`.
    PlaneStanding { axis: Axis, parity: Parity, k: f64 },
    /// exp(i k s) along `axis` with envelope exp(−r⊥²/w²) in the two other
    /// coordinates; `waist: None` is an ideal plane wave.
    GaussianRunning { axis: Axis, k: f64, waist: Option<f64> },
    /// Helical Laguerre-Gaussian profile in (y, z) times a standing wave along x.
    /// Normalized to carry the same power as the fundamental, which has unit
    /// peak. Gouy phase and wavefront curvature are dropped.
    LaguerreGaussianStanding {
        n: i64,
        m: u32,
        l: u32,
        parity: Parity,
        k: f64,
        w0: f64,
    },
}

/// Mode value and its first two derivatives along x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSample {
    pub value: Complex64,
    pub dx: Complex64,
    pub dxx: Complex64,
}

impl ModeSample {
    const ONE: ModeSample = ModeSample {
        value: Complex64::new(1.0, 0.0),
        dx: Complex64::new(0.0, 0.0),
        dxx: Complex64::new(0.0, 0.0),
    };

    /// Samples of conj(self)·other, i.e. f*·g with its x-derivatives.
    pub fn conj_product(&self, other: &ModeSample) -> ModeSample {
        let (a, da, dda) = (self.value.conj(), self.dx.conj(), self.dxx.conj());
        let (b, db, ddb) = (other.value, other.dx, other.dxx);
        ModeSample {
            value: a * b,
            dx: da * b + a * db,
            dxx: dda * b + 2.0 * da * db + a * ddb,
        }
    }
}

/// Generalized Laguerre polynomial L_n^a(t) by upward recurrence.
pub fn laguerre(n: u32, a: u32, t: f64) -> f64 {
    let a = a as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - t;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + a - t) * cur - (j + a) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// √(m!/(m+ℓ)!)
fn lg_norm(m: u32, l: u32) -> f64 {
    let mut ratio = 1.0;
    for i in (m + 1)..=(m + l) {
        ratio /= i as f64;
    }
    ratio.sqrt()
}

/// Transverse LG profile and its transverse Laplacian at (y, z).
pub(crate) fn lg_transverse(m: u32, l: u32, w: f64, y: f64, z: f64) -> (Complex64, Complex64) {
    let r2 = y * y + z * z;
    let t = 2.0 * r2 / (w * w);
    let radial = lg_norm(m, l) * t.sqrt().powi(l as i32) * laguerre(m, l, t) * (-r2 / (w * w)).exp();
    let phase = if l == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, l as f64 * z.atan2(y))
    };
    let u = phase * radial;
    let order = (2 * m + l + 1) as f64;
    let lap = u * (4.0 * r2 / w.powi(4) - 4.0 * order / (w * w));
    (u, lap)
}

impl ModeGeometry {
    pub fn standing_cos(k: f64) -> Self {
        ModeGeometry::PlaneStanding {
            axis: Axis::X,
            parity: Parity::Cos,
            k,
        }
    }

    pub fn running_x(k: f64) -> Self {
        ModeGeometry::GaussianRunning {
            axis: Axis::X,
            k,
            waist: None,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        match *self {
            ModeGeometry::Uniform => 0.0,
            ModeGeometry::PlaneStanding { k, .. }
            | ModeGeometry::GaussianRunning { k, .. }
            | ModeGeometry::LaguerreGaussianStanding { k, .. } => k,
        }
    }

    /// Value with exact first and second x-derivatives.
    pub fn evaluate(&self, point: [f64; 3]) -> ModeSample {
        let [x, y, z] = point;
        match *self {
            ModeGeometry::Uniform => ModeSample::ONE,
            ModeGeometry::PlaneStanding { axis, parity, k } => {
                let (v, d, dd) = parity.wave(k, point[axis.index()]);
                if axis == Axis::X {
                    ModeSample {
                        value: v.into(),
                        dx: d.into(),
                        dxx: dd.into(),
                    }
                } else {
                    ModeSample {
                        value: v.into(),
                        dx: Complex64::default(),
                        dxx: Complex64::default(),
                    }
                }
            }
            ModeGeometry::GaussianRunning { axis, k, waist } => {
                let s = point[axis.index()];
                let w2 = waist.map(|w| w * w);
                let mut r2 = 0.0;
                let mut x_in_envelope = false;
                for (i, c) in point.iter().enumerate() {
                    if i != axis.index() {
                        r2 += c * c;
                        x_in_envelope |= i == 0;
                    }
                }
                let env = w2.map_or(1.0, |w2| (-r2 / w2).exp());
                let value = Complex64::from_polar(env, k * s);
                if axis == Axis::X {
                    ModeSample {
                        value,
                        dx: I * k * value,
                        dxx: -k * k * value,
                    }
                } else if let (Some(w2), true) = (w2, x_in_envelope) {
                    ModeSample {
                        value,
                        dx: value * (-2.0 * x / w2),
                        dxx: value * (4.0 * x * x / (w2 * w2) - 2.0 / w2),
                    }
                } else {
                    ModeSample {
                        value,
                        dx: Complex64::default(),
                        dxx: Complex64::default(),
                    }
                }
            }
            ModeGeometry::LaguerreGaussianStanding {
                m, l, parity, k, w0, ..
            } => {
                let (u, _) = lg_transverse(m, l, w0, y, z);
                let (v, d, dd) = parity.wave(k, x);
                ModeSample {
                    value: u * v,
                    dx: u * d,
                    dxx: u * dd,
                }
            }
        }
    }

    pub fn gradient_x(&self, point: [f64; 3]) -> Complex64 {
        self.evaluate(point).dx
    }

    pub fn second_derivative_x(&self, point: [f64; 3]) -> Complex64 {
        self.evaluate(point).dxx
    }

    /// Full 3D Laplacian.
    pub fn laplacian(&self, point: [f64; 3]) -> Complex64 {
        let [x, y, z] = point;
        match *self {
            ModeGeometry::Uniform => Complex64::default(),
            ModeGeometry::PlaneStanding { axis, parity, k } => {
                parity.wave(k, point[axis.index()]).2.into()
            }
            ModeGeometry::GaussianRunning { axis, k, waist } => {
                let value = self.evaluate(point).value;
                let Some(w) = waist else {
                    return -k * k * value;
                };
                let w2 = w * w;
                let mut lap = -k * k;
                for (i, c) in point.iter().enumerate() {
                    if i != axis.index() {
                        lap += 4.0 * c * c / (w2 * w2) - 2.0 / w2;
                    }
                }
                value * lap
            }
            ModeGeometry::LaguerreGaussianStanding {
                m, l, parity, k, w0, ..
            } => {
                let (u, lap_t) = lg_transverse(m, l, w0, y, z);
                let (v, _, dd) = parity.wave(k, x);
                lap_t * v + u * dd
            }
        }
    }

    /// f(x) at fixed (y, z) as a finite sum Σ c_j exp(i q_j x), when the mode
    /// has that form along x.
    pub fn x_fourier(&self, y: f64, z: f64) -> Option<Vec<(Complex64, f64)>> {
        let half = Complex64::new(0.5, 0.0);
        let standing = |parity: Parity, k: f64, amp: Complex64| match parity {
            Parity::Cos => vec![(amp * half, k), (amp * half, -k)],
            Parity::Sin => vec![(amp * (-I * 0.5), k), (amp * (I * 0.5), -k)],
        };
        match *self {
            ModeGeometry::Uniform => Some(vec![(Complex64::new(1.0, 0.0), 0.0)]),
            ModeGeometry::PlaneStanding { axis, parity, k } => {
                if axis == Axis::X {
                    Some(standing(parity, k, Complex64::new(1.0, 0.0)))
                } else {
                    let v = self.evaluate([0.0, y, z]).value;
                    Some(vec![(v, 0.0)])
                }
            }
            ModeGeometry::GaussianRunning { axis, k, waist } => match (axis, waist) {
                (Axis::X, _) => {
                    let env = waist.map_or(1.0, |w| (-(y * y + z * z) / (w * w)).exp());
                    Some(vec![(Complex64::new(env, 0.0), k)])
                }
                (_, None) => Some(vec![(self.evaluate([0.0, y, z]).value, 0.0)]),
                (Axis::Z, Some(_)) | (Axis::Y, Some(_)) => None,
            },
            ModeGeometry::LaguerreGaussianStanding {
                m, l, parity, k, w0, ..
            } => {
                let (u, _) = lg_transverse(m, l, w0, y, z);
                Some(standing(parity, k, u))
            }
        }
    }
}

/// A cavity mode together with its damping, detuning and coupling, all in
/// units of the pumped mode's κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChannel {
    pub geometry: ModeGeometry,
    pub kappa: f64,
    /// Mode resonance minus pump frequency.
    pub delta: f64,
    /// Single-photon coupling U_m, signed.
    pub coupling: f64,
}

impl ModeChannel {
    pub fn new(geometry: ModeGeometry, kappa: f64, delta: f64, coupling: f64) -> Result<Self> {
        if !(kappa > 0.0) || !delta.is_finite() || !coupling.is_finite() {
            return domain(format!(
                "channel needs kappa > 0 and finite detuning/coupling (kappa={kappa}, delta={delta})"
            ));
        }
        Ok(Self {
            geometry,
            kappa,
            delta,
            coupling,
        })
    }

    /// ν = κ + iΔ.
    pub fn nu(&self) -> Complex64 {
        Complex64::new(self.kappa, self.delta)
    }
}

/// Halton point in [0,1)³ from bases 2, 3, 5.
pub fn halton3(index: u64) -> [f64; 3] {
    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    [
        radical_inverse(index, 2),
        radical_inverse(index, 3),
        radical_inverse(index, 5),
    ]
}

/// max |∇²f + k²f| / k² over `samples` quasi-random points in the box
/// `[-half_extent, half_extent]³`.
pub fn helmholtz_residual(geometry: &ModeGeometry, half_extent: [f64; 3], samples: usize) -> f64 {
    let k2 = geometry.wavenumber().powi(2);
    let scale = if k2 > 0.0 { k2 } else { 1.0 };
    (1..=samples as u64)
        .map(|i| {
            let h = halton3(i);
            let p = [
                (2.0 * h[0] - 1.0) * half_extent[0],
                (2.0 * h[1] - 1.0) * half_extent[1],
                (2.0 * h[2] - 1.0) * half_extent[2],
            ];
            let f = geometry.evaluate(p).value;
            (geometry.laplacian(p) + k2 * f).norm() / scale
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Confocal resonator

/// Symmetric confocal resonator with mirror spacing `mirror_distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfocalSetup {
    pub mirror_distance: f64,
    pub n0: i64,
    /// Largest usable effective waist in units of `w0`.
    pub waist_ratio_limit: f64,
    pub w0: f64,
}

impl ConfocalSetup {
    /// Uses the confocal waist √(λd/2π).
    pub fn new(mirror_distance: f64, n0: i64, waist_ratio_limit: f64) -> Result<Self> {
        if !(mirror_distance > 0.0) || n0 < 1 || !(waist_ratio_limit >= 1.0) {
            return domain("confocal setup needs d > 0, n0 >= 1 and a >= 1");
        }
        let lambda = 2.0 * mirror_distance / (n0 as f64 + 0.5);
        Ok(Self {
            mirror_distance,
            n0,
            waist_ratio_limit,
            w0: (lambda * mirror_distance / (2.0 * PI)).sqrt(),
        })
    }

    /// Limit chosen so that exactly the orders 2m+ℓ ≤ `cap` fit.
    pub fn with_order_cap(mirror_distance: f64, n0: i64, cap: u32) -> Result<Self> {
        Self::new(mirror_distance, n0, ((cap + 1) as f64).sqrt())
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * self.mirror_distance / (self.n0 as f64 + 0.5)
    }

    /// k_{n,m,ℓ} = (π/d)(n + (2m+ℓ+1)/2).
    pub fn resonance_wavenumber(&self, n: i64, m: u32, l: u32) -> f64 {
        PI / self.mirror_distance * (n as f64 + (2 * m + l + 1) as f64 / 2.0)
    }

    /// Largest transverse order 2m+ℓ whose effective waist fits.
    pub fn order_cap(&self) -> u32 {
        let a2 = self.waist_ratio_limit * self.waist_ratio_limit;
        // 2m+ℓ+1 ≤ a², with slack for a = √(cap+1) round-off
        ((a2 + 1e-9).floor() as i64 - 1).max(0) as u32
    }

    /// The loose a⁴/2 estimate of the degeneracy.
    pub fn degeneracy_estimate(&self) -> f64 {
        self.waist_ratio_limit.powi(4) / 2.0
    }
}

/// w0·√(2m+ℓ+1).
pub fn effective_waist(m: u32, l: u32, w0: f64) -> f64 {
    w0 * ((2 * m + l + 1) as f64).sqrt()
}

/// One member of the degenerate manifold, as exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub n: i64,
    pub m: u32,
    pub l: u32,
    pub parity: Parity,
    pub k: f64,
    pub effective_waist: f64,
}

impl ModeRecord {
    pub fn geometry(&self, w0: f64) -> ModeGeometry {
        ModeGeometry::LaguerreGaussianStanding {
            n: self.n,
            m: self.m,
            l: self.l,
            parity: self.parity,
            k: self.k,
            w0,
        }
    }
}

/// All (n, m, ℓ) exactly degenerate with (n₀, 0, 0) whose effective waist
/// is within the setup's limit. ℓ ≥ 0 and even.
pub fn confocal_degenerate_set(setup: &ConfocalSetup) -> Result<Vec<ModeRecord>> {
    let cap = setup.order_cap();
    if (cap / 2) as i64 > setup.n0 - 1 {
        return domain(format!(
            "transverse order cap {cap} needs n0 > {}, got {}",
            cap / 2,
            setup.n0
        ));
    }
    let mut out = Vec::new();
    for order in (0..=cap).step_by(2) {
        for l in (0..=order).step_by(2) {
            let m = (order - l) / 2;
            let n = setup.n0 - (order / 2) as i64;
            out.push(ModeRecord {
                n,
                m,
                l,
                parity: Parity::of_index(n),
                k: setup.resonance_wavenumber(n, m, l),
                effective_waist: effective_waist(m, l, setup.w0),
            });
        }
    }
    Ok(out)
}

pub fn export_modes_json(modes: &[ModeRecord]) -> String {
    serde_json::to_string_pretty(modes).expect("mode records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cos_mode_at_origin() {
        let f = ModeGeometry::standing_cos(2.0).evaluate([0.0, 0.3, -0.1]);
        assert_eq!(f.value, Complex64::new(1.0, 0.0));
        assert_eq!(f.dx.norm(), 0.0);
        assert_eq!(f.dxx, Complex64::new(-4.0, 0.0));
    }

    #[test]
    fn cos_intensity_slope_at_quarter() {
        let k = 3.0;
        let f = ModeGeometry::standing_cos(k).evaluate([PI / 4.0 / k, 0.0, 0.0]);
        let slope = f.conj_product(&f).dx.re;
        assert_relative_eq!(slope, -k, max_relative = 1e-14);
    }

    #[test]
    fn transverse_pump_is_flat_along_x_near_axis() {
        let w = 100.0;
        let pump = ModeGeometry::GaussianRunning {
            axis: Axis::Y,
            k: 1.0,
            waist: Some(w),
        };
        let dx = 0.5;
        let a = pump.evaluate([0.0, 0.2, 0.0]).value;
        let b = pump.evaluate([dx, 0.2, 0.0]).value;
        assert!(((b - a) / a).norm() <= 2.0 * (dx / w).powi(2));
    }

    #[test]
    fn plane_waves_solve_helmholtz() {
        let ext = [10.0, 10.0, 10.0];
        for g in [
            ModeGeometry::standing_cos(1.0),
            ModeGeometry::PlaneStanding {
                axis: Axis::Z,
                parity: Parity::Sin,
                k: 2.5,
            },
            ModeGeometry::GaussianRunning {
                axis: Axis::Y,
                k: 1.0,
                waist: None,
            },
        ] {
            assert!(helmholtz_residual(&g, ext, 200) < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn lg_mode_residual_is_paraxial_sized() {
        let w0 = 250.0;
        let g = ModeGeometry::LaguerreGaussianStanding {
            n: 10,
            m: 1,
            l: 0,
            parity: Parity::Cos,
            k: 1.0,
            w0,
        };
        let r = helmholtz_residual(&g, [5.0, 2.0 * w0, 2.0 * w0], 500);
        let scale = 1.0 / (w0 * w0);
        assert!(r > 0.1 * scale && r < 100.0 * scale, "residual {r}");
    }

    #[test]
    fn laguerre_low_orders() {
        let t = 0.7;
        assert_eq!(laguerre(0, 3, t), 1.0);
        assert_relative_eq!(laguerre(1, 2, t), 3.0 - t, max_relative = 1e-14);
        assert_relative_eq!(
            laguerre(2, 0, t),
            0.5 * (t * t - 4.0 * t + 2.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn lg_modes_bounded_and_power_normalized() {
        let w = 1.0;
        let n = 600;
        let h = 12.0 * w / n as f64;
        for (m, l) in [(0, 0), (1, 0), (0, 2), (2, 4), (5, 2)] {
            let mut power = 0.0;
            let mut peak: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let y = -6.0 * w + (i as f64 + 0.5) * h;
                    let z = -6.0 * w + (j as f64 + 0.5) * h;
                    let a = lg_transverse(m, l, w, y, z).0.norm_sqr();
                    peak = peak.max(a);
                    power += a * h * h;
                }
            }
            assert!(peak <= 1.0 + 1e-12, "({m},{l}) peak {peak}");
            assert_relative_eq!(power, PI / 2.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn effective_waist_examples() {
        assert_eq!(effective_waist(0, 0, 2.0), 2.0);
        assert_relative_eq!(effective_waist(1, 2, 1.0), 5f64.sqrt());
        assert_relative_eq!(effective_waist(27, 0, 1.0), 7.416, max_relative = 1e-3);
    }

    #[test]
    fn degenerate_counts() {
        for (cap, count) in [(8, 15), (18, 55), (54, 406)] {
            let s = ConfocalSetup::with_order_cap(0.01, 20000, cap).unwrap();
            assert_eq!(confocal_degenerate_set(&s).unwrap().len(), count, "cap {cap}");
        }
        let fundamental = ConfocalSetup::new(0.01, 20000, 1.0).unwrap();
        assert_eq!(confocal_degenerate_set(&fundamental).unwrap().len(), 1);
    }

    #[test]
    fn degenerate_set_shares_wavenumber() {
        let s = ConfocalSetup::with_order_cap(0.01, 20000, 54).unwrap();
        let k0 = s.resonance_wavenumber(s.n0, 0, 0);
        assert_relative_eq!(k0, 2.0 * PI / s.wavelength(), max_relative = 1e-14);
        for r in confocal_degenerate_set(&s).unwrap() {
            assert!((r.k - k0).abs() <= 1e-12 * k0);
            assert_eq!(r.l % 2, 0);
            assert_eq!(r.parity, Parity::of_index(r.n));
        }
    }

    #[test]
    fn degenerate_set_refuses_small_n0() {
        let s = ConfocalSetup::with_order_cap(0.01, 3, 18).unwrap();
        assert!(confocal_degenerate_set(&s).is_err());
    }

    #[test]
    fn default_confocal_geometry() {
        let s = ConfocalSetup::new(0.01, 20000, 1.0).unwrap();
        assert_relative_eq!(s.wavelength(), 1e-6, max_relative = 1e-4);
        assert_relative_eq!(s.w0, 39.9e-6, max_relative = 1e-3);
    }

    #[test]
    fn export_round_trips() {
        let s = ConfocalSetup::with_order_cap(0.01, 20000, 8).unwrap();
        let modes = confocal_degenerate_set(&s).unwrap();
        let back: Vec<ModeRecord> = serde_json::from_str(&export_modes_json(&modes)).unwrap();
        assert_eq!(back, modes);
    }

    #[test]
    fn fourier_form_matches_evaluation() {
        let geoms = [
            ModeGeometry::standing_cos(1.3),
            ModeGeometry::PlaneStanding {
                axis: Axis::X,
                parity: Parity::Sin,
                k: 0.7,
            },
            ModeGeometry::running_x(1.0),
            ModeGeometry::LaguerreGaussianStanding {
                n: 3,
                m: 1,
                l: 2,
                parity: Parity::Sin,
                k: 1.0,
                w0: 2.0,
            },
        ];
        for g in &geoms {
            let terms = g.x_fourier(0.4, -0.9).unwrap();
            for x in [-1.0, 0.2, 2.7] {
                let sum: Complex64 = terms.iter().map(|(c, q)| c * (I * q * x).exp()).sum();
                let direct = g.evaluate([x, 0.4, -0.9]).value;
                assert!((sum - direct).norm() < 1e-14, "{g:?}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn geometries() -> Vec<ModeGeometry> {
            vec![
                ModeGeometry::standing_cos(1.0),
                ModeGeometry::PlaneStanding {
                    axis: Axis::X,
                    parity: Parity::Sin,
                    k: 1.7,
                },
                ModeGeometry::running_x(1.0),
                ModeGeometry::GaussianRunning {
                    axis: Axis::Y,
                    k: 1.0,
                    waist: Some(3.0),
                },
                ModeGeometry::LaguerreGaussianStanding {
                    n: 5,
                    m: 2,
                    l: 2,
                    parity: Parity::Cos,
                    k: 1.0,
                    w0: 2.0,
                },
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn derivatives_match_finite_differences(
                idx in 0usize..5, x in -5.0f64..5.0, y in -3.0f64..3.0, z in -3.0f64..3.0
            ) {
                let g = &geometries()[idx];
                let h = 1e-6 / g.wavenumber();
                let s = g.evaluate([x, y, z]);
                let fp = g.evaluate([x + h, y, z]);
                let fm = g.evaluate([x - h, y, z]);
                let fd1 = (fp.value - fm.value) / (2.0 * h);
                let fd2 = (fp.dx - fm.dx) / (2.0 * h);
                let k = g.wavenumber();
                let scale = (s.value.norm() * k).max(s.dx.norm()).max(s.dxx.norm() / k).max(1e-3);
                prop_assert!((fd1 - s.dx).norm() <= 1e-8 * scale);
                prop_assert!((fd2 - s.dxx).norm() <= 1e-8 * scale * k);
            }

            #[test]
            fn modes_bounded_by_one(idx in 0usize..5, x in -5.0f64..5.0, y in -6.0f64..6.0, z in -6.0f64..6.0) {
                prop_assert!(geometries()[idx].evaluate([x, y, z]).value.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn degeneracy_count_is_triangular() {
        for j in 0..=50u32 {
            let s = ConfocalSetup::with_order_cap(0.01, 20000, 2 * j).unwrap();
            let brute = (0..=2 * j)
                .flat_map(|m| (0..=2 * j).map(move |l| (m, l)))
                .filter(|&(m, l)| l % 2 == 0 && 2 * m + l <= 2 * j)
                .count();
            let n = confocal_degenerate_set(&s).unwrap().len();
            assert_eq!(n, brute);
            assert_eq!(n as u32, (j + 1) * (j + 2) / 2);
        }
    }
}

//! Drift and diffusion coefficients of the semiclassical Fokker-Planck
//! equation in scaled units (ħ = k = κ = 1): cavity-mediated dissipative
//! terms for one mode, many modes and many particles, Fabry-Pérot closed
//! forms, absorption and free-space scattering, and the derived friction and
//! cooling-limit estimates.

use crate::error::{domain, Error, Result};
use crate::memory::{memory_integral, ExpSum, MemoryQuery, MemoryResult};
use crate::modes::{ModeChannel, ModeGeometry, ModeSample};
use crate::params::{ScaledParticle, ValidityReport, Verdict};
use crate::PhaseSpacePoint;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default absolute tolerance for quadrature-evaluated memory integrals.
pub const DEFAULT_MEMORY_TOLERANCE: f64 = 1e-10;

/// Force contributions along x, kept apart for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceParts {
    pub coherent: f64,
    pub dissipative_first: f64,
    pub dissipative_second: f64,
    pub absorption: f64,
    pub scattering: f64,
}

impl ForceParts {
    pub fn total(&self) -> f64 {
        self.coherent
            + self.dissipative_first
            + self.dissipative_second
            + self.absorption
            + self.scattering
    }
}

/// Drift and diffusion at one phase-space point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub g_x: f64,
    pub g_p: ForceParts,
    pub d_pp: f64,
    pub d_xp: f64,
    pub d_xx: f64,
}

impl CoefficientField {
    pub fn is_finite(&self) -> bool {
        let f = self.g_p;
        [
            self.g_x,
            f.coherent,
            f.dissipative_first,
            f.dissipative_second,
            f.absorption,
            f.scattering,
            self.d_pp,
            self.d_xp,
            self.d_xx,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Cavity-mediated dissipative force (split by order in ħ) and diffusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DissipativeTerms {
    pub first_order: f64,
    pub second_order: f64,
    pub d_pp: f64,
    pub d_xp: f64,
    /// False if any memory integral missed its tolerance.
    pub converged: bool,
}

impl DissipativeTerms {
    pub fn force(&self) -> f64 {
        self.first_order + self.second_order
    }
}

/// Contribution of one (weight, mode product, memory) triple. Shared by the
/// single-particle and N-particle assemblies so both round identically.
#[inline]
fn channel_term(w: Complex64, h: &ModeSample, g: Complex64, mem: &MemoryResult) -> [f64; 4] {
    [
        2.0 * (I * w * h.dx * g).re,
        -(w * h.dxx * mem.dg_dp).re,
        2.0 * (w * h.dx * mem.dg_dx).re,
        -(w * h.dx * mem.dg_dp).re,
    ]
}

#[inline]
fn pair_weight(u_lm: f64, u_mn: f64, alpha_l: Complex64, alpha_n: Complex64) -> Complex64 {
    Complex64::new(u_lm * u_mn, 0.0) * (alpha_l.conj() * alpha_n)
}

/// Memory integral of `mode` against `source`: closed form when both are
/// exponential sums along x, adaptive quadrature otherwise.
fn pair_memory(
    closed: Option<&ExpSum>,
    mode: &ModeChannel,
    source: &ModeGeometry,
    transverse: [f64; 2],
    point: PhaseSpacePoint,
    mass: f64,
    tolerance: f64,
) -> Result<MemoryResult> {
    match closed {
        Some(sum) => Ok(sum.memory(mode.nu(), point.x, point.p, mass)),
        None => {
            let mut q = MemoryQuery::new(mode, source, point, mass);
            q.transverse = transverse;
            memory_integral(&q, tolerance)
        }
    }
}

/// A pumped mode f₀ with amplitude α scattering into a set of damped cavity
/// channels, for a single particle of scaled mass `mass`.
#[derive(Debug, Clone)]
pub struct DissipativeModel {
    pub pump: ModeGeometry,
    pub alpha: Complex64,
    pub channels: Vec<ModeChannel>,
    pub mass: f64,
    /// Transverse coordinates (y, z) at which the modes are sampled.
    pub transverse: [f64; 2],
    pub tolerance: f64,
    closed: Vec<Option<ExpSum>>,
}

impl DissipativeModel {
    pub fn new(
        pump: ModeGeometry,
        alpha: Complex64,
        channels: Vec<ModeChannel>,
        mass: f64,
        transverse: [f64; 2],
    ) -> Result<Self> {
        if !(mass > 0.0) {
            return domain("particle mass must be positive");
        }
        if let Some(bad) = channels.iter().find(|c| !(c.kappa > 0.0)) {
            return domain(format!("channel kappa must be positive, got {}", bad.kappa));
        }
        let closed = channels
            .iter()
            .map(|c| ExpSum::from_pair(&c.geometry, &pump, transverse[0], transverse[1]))
            .collect();
        Ok(Self {
            pump,
            alpha,
            channels,
            mass,
            transverse,
            tolerance: DEFAULT_MEMORY_TOLERANCE,
            closed,
        })
    }

    /// The pumped mode is itself the only cavity channel.
    pub fn single(channel: ModeChannel, alpha: Complex64, mass: f64) -> Result<Self> {
        let pump = channel.geometry.clone();
        Self::new(pump, alpha, vec![channel], mass, [0.0, 0.0])
    }

    fn point(&self, x: f64) -> [f64; 3] {
        [x, self.transverse[0], self.transverse[1]]
    }

    /// G_m(x, p) for channel `index`.
    pub fn memory(&self, index: usize, point: PhaseSpacePoint) -> Result<MemoryResult> {
        pair_memory(
            self.closed[index].as_ref(),
            &self.channels[index],
            &self.pump,
            self.transverse,
            point,
            self.mass,
            self.tolerance,
        )
    }

    /// f₀*·f_m with x-derivatives.
    pub fn mode_product(&self, index: usize, x: f64) -> ModeSample {
        let p = self.point(x);
        self.pump
            .evaluate(p)
            .conj_product(&self.channels[index].geometry.evaluate(p))
    }

    pub fn terms(&self, point: PhaseSpacePoint) -> Result<DissipativeTerms> {
        let mut acc = DissipativeTerms {
            converged: true,
            ..Default::default()
        };
        let at = self.point(point.x);
        let pump = self.pump.evaluate(at);
        for (m, ch) in self.channels.iter().enumerate() {
            let w = pair_weight(ch.coupling, ch.coupling, self.alpha, self.alpha);
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let h = if ch.geometry == self.pump {
                pump.conj_product(&pump)
            } else {
                pump.conj_product(&ch.geometry.evaluate(at))
            };
            let mem = self.memory(m, point)?;
            acc.converged &= mem.converged;
            let [a, b, c, d] = channel_term(w, &h, mem.g, &mem);
            acc.first_order += a;
            acc.second_order += b;
            acc.d_pp += c;
            acc.d_xp += d;
        }
        Ok(acc)
    }

    /// Low-velocity friction rate at x.
    pub fn friction(&self, x: f64) -> FrictionTerms {
        let mut out = FrictionTerms::default();
        for (m, ch) in self.channels.iter().enumerate() {
            let g = ch.coupling * ch.coupling * self.alpha.norm_sqr();
            let h = self.mode_product(m, x);
            let t = friction_channel(g, ch.kappa, ch.delta, self.mass, h.dx.norm_sqr(), h.dxx.norm_sqr());
            out.first_order += t.first_order;
            out.second_order += t.second_order;
        }
        out
    }
}

/// Dissipative terms for a single pumped cavity mode.
pub fn dissipative_single(
    point: PhaseSpacePoint,
    channel: &ModeChannel,
    alpha: Complex64,
    mass: f64,
) -> Result<DissipativeTerms> {
    DissipativeModel::single(channel.clone(), alpha, mass)?.terms(point)
}

/// Sum over cavity channels driven by a common pump mode.
pub fn dissipative_multimode(
    point: PhaseSpacePoint,
    pump: &ModeGeometry,
    alpha: Complex64,
    channels: &[ModeChannel],
    mass: f64,
) -> Result<DissipativeTerms> {
    DissipativeModel::new(pump.clone(), alpha, channels.to_vec(), mass, [0.0, 0.0])?.terms(point)
}

/// −U₀|α|² ∂x|f|², in units of ħkκ with U₀ in units of κ.
pub fn conservative_force(pump: &ModeGeometry, u0: f64, photon_number: f64, x: f64) -> f64 {
    let s = pump.evaluate([x, 0.0, 0.0]);
    -u0 * photon_number * s.conj_product(&s).dx.re
}

// ---------------------------------------------------------------------------
// Friction and averaged scalings

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrictionTerms {
    /// ∝ Δ, recoil-independent prefactor.
    pub first_order: f64,
    /// ∝ (κ² − Δ²)/(κ² + Δ²), one more power of the recoil.
    pub second_order: f64,
}

impl FrictionTerms {
    pub fn total(&self) -> f64 {
        self.first_order + self.second_order
    }
}

/// One channel of the low-velocity friction, given |∂x H|² and |∂x² H|² of
/// the mode product H.
pub fn friction_channel(
    coupling_sq: f64,
    kappa: f64,
    delta: f64,
    mass: f64,
    slope_sq: f64,
    curvature_sq: f64,
) -> FrictionTerms {
    let k2d2 = kappa * kappa + delta * delta;
    let pref = -4.0 * kappa * coupling_sq / (mass * k2d2 * k2d2);
    FrictionTerms {
        first_order: pref * delta * slope_sq,
        second_order: pref / (2.0 * mass) * (kappa * kappa - delta * delta) / k2d2 * curvature_sq,
    }
}

/// β(x) for channels scattering a common pump.
pub fn friction_coefficient(
    x: f64,
    pump: &ModeGeometry,
    alpha: Complex64,
    channels: &[ModeChannel],
    mass: f64,
) -> Result<FrictionTerms> {
    Ok(DissipativeModel::new(pump.clone(), alpha, channels.to_vec(), mass, [0.0, 0.0])?.friction(x))
}

/// −(3√3/2)|U₀α/κ|² ω_r at Δ = κ/√3, taking the slope maximum of |f|².
/// `pumped_coupling` is |U₀α|/κ; the result has the units of `recoil`.
pub fn averaged_friction_scaling(pumped_coupling: f64, recoil: f64) -> f64 {
    -1.5 * 3f64.sqrt() * pumped_coupling * pumped_coupling * recoil
}

/// Same as [`averaged_friction_scaling`] but averaged over a standing-wave
/// period, which halves it.
pub fn averaged_friction_period_mean(pumped_coupling: f64, recoil: f64) -> f64 {
    0.5 * averaged_friction_scaling(pumped_coupling, recoil)
}

/// (3ħm/2)|U₀α/κ|²κω_r in units of (ħk)²κ, which is (3/4)|U₀α/κ|².
pub fn averaged_diffusion_scaling(pumped_coupling: f64) -> f64 {
    0.75 * pumped_coupling * pumped_coupling
}

/// (1/4)(Δ/κ + κ/Δ) in units of ħκ, the damping-diffusion estimate.
pub fn cooling_limit(kappa: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !(kappa > 0.0) {
        return domain(format!("cooling limit needs kappa, delta > 0 (delta = {delta})"));
    }
    Ok(0.25 * (delta / kappa + kappa / delta))
}

/// Stationary ⟨p²/2m⟩ = D/(4m|β|) of dp = βp dt + √D dW with the averaged
/// coefficients, (1/8)(Δ/κ + κ/Δ) in units of ħκ.
pub fn cooling_limit_fokker_planck(kappa: f64, delta: f64) -> Result<f64> {
    Ok(0.5 * cooling_limit(kappa, delta)?)
}

// ---------------------------------------------------------------------------
// Fabry-Pérot closed forms, mode cos(kx)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedFabryPerot {
    pub force: f64,
    pub d_pp: f64,
}

/// Position-averaged force and diffusion at Doppler shift `kv` for coupling
/// `coupling_sq` = |U₀α|².
pub fn fp_averaged(kv: f64, kappa: f64, delta: f64, coupling_sq: f64) -> AveragedFabryPerot {
    let nu = Complex64::new(kappa, delta);
    let den = (nu * nu + 4.0 * kv * kv).norm_sqr();
    AveragedFabryPerot {
        force: -2.0 * kappa * coupling_sq * delta * kv / den,
        d_pp: kappa * coupling_sq * (nu.norm_sqr() + 4.0 * kv * kv) / den,
    }
}

/// Position-resolved momentum diffusion at x for Doppler shift `kv`.
pub fn fp_local_diffusion(x: f64, kv: f64, kappa: f64, delta: f64, coupling_sq: f64) -> f64 {
    let nu = Complex64::new(kappa, delta);
    let nu2 = nu * nu;
    let den = (nu2 + 4.0 * kv * kv).norm_sqr();
    let (s, c) = (2.0 * x).sin_cos();
    2.0 * coupling_sq / den
        * (kappa * (nu.norm_sqr() + 4.0 * kv * kv) * s * s - 2.0 * kv * (nu2.re + 4.0 * kv * kv) * s * c)
}

/// Slope d(force)/d(kv) of the averaged force at kv = 0, by central
/// difference with step `h`.
pub fn fp_friction_slope(kappa: f64, delta: f64, coupling_sq: f64, h: f64) -> f64 {
    (fp_averaged(h, kappa, delta, coupling_sq).force - fp_averaged(-h, kappa, delta, coupling_sq).force) / (2.0 * h)
}

/// Maximizer of a unimodal `f` on [lo, hi].
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol * (a.abs() + b.abs()).max(tol) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Detuning in (0, `upper`] that maximizes the low-velocity friction slope of
/// the averaged force.
pub fn optimal_detuning(kappa: f64, upper: f64) -> f64 {
    golden_section_max(|d| -fp_friction_slope(kappa, d, 1.0, 1e-6 * kappa), 1e-6 * kappa, upper, 1e-10)
}

/// Detuning in (0, `upper`] that maximizes |averaged force| at Doppler
/// shift `kv`. The search is bracketed by a coarse scan so the golden
/// section sees a single peak.
pub fn capture_detuning(kappa: f64, kv: f64, upper: f64) -> f64 {
    let f = |d: f64| fp_averaged(kv, kappa, d, 1.0).force.abs();
    let n = 2000;
    let step = upper / n as f64;
    let best = (1..=n)
        .max_by(|&i, &j| f(i as f64 * step).total_cmp(&f(j as f64 * step)))
        .unwrap_or(1);
    golden_section_max(f, ((best as f64 - 1.0) * step).max(1e-9), ((best + 1) as f64 * step).min(upper), 1e-10)
}

// ---------------------------------------------------------------------------
// N particles, M modes

/// N particles in M coupled modes. Mode 0 is usually the pump; its ν is used
/// only where a coupling to it is nonzero on the memory side.
#[derive(Debug, Clone)]
pub struct NParticleSystem {
    pub modes: Vec<ModeChannel>,
    /// Symmetric M×M coupling matrix U.
    pub coupling: DMatrix<f64>,
    pub amplitudes: Vec<Complex64>,
    pub mass: f64,
    pub transverse: [f64; 2],
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NParticleCoefficients {
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
    /// Over (x₁, p₁, …, x_N, p_N).
    pub drift: DVector<f64>,
    pub diffusion: DMatrix<f64>,
    pub converged: bool,
}

impl NParticleSystem {
    /// Single pump (mode 0, amplitude α) driving the given cavity channels,
    /// each coupled to the pump through its own `coupling`.
    pub fn from_multimode(
        pump: ModeGeometry,
        alpha: Complex64,
        channels: &[ModeChannel],
        mass: f64,
    ) -> Result<Self> {
        let m = channels.len() + 1;
        let mut coupling = DMatrix::zeros(m, m);
        for (i, ch) in channels.iter().enumerate() {
            coupling[(0, i + 1)] = ch.coupling;
            coupling[(i + 1, 0)] = ch.coupling;
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); m];
        amplitudes[0] = alpha;
        let mut modes = Vec::with_capacity(m);
        // The pump's own ν never enters: its row weights vanish.
        modes.push(ModeChannel::new(pump, 1.0, 0.0, 0.0)?);
        modes.extend(channels.iter().cloned());
        Ok(Self {
            modes,
            coupling,
            amplitudes,
            mass,
            transverse: [0.0, 0.0],
            tolerance: DEFAULT_MEMORY_TOLERANCE,
        })
    }

    pub fn coefficients(
        &self,
        particles: &[PhaseSpacePoint],
        validity: Option<&ValidityReport>,
    ) -> Result<NParticleCoefficients> {
        let n = particles.len();
        let nm = self.modes.len();
        if n == 0 {
            return domain("need at least one particle");
        }
        if self.coupling.nrows() != nm || self.coupling.ncols() != nm || self.amplitudes.len() != nm {
            return domain("coupling matrix and amplitudes must match the mode count");
        }
        if let Some(v) = validity {
            if v.ensemble.verdict == Verdict::Fail {
                log::warn!(
                    "N|U0 alpha|/kappa = {:.3} violates weak coupling; coefficients unreliable",
                    v.ensemble.ratio
                );
            }
        }
        let [ty, tz] = self.transverse;
        let samples: Vec<Vec<ModeSample>> = particles
            .iter()
            .map(|pt| self.modes.iter().map(|c| c.geometry.evaluate([pt.x, ty, tz])).collect())
            .collect();

        let mut first = vec![0.0; n];
        let mut second = vec![0.0; n];
        let mut dpp = DMatrix::<f64>::zeros(n, n);
        let mut dpx = DMatrix::<f64>::zeros(n, n);
        let mut converged = true;
        let mut closed: Vec<Option<Option<ExpSum>>> = vec![None; nm * nm];

        for l in 0..nm {
            for m in 0..nm {
                for nn in 0..nm {
                    let w = pair_weight(
                        self.coupling[(l, m)],
                        self.coupling[(m, nn)],
                        self.amplitudes[l],
                        self.amplitudes[nn],
                    );
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let sum = closed[m * nm + nn].get_or_insert_with(|| {
                        ExpSum::from_pair(&self.modes[m].geometry, &self.modes[nn].geometry, ty, tz)
                    });
                    let mems: Vec<MemoryResult> = particles
                        .iter()
                        .map(|&pt| {
                            pair_memory(
                                sum.as_ref(),
                                &self.modes[m],
                                &self.modes[nn].geometry,
                                self.transverse,
                                pt,
                                self.mass,
                                self.tolerance,
                            )
                        })
                        .collect::<Result<_>>()?;
                    converged &= mems.iter().all(|r| r.converged);
                    let mut g_sum = mems[0].g;
                    for r in &mems[1..] {
                        g_sum += r.g;
                    }
                    for k in 0..n {
                        let h = samples[k][l].conj_product(&samples[k][m]);
                        let [a, b, _, _] = channel_term(w, &h, g_sum, &mems[k]);
                        first[k] += a;
                        second[k] += b;
                        for (j, mem_j) in mems.iter().enumerate() {
                            let [_, _, c, d] = channel_term(w, &h, mem_j.g, mem_j);
                            dpp[(k, j)] += c;
                            dpx[(k, j)] += d;
                        }
                    }
                }
            }
        }

        let mut drift = DVector::zeros(2 * n);
        let mut diffusion = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            drift[2 * k] = particles[k].p / self.mass;
            drift[2 * k + 1] = first[k] + second[k];
            for j in 0..n {
                diffusion[(2 * k + 1, 2 * j + 1)] = 0.5 * (dpp[(k, j)] + dpp[(j, k)]);
                diffusion[(2 * k + 1, 2 * j)] = dpx[(k, j)];
                diffusion[(2 * j, 2 * k + 1)] = dpx[(k, j)];
            }
        }
        if !drift.iter().chain(diffusion.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "N-particle coefficients",
                x: particles[0].x,
                p: particles[0].p,
            });
        }
        Ok(NParticleCoefficients {
            first_order: first,
            second_order: second,
            drift,
            diffusion,
            converged,
        })
    }
}

// ---------------------------------------------------------------------------
// Absorption and free-space scattering

/// Angular distribution moments of scattered photons along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPattern {
    pub mean_ux: f64,
    pub mean_ux2: f64,
}

impl ScatteringPattern {
    pub fn new(mean_ux: f64, mean_ux2: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&mean_ux) || !(mean_ux * mean_ux <= mean_ux2 && mean_ux2 <= 1.0) {
            return domain(format!(
                "invalid scattering moments <ux> = {mean_ux}, <ux^2> = {mean_ux2}"
            ));
        }
        Ok(Self { mean_ux, mean_ux2 })
    }

    pub fn isotropic() -> Self {
        Self::from_polar_distribution(|_| 1.0)
    }

    /// Dipole radiation polarized along x, with the angular weight sin θ
    /// about the polarization axis.
    pub fn dipole_along_x() -> Self {
        Self::from_polar_distribution(f64::sin)
    }

    /// Moments of an axially symmetric distribution N(θ) about the x axis,
    /// normalized over the sphere.
    pub fn from_polar_distribution(weight: impl Fn(f64) -> f64) -> Self {
        let f = |t: f64| {
            let w = weight(t) * t.sin();
            let c = t.cos();
            [Complex64::new(w, 0.0), Complex64::new(w * c, 0.0), Complex64::new(w * c * c, 0.0)]
        };
        let breaks: Vec<f64> = (0..=16).map(|i| std::f64::consts::PI * i as f64 / 16.0).collect();
        let r = crate::quadrature::integrate(&f, &breaks, 1e-14, 10_000);
        let norm = r.value[0].re;
        Self {
            mean_ux: r.value[1].re / norm,
            mean_ux2: r.value[2].re / norm,
        }
    }
}

/// Momentum diffusion and net force from photon absorption (rate `gamma`,
/// κ units) out of a pump mode with `photon_number` photons.
///
/// The force is taken along the photon flux, +Im[f*∂x f]: the pump
/// e^{ikx} pushes toward +x.
pub fn absorption_terms(pump: &ModeGeometry, point: [f64; 3], gamma: f64, photon_number: f64) -> (f64, f64) {
    let s = pump.evaluate(point);
    let flux = (s.value.conj() * s.dx).im;
    (
        2.0 * gamma * photon_number * flux,
        gamma * photon_number * s.dx.norm_sqr(),
    )
}

/// Reemission recoil of Rayleigh-scattered pump photons with wavenumber
/// `k_pump` (in units of the cavity k). The emitted photon carries momentum
/// along u, so a forward-peaked pattern pushes the particle backward.
pub fn scattering_terms(
    pump: &ModeGeometry,
    point: [f64; 3],
    gamma_sca: f64,
    photon_number: f64,
    k_pump: f64,
    pattern: &ScatteringPattern,
) -> (f64, f64) {
    let s = pump.evaluate(point);
    let intensity = s.value.norm_sqr();
    let cross = (s.value * s.dx.conj()).im;
    let force = -2.0 * gamma_sca * k_pump * pattern.mean_ux * photon_number * intensity;
    let diffusion = gamma_sca
        * photon_number
        * k_pump
        * (k_pump * pattern.mean_ux2 * intensity + 2.0 * pattern.mean_ux * cross);
    (force, diffusion)
}

// ---------------------------------------------------------------------------
// Diffusion budget

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum PumpOrientation {
    /// Standing-wave pump along the cavity axis, cos(kx).
    Axial,
    /// Running-wave pump along y with a Gaussian envelope of `waist` (scaled
    /// units) in x and z; the particle samples |x| ≤ waist.
    Perpendicular { waist: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionBudget {
    pub d_cavity: f64,
    pub d_absorption: f64,
    pub d_scattering: f64,
    /// Reemission part of `d_scattering`, without the in-coupling recoil.
    pub d_reemission: f64,
    pub absorption_ratio: f64,
    pub scattering_ratio: f64,
    pub reemission_ratio: f64,
    /// Factor by which the cooling limit grows with all extra diffusion.
    pub inflation: f64,
}

/// Position-averaged momentum diffusion from absorption and scattering
/// relative to the low-velocity cavity diffusion g/|ν|². Absorption counts
/// γ_a only; the scattering share adds the in-coupling recoil γ_s|∂x f|² to
/// the isotropic reemission term.
pub fn diffusion_budget(
    particle: &ScaledParticle,
    photon_number: f64,
    delta: f64,
    orientation: PumpOrientation,
) -> Result<DiffusionBudget> {
    if !(photon_number >= 0.0) {
        return domain("photon number must be non-negative");
    }
    let (pump, lo, hi) = match orientation {
        PumpOrientation::Axial => (ModeGeometry::standing_cos(1.0), 0.0, std::f64::consts::PI),
        PumpOrientation::Perpendicular { waist } => {
            if !(waist > 0.0) {
                return domain("pump waist must be positive");
            }
            (
                ModeGeometry::GaussianRunning {
                    axis: crate::modes::Axis::Y,
                    k: 1.0,
                    waist: Some(waist),
                },
                -waist,
                waist,
            )
        }
    };
    let pattern = ScatteringPattern::isotropic();
    let f = |x: f64| {
        let p = [x, 0.0, 0.0];
        let (_, a) = absorption_terms(&pump, p, particle.gamma_abs, photon_number);
        let (_, r) = absorption_terms(&pump, p, particle.gamma_sca, photon_number);
        let (_, s) = scattering_terms(&pump, p, particle.gamma_sca, photon_number, 1.0, &pattern);
        [Complex64::new(a, 0.0), Complex64::new(r + s, 0.0), Complex64::new(s, 0.0)]
    };
    let n = 64;
    let breaks: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let q = crate::quadrature::integrate(&f, &breaks, 1e-12 * (1.0 + photon_number), 10_000);
    let span = hi - lo;
    let d_abs = q.value[0].re / span;
    let d_sca = q.value[1].re / span;
    let d_re = q.value[2].re / span;
    let coupling_sq = particle.u0 * particle.u0 * photon_number;
    let d_cav = fp_averaged(0.0, 1.0, delta, coupling_sq).d_pp;
    if !(d_cav > 0.0) {
        return domain("cavity diffusion vanishes; budget undefined");
    }
    Ok(DiffusionBudget {
        d_cavity: d_cav,
        d_absorption: d_abs,
        d_scattering: d_sca,
        d_reemission: d_re,
        absorption_ratio: d_abs / d_cav,
        scattering_ratio: d_sca / d_cav,
        reemission_ratio: d_re / d_cav,
        inflation: (d_cav + d_abs + d_sca) / d_cav,
    })
}

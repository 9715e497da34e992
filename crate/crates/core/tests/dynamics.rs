use cavcool::coefficients::{cooling_limit_fokker_planck, fp_averaged, fp_local_diffusion};
use cavcool::langevin::{run_ensemble, InitialState, SimulationConfig};
use std::f64::consts::PI;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

fn reference() -> SimulationConfig {
    let mut c = SimulationConfig::single_mode(1e-3, INV_SQRT3, 0.1).unwrap();
    c.dt = 20.0;
    c.phase_step = 0.5;
    c
}

/// RK4 of dp/dt = averaged force at kv = p/m.
fn averaged_trajectory(p0: f64, mass: f64, times: &[f64]) -> Vec<f64> {
    let force = |p: f64| fp_averaged(p / mass, 1.0, INV_SQRT3, 0.01).force;
    let h: f64 = 10.0;
    let mut p = p0;
    let mut t = 0.0;
    times
        .iter()
        .map(|&target| {
            while t < target {
                let s = h.min(target - t);
                let k1 = force(p);
                let k2 = force(p + 0.5 * s * k1);
                let k3 = force(p + 0.5 * s * k2);
                let k4 = force(p + s * k3);
                p += s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += s;
            }
            p
        })
        .collect()
}

#[test]
fn half_kappa_start_follows_the_averaged_force() {
    let mut c = reference();
    let mass = c.particle.mass;
    c.initial = InitialState { p: 0.5 * mass, x: None };
    c.trajectories = 300;
    c.t_end = 1e5;
    c.samples = 10;
    let s = run_ensemble(&c).unwrap();
    let expected = averaged_trajectory(0.5 * mass, mass, &s.times);
    for (i, t) in s.times.iter().enumerate() {
        // Diffusion adds ~sqrt(D t) spread; the mean follows the drift.
        let sem = (s.var_p[i] / 300.0).sqrt();
        let dev = (s.mean_p[i] - expected[i]).abs();
        assert!(dev < 4.0 * sem + 0.02 * expected[i].abs(), "t = {t}: {} vs {}", s.mean_p[i], expected[i]);
    }
    assert!(s.kinetic.windows(2).all(|w| w[1] < w[0]), "energy decays while fast");
}

#[test]
fn clamped_fraction_tracks_the_negative_diffusion_region() {
    // Over a short run the velocity barely changes, so the share of clamped
    // time should equal the share of positions where the local diffusion of
    // the averaged closed form is negative at that velocity.
    for kv in [0.1, 0.25, 0.5] {
        let mut c = reference();
        c.initial = InitialState { p: kv * c.particle.mass, x: None };
        c.trajectories = 64;
        c.t_end = 200.0;
        c.samples = 2;
        let s = run_ensemble(&c).unwrap();
        let n = 100_000;
        let negative = (0..n)
            .filter(|i| fp_local_diffusion(PI * *i as f64 / n as f64, kv, 1.0, INV_SQRT3, 0.01) < 0.0)
            .count() as f64
            / n as f64;
        assert!(
            (s.clamped_time_fraction - negative).abs() < 0.01,
            "kv {kv}: clamped {} vs negative share {negative}",
            s.clamped_time_fraction
        );
    }
}

#[test]
fn halving_the_step_leaves_the_energy_unchanged() {
    let mut coarse = reference();
    coarse.initial = InitialState { p: 0.25 * coarse.particle.mass, x: None };
    coarse.trajectories = 10_000;
    coarse.t_end = 2000.0;
    coarse.samples = 4;
    coarse.dt = 4.0;
    coarse.phase_step = 0.5;
    let mut fine = coarse.clone();
    fine.dt = 2.0;
    fine.phase_step = 0.25;
    fine.seed = 2;
    let a = run_ensemble(&coarse).unwrap();
    let b = run_ensemble(&fine).unwrap();
    let last = a.kinetic.len() - 1;
    let diff = (a.kinetic[last] - b.kinetic[last]).abs();
    // The runs use independent streams, so the difference carries the
    // combined standard error of both.
    let se = a.kinetic_sem[last].hypot(b.kinetic_sem[last]);
    assert!(diff < 3.0 * se, "diff {diff} vs combined sem {se}");
}

#[test]
fn steady_state_does_not_depend_on_start_position() {
    let limit = cooling_limit_fokker_planck(1.0, INV_SQRT3).unwrap();
    let mut results = Vec::new();
    for x0 in [0.3, 0.25 * PI, 2.0] {
        let mut c = reference();
        c.initial = InitialState { p: 0.0, x: Some(x0) };
        c.trajectories = 1000;
        c.t_end = 4e5;
        c.samples = 100;
        c.seed = 5;
        let s = run_ensemble(&c).unwrap();
        results.push((s.steady_kinetic, s.steady_kinetic_sem));
    }
    for (e, se) in &results[1..] {
        let (e0, se0) = results[0];
        assert!((e - e0).abs() < 3.0 * se.hypot(se0), "{results:?}");
    }
    for (e, _) in &results {
        assert!((e / limit - 1.0).abs() < 0.15, "{results:?} vs {limit}");
    }
}

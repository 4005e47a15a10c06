use std::sync::Arc;

use delaystab::models::{build_elasticity, build_scalar, build_wave, compute_energy, ElasticityModelConfig, Region, WaveModelConfig, INITIAL_DATA_VARIABLES};
use delaystab::semigroup::spectral_abscissa;
use delaystab::solver::{solve_method_of_steps, SolverConfig};
use delaystab::{DelayFunction, Expr, GainFunction, HistorySegment, State};
use nalgebra::dvector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expr(s: &str) -> Expr {
    Expr::parse(s, &INITIAL_DATA_VARIABLES).unwrap()
}

fn wave(n: usize, gain: f64, damping_region: Region, displacement: &str) -> WaveModelConfig {
    WaveModelConfig {
        lengths: vec![1.0],
        interior_nodes: vec![n],
        damping: 1.0,
        damping_region,
        delay_region: Region::interval(0.3, 0.6),
        wave_speed: 1.0,
        gain: GainFunction::constant(gain).unwrap(),
        delay: DelayFunction::expression(Expr::of_time("0.5 + 0.4*sin(t)*sin(t)").unwrap(), 0.9, 0.5).unwrap(),
        displacement: vec![expr(displacement)],
        velocity: vec![expr("0")],
        history_nodes: 4,
    }
}

fn elasticity_2d(displacement: [&str; 2]) -> ElasticityModelConfig {
    ElasticityModelConfig {
        base: WaveModelConfig {
            lengths: vec![1.0, 1.0],
            interior_nodes: vec![4, 4],
            damping_region: Region::rectangle((0.0, 0.0), (1.0, 1.0)),
            delay_region: Region::rectangle((0.2, 0.2), (0.7, 0.7)),
            displacement: displacement.iter().map(|s| expr(s)).collect(),
            velocity: vec![expr("0"), expr("0")],
            ..wave(4, 0.05, Region::interval(0.0, 1.0), "0")
        },
        lambda: 1.0,
        mu: 1.0,
    }
}

#[test]
fn scalar_model_certificate_and_undelayed_flow() {
    let h = HistorySegment::constant(1.0, dvector![2.0]).unwrap();
    let p = build_scalar(1.0, 1.0, GainFunction::constant(0.3).unwrap(), DelayFunction::constant(1.0).unwrap(), h.clone()).unwrap();
    let cert = p.certificate().unwrap();
    assert_eq!((cert.m, cert.omega), (1.0, 1.0));
    let p = Arc::new(build_scalar(2.0, 0.0, GainFunction::constant(0.3).unwrap(), DelayFunction::constant(1.0).unwrap(), h).unwrap());
    let tr = solve_method_of_steps(&p, 3.0, &SolverConfig::with_dt(1e-3)).unwrap();
    for (t, u) in tr.grid().iter().zip(tr.states()) {
        assert!((u[0] - 2.0 * (-2.0 * t).exp()).abs() < 1e-10);
    }
    assert!(build_scalar(-1.0, 1.0, GainFunction::zero(), DelayFunction::constant(1.0).unwrap(), HistorySegment::constant(1.0, dvector![1.0]).unwrap()).is_err());
}

#[test]
fn zero_data_stays_zero() {
    let models = [
        build_wave(&wave(20, 0.05, Region::interval(0.2, 0.8), "0")).unwrap(),
        build_elasticity(&elasticity_2d(["0", "0"])).unwrap(),
    ];
    for model in models {
        let p = Arc::new(model.problem);
        let tr = solve_method_of_steps(&p, 2.0, &SolverConfig::with_dt(0.01)).unwrap();
        assert!(tr.states().iter().all(|s| s.iter().all(|x| *x == 0.0)));
        let e = compute_energy(&tr, &model.layout, tr.grid()).unwrap();
        assert!(e.total.iter().all(|x| *x == 0.0));
    }
}

#[test]
fn feedback_never_increases_the_energy_norm() {
    let model = build_wave(&wave(30, 0.05, Region::interval(0.2, 0.8), "sin(pi*x)")).unwrap();
    let g = model.problem.generator();
    let b = model.problem.feedback();
    assert_eq!(b.norm(), 1.0);
    let dim = g.dim();
    for i in 0..dim {
        let e = State::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 });
        assert!(g.norm(&(b.matrix() * &e)) <= g.norm(&e) * (1.0 + 1e-12));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let v = State::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        assert!(g.norm(&(b.matrix() * &v)) <= g.norm(&v) * (1.0 + 1e-12));
    }
    assert!(g.operator_norm(b.matrix()) <= 1.0 + 1e-12);
}

#[test]
fn energy_without_feedback_is_half_the_squared_norm() {
    let model = build_wave(&wave(20, 0.0, Region::interval(0.2, 0.8), "sin(pi*x)")).unwrap();
    let p = Arc::new(model.problem);
    let tr = solve_method_of_steps(&p, 3.0, &SolverConfig::with_dt(0.01)).unwrap();
    let e = compute_energy(&tr, &model.layout, tr.grid()).unwrap();
    for (total, n) in e.total.iter().zip(tr.norms()) {
        assert!((total - 0.5 * n * n).abs() <= 1e-13 * (1.0 + total));
    }
    assert!(e.window.iter().all(|w| *w == 0.0));
}

#[test]
fn fully_damped_mode_loses_energy() {
    let model = build_wave(&wave(30, 0.0, Region::interval(0.0, 1.0), "sin(pi*x)")).unwrap();
    let p = Arc::new(model.problem);
    let tr = solve_method_of_steps(&p, 10.0, &SolverConfig::with_dt(0.005)).unwrap();
    let e = compute_energy(&tr, &model.layout, tr.grid()).unwrap();
    for w in e.total.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    assert!(e.total.last().unwrap() < &(1e-3 * e.total[0]));
    // With damping on the whole domain the discrete generator has abscissa -a/2 or above.
    let abscissa = spectral_abscissa(p.generator().matrix());
    assert!((-0.5 - 1e-9..0.0).contains(&abscissa));
}

#[test]
fn energy_is_bounded_by_norm_plus_window() {
    let model = build_wave(&wave(20, 0.05, Region::interval(0.2, 0.8), "sin(pi*x)")).unwrap();
    let p = Arc::new(model.problem);
    let tr = solve_method_of_steps(&p, 8.0, &SolverConfig::with_dt(0.005)).unwrap();
    let times: Vec<f64> = (0..=16).map(|i| i as f64 * 0.5).collect();
    let e = compute_energy(&tr, &model.layout, &times).unwrap();
    for (i, t) in times.iter().enumerate() {
        let n = p.generator().norm(&tr.eval(*t).unwrap());
        assert!(e.window[i] >= 0.0 && e.kinetic[i] >= 0.0 && e.potential[i] >= 0.0);
        assert!((e.kinetic[i] + e.potential[i] - 0.5 * n * n).abs() <= 1e-12 * (1.0 + n * n));
    }
}

#[test]
fn two_dimensional_elasticity_generator_is_stable() {
    let model = build_elasticity(&elasticity_2d(["x*(1-x)*y*(1-y)", "0"])).unwrap();
    let a = model.problem.generator().matrix();
    assert_eq!(a.nrows(), 2 * 2 * 16);
    for z in a.complex_eigenvalues().iter() {
        assert!(z.re < 0.0, "eigenvalue {z}");
    }
}

#[test]
fn invalid_models_are_rejected() {
    let mut cfg = wave(10, 0.0, Region::interval(0.2, 0.8), "0");
    cfg.damping = -1.0;
    assert!(build_wave(&cfg).is_err());
    let mut cfg = wave(10, 0.0, Region::interval(0.2, 0.8), "0");
    cfg.delay_region = Region::interval(0.41, 0.42);
    assert!(build_wave(&cfg).is_err());
    let mut cfg = elasticity_2d(["0", "0"]);
    cfg.lambda = 0.0;
    assert!(build_elasticity(&cfg).is_err());
    let mut cfg = elasticity_2d(["0", "0"]);
    cfg.base.displacement.pop();
    assert!(build_elasticity(&cfg).is_err());
}

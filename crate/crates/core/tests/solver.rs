mod common;

use std::sync::Arc;

use delaystab::oracle::{max_relative_deviation, oracle_solve};
use delaystab::semigroup::apply_semigroup;
use delaystab::solver::{duhamel_residual, solve, solve_method_of_steps, solve_picard, Method, SolverConfig};
use delaystab::{
    DelayFunction, DelayProblem, Error, Expr, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment, Nonlinearity, State,
};
use nalgebra::{dmatrix, dvector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vanishing_benchmark() -> Arc<DelayProblem> {
    let base = common::scalar_benchmark(0.3, 1.0);
    let delay = DelayFunction::expression(Expr::of_time("abs(sin(t))").unwrap(), 1.0, 0.0).unwrap();
    let p = DelayProblem::new(
        base.generator().clone(),
        base.feedback().clone(),
        base.gain().clone(),
        delay,
        base.history().clone(),
    )
    .unwrap()
    .with_certificate(base.certificate().unwrap().clone());
    Arc::new(p)
}

#[test]
fn zero_gain_follows_the_semigroup() {
    let p = Arc::new(common::scalar_benchmark(0.0, 0.5));
    let tr = solve_method_of_steps(&p, 3.0, &SolverConfig::with_dt(1e-3)).unwrap();
    for (t, u) in tr.grid().iter().zip(tr.states()) {
        let s = apply_semigroup(p.generator(), *t, p.initial_state()).unwrap();
        assert!((u - s).norm() < 1e-8);
    }
    let (tp, diag) = solve_picard(&p, 3.0, &SolverConfig::with_dt(1e-3)).unwrap();
    let diag = diag.windows;
    assert_eq!(diag.len(), 1);
    assert_eq!((diag[0].start, diag[0].end, diag[0].iterations), (0.0, 3.0, 1));
    assert_eq!(tp.states(), tr.states());
}

#[test]
fn first_interval_with_pure_feedback() {
    let g = GeneratorOperator::with_identity_metric(dmatrix![0.0]).unwrap();
    let fb = FeedbackOperator::new(dmatrix![1.0], &g).unwrap();
    let h = HistorySegment::constant(1.0, dvector![3.0]).unwrap();
    let p = Arc::new(DelayProblem::new(g, fb, GainFunction::constant(0.4).unwrap(), DelayFunction::constant(1.0).unwrap(), h).unwrap());
    let tr = solve_method_of_steps(&p, 1.0, &SolverConfig::with_dt(0.01)).unwrap();
    for (t, u) in tr.grid().iter().zip(tr.states()) {
        assert!((u[0] - 3.0 * (1.0 + 0.4 * t)).abs() < 1e-12);
    }
}

#[test]
fn scalar_benchmark_matches_oracle() {
    let p = Arc::new(common::scalar_benchmark(0.3, 1.0));
    let tr = solve_method_of_steps(&p, 10.0, &SolverConfig::with_dt(1e-3)).unwrap();
    let reference = oracle_solve(&p, 10.0, 1e-3 / 16.0).unwrap();
    assert!(max_relative_deviation(&tr, &reference).unwrap() < 1e-6);
}

#[test]
fn vanishing_delay_picard_matches_oracle() {
    let p = vanishing_benchmark();
    let (tr, diag) = solve_picard(&p, 10.0, &SolverConfig::with_dt(1e-3)).unwrap();
    let reference = oracle_solve(&p, 10.0, 1e-3 / 16.0).unwrap();
    assert!(max_relative_deviation(&tr, &reference).unwrap() < 1e-6);
    assert!(diag.windows.iter().all(|w| w.theoretical_factor <= 0.5));
    assert!(matches!(solve_method_of_steps(&p, 1.0, &SolverConfig::with_dt(1e-3)), Err(Error::Precondition(_))));
    let (auto, d) = solve(&p, 1.0, &SolverConfig::with_dt(1e-3), Method::Auto).unwrap();
    assert!(d.is_some());
    assert_eq!(auto.final_time(), 1.0);
}

#[test]
fn methods_agree_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SolverConfig::with_dt(0.01);
    for _ in 0..3 {
        let p = common::random_problem_with_lower_delay(&mut rng, 0.2, 4.0);
        let a = solve_method_of_steps(&p, 4.0, &cfg).unwrap();
        let (b, _) = solve_picard(&p, 4.0, &cfg).unwrap();
        let gap = a.states().iter().zip(b.states()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-8);
    }
}

#[test]
fn nonlinear_problem_agrees_across_methods() {
    let p = Arc::new(common::scalar_benchmark(0.3, 1.0).with_nonlinearity(Nonlinearity::saturation(0.4).unwrap()).unwrap());
    let cfg = SolverConfig::with_dt(1e-3);
    let a = solve_method_of_steps(&p, 6.0, &cfg).unwrap();
    let (b, diag) = solve_picard(&p, 6.0, &cfg).unwrap();
    let gap = a.states().iter().zip(b.states()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-9);
    for w in &diag.windows {
        assert!(w.theoretical_factor <= 0.5);
        if let Some(e) = w.empirical_factor {
            assert!(e <= w.theoretical_factor + 0.05);
        }
    }
    let reference = oracle_solve(&p, 6.0, 1e-3 / 16.0).unwrap();
    assert!(max_relative_deviation(&a, &reference).unwrap() < 1e-6);
}

#[test]
fn solves_are_deterministic() {
    let p = vanishing_benchmark();
    let cfg = SolverConfig::with_dt(5e-3);
    let (a, _) = solve_picard(&p, 5.0, &cfg).unwrap();
    let (b, _) = solve_picard(&p, 5.0, &cfg).unwrap();
    let bits = |t: &delaystab::Trajectory| t.states().iter().flat_map(|s| s.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn gain_spike_is_a_window_error() {
    let base = common::scalar_benchmark(0.3, 1.0);
    let spike = GainFunction::piecewise_constant(vec![1.0, 1.001], vec![0.1, 5000.0, 0.1]).unwrap();
    let p = Arc::new(base.with_gain(spike));
    match solve_picard(&p, 3.0, &SolverConfig::with_dt(1e-3)) {
        Err(Error::Window { start, .. }) => assert!((start - 1.0).abs() < 1e-9),
        other => panic!("expected a window error, got {other:?}"),
    }
}

#[test]
fn iteration_cap_is_a_convergence_error() {
    let p = vanishing_benchmark();
    let cfg = SolverConfig { picard_max_iterations: 2, ..SolverConfig::with_dt(1e-2) };
    assert!(matches!(solve_picard(&p, 5.0, &cfg), Err(Error::Convergence { .. })));
}

#[test]
fn breakpoints_are_grid_nodes() {
    let base = common::scalar_benchmark(0.3, 1.0);
    let k = GainFunction::piecewise_constant(vec![0.1234, 2.6513], vec![0.0, 0.5, -0.2]).unwrap();
    let p = Arc::new(base.with_gain(k));
    let tr = solve_method_of_steps(&p, 4.0, &SolverConfig::with_dt(0.01)).unwrap();
    assert!(tr.grid().contains(&0.1234) && tr.grid().contains(&2.6513));
}

#[test]
fn residual_of_exact_flow_is_tiny() {
    let p = Arc::new(common::scalar_benchmark(0.0, 1.0));
    let tr = solve_method_of_steps(&p, 3.0, &SolverConfig::with_dt(1e-3)).unwrap();
    assert!(duhamel_residual(&tr, &[0.5, 1.0, 2.0, 3.0]).unwrap() < 1e-10);
}

#[test]
fn residual_decays_at_least_quadratically() {
    let p = Arc::new(common::scalar_benchmark(0.3, 1.0));
    let times = [1.5, 3.0, 4.5, 6.0];
    let r = |dt: f64| duhamel_residual(&solve_method_of_steps(&p, 6.0, &SolverConfig::with_dt(dt)).unwrap(), &times).unwrap();
    let (r1, r2) = (r(0.02), r(0.01));
    let ratio = r1 / r2;
    assert!(ratio >= 3.5, "ratio {ratio} ({r1:e}, {r2:e})");
}

#[test]
fn residual_detects_a_corrupted_node() {
    let p = Arc::new(common::scalar_benchmark(0.3, 1.0));
    let tr = solve_method_of_steps(&p, 4.0, &SolverConfig::with_dt(0.01)).unwrap();
    let i = 250;
    let eps = 1e-3;
    let bad = tr.with_perturbed_node(i, &State::from_element(1, eps)).unwrap();
    let t = tr.grid()[i];
    assert!(duhamel_residual(&bad, &[t]).unwrap() >= eps / 2.0);
}

mod common;

use std::sync::Arc;

use delaystab::solver::{solve_method_of_steps, SolverConfig};
use delaystab::{
    DelayFunction, DelayProblem, Error, Expr, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment, Interpolation,
    Trajectory,
};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;

fn generator() -> GeneratorOperator {
    GeneratorOperator::new(dmatrix![-1.0, 2.0; 0.0, -3.0], dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap()
}

fn smooth_history() -> HistorySegment {
    HistorySegment::from_fn(1.5, 31, Interpolation::CubicHermite, |t| dvector![t.cos(), (2.0 * t).sin()]).unwrap()
}

#[test]
fn trajectory_reproduces_history_exactly() {
    let g = generator();
    let fb = FeedbackOperator::new(DMatrix::identity(2, 2) * 0.2, &g).unwrap();
    let p = Arc::new(
        DelayProblem::new(g, fb, GainFunction::constant(1.0).unwrap(), DelayFunction::constant(1.5).unwrap(), smooth_history()).unwrap(),
    );
    let tr = solve_method_of_steps(&p, 3.0, &SolverConfig::with_dt(0.01)).unwrap();
    for i in 0..=300 {
        let s = -1.5 * i as f64 / 300.0;
        let a = tr.eval(s).unwrap();
        let b = p.history().eval(s).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert!(matches!(tr.eval(-1.6), Err(Error::Domain { .. })));
    assert!(matches!(tr.eval(3.1), Err(Error::Domain { .. })));
    assert_eq!(tr.eval(0.0).unwrap(), *p.initial_state());
}

#[test]
fn problem_construction_checks_consistency() {
    let g = generator();
    let fb = FeedbackOperator::new(DMatrix::identity(2, 2), &g).unwrap();
    let k = GainFunction::constant(0.1).unwrap();
    let short = HistorySegment::constant(1.0, dvector![1.0, 0.0]).unwrap();
    assert!(DelayProblem::new(g.clone(), fb.clone(), k.clone(), DelayFunction::constant(1.5).unwrap(), short).is_err());
    let wrong_dim = HistorySegment::constant(1.5, dvector![1.0]).unwrap();
    assert!(DelayProblem::new(g.clone(), fb.clone(), k.clone(), DelayFunction::constant(1.5).unwrap(), wrong_dim).is_err());
    assert!(FeedbackOperator::new(DMatrix::identity(3, 3), &g).is_err());
    assert!(GeneratorOperator::new(dmatrix![-1.0], dmatrix![-1.0]).is_err());
    assert!(GeneratorOperator::new(dmatrix![-1.0, 0.0; 0.0, -1.0], dmatrix![1.0, 2.0; 0.0, 1.0]).is_err());
    assert!(GainFunction::constant(f64::NAN).is_err());
    assert!(DelayFunction::constant(-1.0).is_err());
    let bad_delay = DelayFunction::expression(Expr::of_time("2 + sin(t)").unwrap(), 1.5, 0.0).unwrap();
    assert!(bad_delay.eval(1.0).is_err());
}

#[test]
fn trajectory_rejects_inconsistent_data() {
    let p = Arc::new(common::scalar_benchmark(0.3, 1.0));
    assert!(Trajectory::new(p.clone(), vec![0.0, 1.0], vec![dvector![1.0], dvector![0.5]]).is_ok());
    assert!(Trajectory::new(p.clone(), vec![0.0, 1.0], vec![dvector![2.0], dvector![0.5]]).is_err());
    assert!(Trajectory::new(p.clone(), vec![0.0, 0.0], vec![dvector![1.0], dvector![0.5]]).is_err());
    assert!(Trajectory::new(p.clone(), vec![0.1, 1.0], vec![dvector![1.0], dvector![0.5]]).is_err());
    assert!(Trajectory::new(p, vec![0.0, 1.0], vec![dvector![1.0]]).is_err());
}

proptest! {
    #[test]
    fn metric_norm_is_a_norm(x in prop::collection::vec(-10.0..10.0f64, 2), y in prop::collection::vec(-10.0..10.0f64, 2), c in -5.0..5.0f64) {
        let g = generator();
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let n = |v: &DVector<f64>| g.metric_norm(v).unwrap();
        prop_assert!(n(&(&x + &y)) <= n(&x) + n(&y) + 1e-12);
        prop_assert!((n(&(&x * c)) - c.abs() * n(&x)).abs() <= 1e-12 * (1.0 + n(&x)));
        let quadratic = x.dot(&(g.metric() * &x));
        prop_assert!((n(&x).powi(2) - quadratic).abs() <= 1e-10 * (1.0 + quadratic));
    }

    #[test]
    fn history_interpolation_hits_nodes(i in 0usize..31) {
        let h = smooth_history();
        let t = h.grid()[i];
        prop_assert_eq!(h.eval(t).unwrap(), h.values()[i].clone());
    }
}

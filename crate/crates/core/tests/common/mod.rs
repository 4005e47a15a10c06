#![allow(dead_code)]

use std::sync::Arc;

use delaystab::models::build_scalar;
use delaystab::{
    estimate_certificate, DelayFunction, DelayProblem, Expr, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment,
    Interpolation, State,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `u' = -u + k₀ u(t - τ)` with `f ≡ 1`.
pub fn scalar_benchmark(k0: f64, tau: f64) -> DelayProblem {
    build_scalar(
        1.0,
        1.0,
        GainFunction::constant(k0).unwrap(),
        DelayFunction::constant(tau).unwrap(),
        HistorySegment::constant(tau, DVector::from_element(1, 1.0)).unwrap(),
    )
    .unwrap()
}

type Poly = Vec<f64>;

fn peval(p: &Poly, s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn antiderivative(p: &Poly) -> Poly {
    let mut out = vec![0.0];
    out.extend(p.iter().enumerate().map(|(i, c)| c / (i as f64 + 1.0)));
    out
}

// R with (R eˢ)' = Q eˢ: R = Q - Q' + Q'' - ...
fn exp_antiderivative(q: &Poly) -> Poly {
    let mut r = vec![0.0; q.len()];
    let mut d = q.clone();
    let mut sign = 1.0;
    while !d.is_empty() {
        for (i, c) in d.iter().enumerate() {
            r[i] += sign * c;
        }
        d = d.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        sign = -sign;
    }
    r
}

/// Closed form of `u' = -u + c u(t - 1)`, `f ≡ 1`, built interval by interval:
/// with `u = e^{-t} w`, `w' = c e w(t - 1)`, and on `[m, m+1]`, `w = P(s) + Q(s) eˢ`, `s = t - m`.
pub struct ExactUnitDelay {
    pieces: Vec<(Poly, Poly)>,
}

impl ExactUnitDelay {
    pub fn new(c: f64, t_max: f64) -> Self {
        let e = std::f64::consts::E;
        let mut pieces = Vec::new();
        let (mut p, mut q): (Poly, Poly) = (vec![0.0], vec![1.0 / e]);
        for _ in 0..=(t_max.ceil() as usize) {
            let w1 = peval(&p, 1.0) + peval(&q, 1.0) * e;
            let r = exp_antiderivative(&q);
            let mut np: Poly = antiderivative(&p).iter().map(|x| x * c * e).collect();
            np[0] += w1 - c * e * peval(&r, 0.0);
            let nq: Poly = r.iter().map(|x| x * c * e).collect();
            pieces.push((np.clone(), nq.clone()));
            p = np;
            q = nq;
        }
        ExactUnitDelay { pieces }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let m = (t.floor() as usize).min(self.pieces.len() - 1);
        let s = t - m as f64;
        let (p, q) = &self.pieces[m];
        (-t).exp() * (peval(p, s) + peval(q, s) * s.exp())
    }
}

/// Stable `A = T D T⁻¹` with `D` made of damped rotation blocks.
pub fn random_stable_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(dim, dim);
    let mut i = 0;
    while i < dim {
        let alpha = rng.random_range(0.3..2.0);
        if i + 1 < dim && rng.random_bool(0.6) {
            let beta = rng.random_range(0.2..3.0);
            d[(i, i)] = -alpha;
            d[(i + 1, i + 1)] = -alpha;
            d[(i, i + 1)] = beta;
            d[(i + 1, i)] = -beta;
            i += 2;
        } else {
            d[(i, i)] = -alpha;
            i += 1;
        }
    }
    let t = DMatrix::identity(dim, dim) + DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.25..0.25));
    let inv = t.clone().try_inverse().unwrap();
    t * d * inv
}

/// Random `B` with metric norm one.
pub fn random_feedback(rng: &mut ChaCha8Rng, g: &GeneratorOperator) -> FeedbackOperator {
    let n = g.dim();
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let scale = g.operator_norm(&raw);
    FeedbackOperator::new(raw / scale, g).unwrap()
}

/// Smooth random history on `[-τ̄, 0]`.
pub fn random_history(rng: &mut ChaCha8Rng, dim: usize, tau_bar: f64) -> HistorySegment {
    let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..3.0)).collect();
    HistorySegment::from_fn(tau_bar, 65, Interpolation::Linear, |t| {
        State::from_fn(dim, |i, _| a[i] + b[i] * (c[i] * t).cos())
    })
    .unwrap()
}

/// `τ(t) = τ₀ + (τ̄ - τ₀) sin²(νt + φ)`.
pub fn oscillating_delay(rng: &mut ChaCha8Rng, tau0: f64, tau_bar: f64) -> DelayFunction {
    let nu = rng.random_range(0.3..2.0);
    let phi = rng.random_range(0.0..3.0);
    let src = format!("{tau0} + {} * sin({nu} * t + {phi}) * sin({nu} * t + {phi})", tau_bar - tau0);
    DelayFunction::expression(Expr::of_time(&src).unwrap(), tau_bar, tau0).unwrap()
}

/// Piecewise-constant gain with `jumps` random breakpoints in `(0, t_max)`.
pub fn random_piecewise_gain(rng: &mut ChaCha8Rng, jumps: usize, t_max: f64, amplitude: f64) -> GainFunction {
    let mut bps: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.05 * t_max..0.95 * t_max)).collect();
    bps.sort_by(f64::total_cmp);
    let values = (0..=jumps).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    GainFunction::piecewise_constant(bps, values).unwrap()
}

/// Random problem for the cross-method comparison: `τ ≥ τ₀`, dimension ≤ 8, certificate attached.
pub fn random_problem_with_lower_delay(rng: &mut ChaCha8Rng, tau0: f64, t_max: f64) -> Arc<DelayProblem> {
    let dim = rng.random_range(1..=8);
    let g = GeneratorOperator::with_identity_metric(random_stable_matrix(rng, dim)).unwrap();
    let cert = estimate_certificate(&g, 0.95, 64).unwrap();
    let fb = random_feedback(rng, &g);
    let tau_bar = rng.random_range(0.5..1.5);
    let delay = oscillating_delay(rng, tau0, tau_bar);
    let gain = random_piecewise_gain(rng, 3, t_max, 1.5);
    let history = random_history(rng, dim, tau_bar);
    Arc::new(DelayProblem::new(g, fb, gain, delay, history).unwrap().with_certificate(cert))
}

/// Random linear problem whose gain admits an all-time envelope with `ω' < ω`;
/// the delay may vanish.
pub fn random_admissible_problem(rng: &mut ChaCha8Rng, index: usize) -> Arc<DelayProblem> {
    let dim = rng.random_range(1..=6);
    let g = GeneratorOperator::with_identity_metric(random_stable_matrix(rng, dim)).unwrap();
    let cert = estimate_certificate(&g, 0.95, 64).unwrap();
    let fb = random_feedback(rng, &g);
    let tau_bar = rng.random_range(0.3..1.2);
    let delay = match index % 3 {
        0 => DelayFunction::constant(tau_bar).unwrap(),
        1 => oscillating_delay(rng, 0.0, tau_bar),
        _ => {
            let nu = rng.random_range(0.5..2.0);
            DelayFunction::expression(Expr::of_time(&format!("{tau_bar} * abs(sin({nu} * t))")).unwrap(), tau_bar, 0.0).unwrap()
        }
    };
    let c = cert.m * fb.norm() * (cert.omega * tau_bar).exp();
    let slope = rng.random_range(0.1..0.7) * cert.omega / c;
    let gain = match index % 4 {
        0 => GainFunction::constant(if rng.random_bool(0.5) { slope } else { -slope }).unwrap(),
        1 => {
            let t1 = rng.random_range(0.5..3.0);
            let t2 = t1 + rng.random_range(0.5..2.0);
            GainFunction::piecewise_constant(vec![t1, t2], vec![slope, -2.5 * slope, slope]).unwrap()
        }
        2 => {
            let nu = rng.random_range(0.5..2.0);
            let k0 = slope * std::f64::consts::PI / 2.0;
            GainFunction::expression(Expr::of_time(&format!("{k0} * abs(sin({nu} * t))")).unwrap(), Some(std::f64::consts::PI / nu))
                .unwrap()
        }
        _ => GainFunction::piecewise_linear(vec![0.0, 2.0, 4.0], vec![2.0 * slope, 0.0, slope]).unwrap(),
    };
    let history = random_history(rng, dim, tau_bar);
    Arc::new(DelayProblem::new(g, fb, gain, delay, history).unwrap().with_certificate(cert))
}

//! Fine-step reference integrator with cubic dense output.
//!
//! Written independently of [`crate::solver`]: its own step grid, RK4 stages and
//! delayed lookups, so agreement between the two is meaningful.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::types::{DelayProblem, NodeDerivatives, State, Trajectory};

const REFRESH_SWEEPS: usize = 2;

struct Dense {
    t: Vec<f64>,
    u: Vec<State>,
    // slopes at the left and right end of each completed step
    d0: Vec<State>,
    d1: Vec<State>,
}

fn hermite(t0: f64, t1: f64, u0: &State, u1: &State, d0: &State, d1: &State, s: f64) -> State {
    let h = t1 - t0;
    let x = (s - t0) / h;
    let x2 = x * x;
    let x3 = x2 * x;
    u0 * (2.0 * x3 - 3.0 * x2 + 1.0) + d0 * ((x3 - 2.0 * x2 + x) * h) + u1 * (3.0 * x2 - 2.0 * x3) + d1 * ((x3 - x2) * h)
}

impl Dense {
    fn completed(&self, s: f64) -> State {
        let last = self.t.len() - 1;
        if s >= self.t[last] {
            return self.u[last].clone();
        }
        let j = self.t.partition_point(|x| *x <= s).max(1) - 1;
        if s == self.t[j] {
            return self.u[j].clone();
        }
        hermite(self.t[j], self.t[j + 1], &self.u[j], &self.u[j + 1], &self.d0[j], &self.d1[j], s)
    }

    // The previous step's cubic continued past its right end.
    fn extrapolate(&self, s: f64) -> State {
        let n = self.t.len();
        if n < 2 {
            return self.u[0].clone();
        }
        let j = n - 2;
        hermite(self.t[j], self.t[j + 1], &self.u[j], &self.u[j + 1], &self.d0[j], &self.d1[j], s)
    }
}

/// Integrates `p` on `[0, t_final]` with RK4 steps of `dt_fine` (gain breakpoints inserted).
///
/// Delayed arguments inside the current step read a provisional cubic: first the extrapolated
/// previous step, then the step's own Hermite cubic, refreshed twice.
pub fn oracle_solve(p: &Arc<DelayProblem>, t_final: f64, dt_fine: f64) -> Result<Trajectory> {
    if !(t_final > 0.0 && dt_fine > 0.0) {
        return Err(invalid("oracle needs positive final time and step"));
    }
    let mut nodes: Vec<f64> = Vec::new();
    let n = (t_final / dt_fine).round().max(1.0) as usize;
    let uniform = (t_final / dt_fine - n as f64).abs() < 1e-9;
    let count = if uniform { n } else { (t_final / dt_fine).ceil() as usize };
    for i in 0..count {
        nodes.push(i as f64 * dt_fine);
    }
    nodes.push(t_final);
    for b in p.gain().breakpoints_in(0.0, t_final) {
        nodes.push(b);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-10 * dt_fine);

    let u0 = p.initial_state().clone();
    let mut dense = Dense { t: vec![0.0], u: vec![u0], d0: Vec::new(), d1: Vec::new() };
    let a = p.generator().matrix();
    let b = p.feedback().matrix();

    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = hi - lo;
        let u = dense.u.last().unwrap().clone();
        let mut provisional: Option<(State, State, State)> = None;
        let mut sweeps = 0;
        loop {
            let mut touched = false;
            let mut delayed = |t: f64| -> Result<State> {
                let s = t - p.delay().eval(t)?;
                if s <= 0.0 {
                    return p.history().eval(s);
                }
                if s <= lo {
                    return Ok(dense.completed(s));
                }
                touched = true;
                Ok(match &provisional {
                    None => dense.extrapolate(s),
                    Some((u1, d0, d1)) => hermite(lo, hi, &u, u1, d0, d1, s),
                })
            };
            let mut f = |t: f64, x: &State| -> Result<State> {
                let mut r = a * x;
                if let Some(g) = p.nonlinearity() {
                    r += g.apply(p.generator(), x);
                }
                let k = p.gain().eval_within(t, lo, hi);
                if k != 0.0 {
                    r += b * delayed(t)? * k;
                }
                Ok(r)
            };
            let k1 = f(lo, &u)?;
            let k2 = f(lo + 0.5 * h, &(&u + &k1 * (0.5 * h)))?;
            let k3 = f(lo + 0.5 * h, &(&u + &k2 * (0.5 * h)))?;
            let k4 = f(hi, &(&u + &k3 * h))?;
            let u1 = &u + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
            if u1.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { time: hi });
            }
            let d1 = f(hi, &u1)?;
            provisional = Some((u1, k1, d1));
            if !touched || sweeps == REFRESH_SWEEPS {
                break;
            }
            sweeps += 1;
        }
        let (u1, d0, d1) = provisional.unwrap();
        dense.t.push(hi);
        dense.u.push(u1);
        dense.d0.push(d0);
        dense.d1.push(d1);
    }

    let steps = dense.d0.len();
    let mut right = dense.d0.clone();
    right.push(dense.d1[steps - 1].clone());
    let mut left = vec![dense.d0[0].clone()];
    left.extend(dense.d1.iter().cloned());
    Trajectory::with_derivatives(Arc::clone(p), dense.t, dense.u, NodeDerivatives { left, right })
}

/// `max_t ‖U(t) - V(t)‖ / max(‖V(t)‖, 10⁻³ sup‖V‖)` over the nodes of `tr`, with `V` the reference.
pub fn max_relative_deviation(tr: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let g = reference.problem().generator();
    let floor = 1e-3 * reference.norms().into_iter().fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (t, u) in tr.grid().iter().zip(tr.states()) {
        if *t > reference.final_time() {
            return Err(invalid("reference trajectory is shorter than the compared one"));
        }
        let v = reference.eval(*t)?;
        let scale = g.norm(&v).max(floor);
        if scale > 0.0 {
            worst = worst.max(g.norm(&(u - &v)) / scale);
        }
    }
    Ok(worst)
}

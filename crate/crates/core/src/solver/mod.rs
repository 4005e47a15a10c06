//! Trajectory construction: forced RK4 stepping, method of steps and windowed Picard iteration.

mod picard;
mod residual;
mod steps;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use picard::{solve_picard, PicardDiagnostics, PicardWindow};
pub use residual::duhamel_residual;
pub use steps::solve_method_of_steps;

use crate::error::{invalid, Error, Result};
use crate::types::{interpolate, DelayProblem, GainFunction, GeneratorOperator, HistorySegment, Interpolation, Nonlinearity, State, Trajectory};
use std::sync::Arc;

/// Stepping scheme for the forced subproblem `U' = AU + G(U) + F(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Rk4Forced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub picard_tolerance: f64,
    pub picard_max_iterations: usize,
    /// Contraction budget θ for Picard windows.
    pub window_safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dt: 1e-3, scheme: Scheme::Rk4Forced, picard_tolerance: 1e-12, picard_max_iterations: 200, window_safety: 0.5 }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        SolverConfig { dt, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        if !(self.picard_tolerance > 0.0) || self.picard_max_iterations == 0 {
            return Err(invalid("picard tolerance and iteration cap must be positive"));
        }
        if !(self.window_safety > 0.0 && self.window_safety < 1.0) {
            return Err(invalid("window_safety must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Method selection for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Method of steps when the declared lower delay bound allows it, Picard otherwise.
    #[default]
    Auto,
    Steps,
    Picard,
}

/// Solves on `[0, t_final]`; diagnostics are present when Picard ran.
pub fn solve(p: &Arc<DelayProblem>, t_final: f64, cfg: &SolverConfig, method: Method) -> Result<(Trajectory, Option<PicardDiagnostics>)> {
    let steps = match method {
        Method::Steps => true,
        Method::Picard => false,
        Method::Auto => p.delay().lower_bound() >= 4.0 * cfg.dt,
    };
    if steps {
        Ok((solve_method_of_steps(p, t_final, cfg)?, None))
    } else {
        let (tr, d) = solve_picard(p, t_final, cfg)?;
        Ok((tr, Some(d)))
    }
}

/// Step grid `i·dt` on `[0, t_final]` with the gain breakpoints inserted.
pub(crate) fn step_grid(t_final: f64, dt: f64, gain: &GainFunction) -> Vec<f64> {
    let n = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    grid.push(t_final);
    let snap = 1e-9 * dt;
    for b in gain.breakpoints_in(0.0, t_final) {
        let i = grid.partition_point(|x| *x < b);
        let near = (i < grid.len() && grid[i] - b < snap) || (i > 0 && b - grid[i - 1] < snap);
        if !near {
            grid.insert(i, b);
        }
    }
    grid
}

/// Values already fixed: history on `[-τ̄, 0]` and accepted nodes on `[0, grid[last]]`.
pub(crate) struct Known<'a> {
    pub history: &'a HistorySegment,
    pub grid: &'a [f64],
    pub states: &'a [State],
}

impl Known<'_> {
    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn eval(&self, s: f64) -> Result<State> {
        if s <= 0.0 {
            return self.history.eval(s);
        }
        Ok(interpolate(self.grid, self.states, None, Interpolation::Linear, s.min(self.end())))
    }
}

/// One classical RK4 step of `u' = Au + G(u) + F(t)` over `[t, t + h]`.
pub(crate) fn rk4_step(
    a: &DMatrix<f64>,
    g: Option<&dyn Fn(&State) -> State>,
    forcing: &mut dyn FnMut(f64) -> Result<State>,
    t: f64,
    h: f64,
    u: &State,
) -> Result<State> {
    let rhs = |x: &State, f: State| -> State {
        let mut r = a * x + f;
        if let Some(g) = g {
            r += g(x);
        }
        r
    };
    let f0 = forcing(t)?;
    let fm = forcing(t + 0.5 * h)?;
    let f1 = forcing(t + h)?;
    let k1 = rhs(u, f0);
    let k2 = rhs(&(u + &k1 * (0.5 * h)), fm.clone());
    let k3 = rhs(&(u + &k2 * (0.5 * h)), fm);
    let k4 = rhs(&(u + &k3 * h), f1);
    let next = u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: t + h });
    }
    Ok(next)
}

/// Integrates `U' = AU + G(U) + F(t)` from `u0` at `t0` to `t1` with RK4 steps of about `cfg.dt`.
pub fn integrate_forced(
    g: &GeneratorOperator,
    nonlinearity: Option<&Nonlinearity>,
    forcing: &dyn Fn(f64) -> State,
    t0: f64,
    t1: f64,
    u0: &State,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Vec<State>)> {
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(invalid("integration interval must have t1 > t0"));
    }
    if u0.len() != g.dim() {
        return Err(Error::Dimension { expected: g.dim(), found: u0.len() });
    }
    let n = (((t1 - t0) / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let gmap = nonlinearity.map(|nl| move |x: &State| nl.apply(g, x));
    let gref = gmap.as_ref().map(|f| f as &dyn Fn(&State) -> State);
    let mut f = |t: f64| -> Result<State> {
        let v = forcing(t);
        if v.len() != g.dim() {
            return Err(Error::Dimension { expected: g.dim(), found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("forcing at t = {t}")));
        }
        Ok(v)
    };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t0);
    states.push(u0.clone());
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let next = rk4_step(g.matrix(), gref, &mut f, t, h, &states[i])?;
        times.push(if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h });
        states.push(next);
    }
    Ok((times, states))
}

/// `k(t) B U(t - τ(t))` for a step `[lo, hi]`, reading `U` through `lookup`.
pub(crate) fn delayed_forcing(
    p: &DelayProblem,
    t: f64,
    lo: f64,
    hi: f64,
    lookup: &mut dyn FnMut(f64) -> Result<State>,
) -> Result<State> {
    let k = p.gain().eval_within(t, lo, hi);
    if k == 0.0 {
        return Ok(State::zeros(p.dim()));
    }
    let s = t - p.delay().eval(t)?;
    Ok(p.feedback().matrix() * lookup(s)? * k)
}

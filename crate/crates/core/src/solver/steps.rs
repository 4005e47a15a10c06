use std::sync::Arc;

use super::{delayed_forcing, rk4_step, step_grid, Known, SolverConfig};
use crate::error::{Error, Result};
use crate::types::{DelayProblem, State, Trajectory};

/// Method of steps on windows of length at most `τ₀`, snapped to step nodes.
///
/// Inside a window `[a, b]` every delayed argument satisfies `t - τ(t) ≤ b - τ₀ ≤ a`,
/// so the delayed forcing only reads the history and already accepted nodes.
pub fn solve_method_of_steps(p: &Arc<DelayProblem>, t_final: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_final > 0.0) {
        return Err(Error::Precondition("final time must be positive".into()));
    }
    let tau0 = p.delay().lower_bound();
    if !(tau0 > 0.0) {
        return Err(Error::Precondition("method of steps needs a declared lower delay bound τ₀ > 0".into()));
    }
    if tau0 < 4.0 * cfg.dt {
        return Err(Error::Precondition(format!("τ₀ = {tau0} is shorter than four steps of dt = {}", cfg.dt)));
    }
    let grid = step_grid(t_final, cfg.dt, p.gain());
    let a_mat = p.generator().matrix();
    let gmap = p.nonlinearity().map(|nl| move |x: &State| nl.apply(p.generator(), x));
    let gref = gmap.as_ref().map(|f| f as &dyn Fn(&State) -> State);

    let mut states: Vec<State> = Vec::with_capacity(grid.len());
    states.push(p.initial_state().clone());
    let mut start = 0;
    while start + 1 < grid.len() {
        let a = grid[start];
        let limit = a + tau0 * (1.0 + 1e-12);
        let end = (grid.partition_point(|t| *t <= limit) - 1).max(start + 1);
        for i in start..end {
            let (lo, hi) = (grid[i], grid[i + 1]);
            let known = Known { history: p.history(), grid: &grid[..=start], states: &states[..=start] };
            let mut lookup = |s: f64| -> Result<State> {
                if s > a + 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::Invariant(format!(
                        "delayed argument {s} lies beyond the solved region ending at {a}"
                    )));
                }
                known.eval(s)
            };
            let mut forcing = |t: f64| delayed_forcing(p, t, lo, hi, &mut lookup);
            let next = rk4_step(a_mat, gref, &mut forcing, lo, hi - lo, &states[i])?;
            states.push(next);
        }
        start = end;
    }
    Trajectory::new(Arc::clone(p), grid, states)
}

use std::sync::Arc;

use serde::Serialize;

use super::{delayed_forcing, rk4_step, step_grid, Known, SolverConfig};
use crate::error::{Error, Result};
use crate::semigroup::estimate_certificate;
use crate::types::{interpolate, DelayProblem, Interpolation, State, Trajectory};

/// Per-window record of a Picard solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardWindow {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// Sup-norm distance between consecutive iterates.
    pub errors: Vec<f64>,
    /// Geometric mean of consecutive error ratios after the second iterate.
    pub empirical_factor: Option<f64>,
    /// `M (‖B‖ ∫|k| + L·len)` over the window.
    pub theoretical_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardDiagnostics {
    pub m: f64,
    pub windows: Vec<PicardWindow>,
}

impl PicardDiagnostics {
    pub fn total_iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations).sum()
    }
}

/// Windowed fixed-point construction: each window `[a, b]` is the longest run of steps with
/// `M (‖B‖ ∫ₐᵇ|k| + L (b - a)) ≤ θ`, and the iterate map re-solves the forced problem with
/// the delayed term read from the previous iterate.
pub fn solve_picard(p: &Arc<DelayProblem>, t_final: f64, cfg: &SolverConfig) -> Result<(Trajectory, PicardDiagnostics)> {
    cfg.validate()?;
    if !(t_final > 0.0) {
        return Err(Error::Precondition("final time must be positive".into()));
    }
    let m = match p.certificate() {
        Some(c) => c.m,
        None => estimate_certificate(p.generator(), 0.95, 64)?.m,
    };
    let grid = step_grid(t_final, cfg.dt, p.gain());
    let b_norm = p.feedback().norm();
    let lip = p.lipschitz();
    let cells: Vec<f64> = grid.windows(2).map(|w| p.gain().integral_abs(w[0], w[1])).collect();

    let mut states: Vec<State> = Vec::with_capacity(grid.len());
    states.push(p.initial_state().clone());
    let mut windows = Vec::new();
    let mut start = 0;
    let last = grid.len() - 1;
    while start < last {
        let mut end = start;
        let mut mass = 0.0;
        let mut factor = 0.0;
        while end < last {
            let mass_next = mass + cells[end];
            let f = m * (b_norm * mass_next + lip * (grid[end + 1] - grid[start]));
            if f > cfg.window_safety {
                break;
            }
            mass = mass_next;
            factor = f;
            end += 1;
        }
        if end == start || (end < last && end - start < 4) {
            return Err(Error::Window {
                start: grid[start],
                end: grid[(end + 1).min(last)],
                factor: m * (b_norm * (mass + cells[end.min(last - 1)]) + lip * (grid[(end + 1).min(last)] - grid[start])),
                budget: cfg.window_safety,
            });
        }
        let (window_states, record) = iterate_window(p, &grid, &states, start, end, mass, factor, cfg)?;
        states.extend(window_states.into_iter().skip(1));
        windows.push(record);
        start = end;
    }
    let tr = Trajectory::new(Arc::clone(p), grid, states)?;
    Ok((tr, PicardDiagnostics { m, windows }))
}

#[allow(clippy::too_many_arguments)]
fn iterate_window(
    p: &DelayProblem,
    grid: &[f64],
    accepted: &[State],
    start: usize,
    end: usize,
    mass: f64,
    factor: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<State>, PicardWindow)> {
    let a = grid[start];
    let wgrid = &grid[start..=end];
    let known = Known { history: p.history(), grid: &grid[..=start], states: &accepted[..=start] };
    let a_mat = p.generator().matrix();
    let gmap = p.nonlinearity().map(|nl| move |x: &State| nl.apply(p.generator(), x));
    let gref = gmap.as_ref().map(|f| f as &dyn Fn(&State) -> State);
    let u_a = accepted[start].clone();
    let slack = 1e-12 * (1.0 + a.abs());

    let mut prev: Vec<State> = vec![u_a.clone(); wgrid.len()];
    let mut errors = Vec::new();
    for iteration in 1..=cfg.picard_max_iterations {
        let mut next: Vec<State> = Vec::with_capacity(wgrid.len());
        next.push(u_a.clone());
        let mut reads_iterate = false;
        for i in 0..wgrid.len() - 1 {
            let (lo, hi) = (wgrid[i], wgrid[i + 1]);
            let mut lookup = |s: f64| -> Result<State> {
                if s <= a + slack {
                    known.eval(s.min(a))
                } else {
                    reads_iterate = true;
                    Ok(interpolate(wgrid, &prev, None, Interpolation::Linear, s))
                }
            };
            let mut forcing = |t: f64| delayed_forcing(p, t, lo, hi, &mut lookup);
            let u = rk4_step(a_mat, gref, &mut forcing, lo, hi - lo, &next[i])?;
            next.push(u);
        }
        let g = p.generator();
        let change = next.iter().zip(&prev).map(|(x, y)| g.norm(&(x - y))).fold(0.0, f64::max);
        errors.push(change);
        prev = next;
        // When no delayed lookup touched the iterate the map is constant and this iterate is its fixed point.
        if !reads_iterate || mass == 0.0 || change < cfg.picard_tolerance {
            let scale = prev.iter().map(|x| g.norm(x)).fold(0.0, f64::max);
            let record = PicardWindow {
                start: a,
                end: grid[end],
                iterations: iteration,
                empirical_factor: empirical_factor(&errors, scale),
                errors,
                theoretical_factor: factor,
            };
            return Ok((prev, record));
        }
    }
    Err(Error::Convergence {
        start: a,
        end: grid[end],
        iterations: cfg.picard_max_iterations,
        last_change: *errors.last().unwrap(),
    })
}

fn empirical_factor(errors: &[f64], scale: f64) -> Option<f64> {
    let floor = 64.0 * f64::EPSILON * (1.0 + scale);
    let mut log_sum = 0.0;
    let mut count = 0;
    for w in errors.windows(2).skip(1) {
        if w[0] > floor && w[1] > floor {
            log_sum += (w[1] / w[0]).ln();
            count += 1;
        }
    }
    (count > 0).then(|| (log_sum / count as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_skips_first_ratio_and_roundoff() {
        let e = [1.0, 0.9, 0.09, 0.009, 1e-17];
        let f = empirical_factor(&e, 1.0).unwrap();
        assert!((f - 0.1).abs() < 1e-12);
        assert_eq!(empirical_factor(&[1.0, 0.5], 1.0), None);
    }
}

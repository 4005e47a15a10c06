use std::sync::Arc;

use super::history::{interpolate, Interpolation, NodeDerivatives};
use super::operators::State;
use super::problem::DelayProblem;
use crate::error::{invalid, Error, Result};

/// Solution samples on `[0, T]` plus the problem's history on `[-τ̄, 0]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    problem: Arc<DelayProblem>,
    grid: Vec<f64>,
    states: Vec<State>,
    derivatives: Option<NodeDerivatives>,
    interpolation: Interpolation,
}

impl Trajectory {
    /// Linear interpolation between stored states.
    pub fn new(problem: Arc<DelayProblem>, grid: Vec<f64>, states: Vec<State>) -> Result<Self> {
        Self::build(problem, grid, states, None, Interpolation::Linear)
    }

    /// Cubic Hermite dense output from one-sided node derivatives.
    pub fn with_derivatives(
        problem: Arc<DelayProblem>,
        grid: Vec<f64>,
        states: Vec<State>,
        derivatives: NodeDerivatives,
    ) -> Result<Self> {
        if derivatives.left.len() != grid.len() || derivatives.right.len() != grid.len() {
            return Err(invalid("one left and one right derivative per node required"));
        }
        Self::build(problem, grid, states, Some(derivatives), Interpolation::CubicHermite)
    }

    fn build(
        problem: Arc<DelayProblem>,
        grid: Vec<f64>,
        states: Vec<State>,
        derivatives: Option<NodeDerivatives>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if grid.is_empty() || grid.len() != states.len() {
            return Err(invalid("trajectory needs one state per grid node"));
        }
        if grid[0] != 0.0 {
            return Err(invalid("trajectory grid must start at 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory grid must be strictly increasing"));
        }
        let n = problem.dim();
        if let Some(s) = states.iter().find(|s| s.len() != n) {
            return Err(Error::Dimension { expected: n, found: s.len() });
        }
        if &states[0] != problem.initial_state() {
            return Err(Error::Invariant("first state differs from the history value at 0".into()));
        }
        Ok(Trajectory { problem, grid, states, derivatives, interpolation })
    }

    pub fn problem(&self) -> &DelayProblem {
        &self.problem
    }

    pub fn problem_arc(&self) -> &Arc<DelayProblem> {
        &self.problem
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn final_time(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        if t <= 0.0 {
            return self.problem.history().eval(t);
        }
        let hi = self.final_time();
        if !(t <= hi) {
            return Err(Error::Domain { t, lo: -self.problem.tau_bar(), hi });
        }
        Ok(interpolate(&self.grid, &self.states, self.derivatives.as_ref(), self.interpolation, t))
    }

    /// Metric norms `‖U(t_i)‖_H` at every node.
    pub fn norms(&self) -> Vec<f64> {
        let g = self.problem.generator();
        self.states.iter().map(|s| g.norm(s)).collect()
    }

    /// Copy with node `index > 0` shifted by `delta`; used to probe residual checkers.
    pub fn with_perturbed_node(&self, index: usize, delta: &State) -> Result<Self> {
        if index == 0 || index >= self.states.len() {
            return Err(invalid("perturbed node must be an interior or final node"));
        }
        let mut out = self.clone();
        out.states[index] += delta;
        Ok(out)
    }
}

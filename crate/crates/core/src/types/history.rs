use serde::{Deserialize, Serialize};

use super::operators::State;
use crate::error::{invalid, Error, Result};

/// Rule used between stored nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    CubicHermite,
}

/// Initial data `f` on `[-τ̄, 0]`, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    grid: Vec<f64>,
    values: Vec<State>,
    interpolation: Interpolation,
}

impl HistorySegment {
    pub fn new(grid: Vec<f64>, values: Vec<State>, interpolation: Interpolation) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(invalid("history needs at least two nodes with one value each"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("history grid must be strictly increasing"));
        }
        if *grid.last().unwrap() != 0.0 {
            return Err(invalid("history grid must end at 0"));
        }
        if !(grid[0] < 0.0 && grid[0].is_finite()) {
            return Err(invalid("history grid must start at -τ̄ < 0"));
        }
        let n = values[0].len();
        if n == 0 {
            return Err(invalid("history states must be non-empty"));
        }
        if let Some(v) = values.iter().find(|v| v.len() != n) {
            return Err(Error::Dimension { expected: n, found: v.len() });
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("history value".into()));
        }
        Ok(HistorySegment { grid, values, interpolation })
    }

    /// `f ≡ value` on `[-τ̄, 0]`.
    pub fn constant(tau_bar: f64, value: State) -> Result<Self> {
        Self::new(vec![-tau_bar, 0.0], vec![value.clone(), value], Interpolation::Linear)
    }

    /// Samples `f` at `nodes` equally spaced points covering `[-τ̄, 0]`.
    pub fn from_fn(tau_bar: f64, nodes: usize, interpolation: Interpolation, f: impl Fn(f64) -> State) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("history needs at least two nodes"));
        }
        let m = (nodes - 1) as f64;
        let grid: Vec<f64> = (0..nodes)
            .map(|i| if i + 1 == nodes { 0.0 } else { -tau_bar + tau_bar * i as f64 / m })
            .collect();
        let values = grid.iter().map(|t| f(*t)).collect();
        Self::new(grid, values, interpolation)
    }

    pub fn span(&self) -> f64 {
        -self.grid[0]
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[State] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// `f(0) = U₀`.
    pub fn initial_state(&self) -> &State {
        self.values.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        let lo = self.grid[0];
        if !(t >= lo && t <= 0.0) {
            return Err(Error::Domain { t, lo, hi: 0.0 });
        }
        Ok(interpolate(&self.grid, &self.values, None, self.interpolation, t))
    }
}

/// Stored one-sided derivatives: cell `[t_i, t_{i+1}]` uses `right[i]` and `left[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDerivatives {
    pub left: Vec<State>,
    pub right: Vec<State>,
}

/// Interpolates at `t ∈ [grid[0], grid[last]]`; exact at nodes.
pub(crate) fn interpolate(
    grid: &[f64],
    values: &[State],
    derivs: Option<&NodeDerivatives>,
    rule: Interpolation,
    t: f64,
) -> State {
    let i = grid.partition_point(|x| *x <= t);
    if i == 0 {
        return values[0].clone();
    }
    if i == grid.len() || grid[i - 1] == t {
        return values[i - 1].clone();
    }
    let (t0, t1) = (grid[i - 1], grid[i]);
    let (v0, v1) = (&values[i - 1], &values[i]);
    let s = (t - t0) / (t1 - t0);
    match rule {
        Interpolation::Linear => v0 * (1.0 - s) + v1 * s,
        Interpolation::CubicHermite => {
            let (d0, d1) = match derivs {
                Some(d) => (d.right[i - 1].clone(), d.left[i].clone()),
                None => (fd_slope(grid, values, i - 1), fd_slope(grid, values, i)),
            };
            let h = t1 - t0;
            let s2 = s * s;
            let s3 = s2 * s;
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            v0 * h00 + d0 * (h10 * h) + v1 * h01 + d1 * (h11 * h)
        }
    }
}

// Second-order slope estimate on a non-uniform grid; one-sided secant at the ends.
fn fd_slope(grid: &[f64], values: &[State], i: usize) -> State {
    let n = grid.len();
    if i == 0 {
        return (&values[1] - &values[0]) / (grid[1] - grid[0]);
    }
    if i == n - 1 {
        return (&values[n - 1] - &values[n - 2]) / (grid[n - 1] - grid[n - 2]);
    }
    let hl = grid[i] - grid[i - 1];
    let hr = grid[i + 1] - grid[i];
    let sl = (&values[i] - &values[i - 1]) / hl;
    let sr = (&values[i + 1] - &values[i]) / hr;
    sl * (hr / (hl + hr)) + sr * (hl / (hl + hr))
}

//! Scalar time functions: the delay τ(t) and the feedback gain k(t).

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::quad::adaptive_simpson;

#[derive(Debug, Clone, PartialEq)]
pub enum DelayKind {
    Constant(f64),
    /// Piecewise-linear interpolation of `(times, values)`, held constant outside the knots.
    Grid { times: Vec<f64>, values: Vec<f64> },
    Expression(Expr),
}

/// A continuous delay `τ(t)` with declared bounds `τ₀ ≤ τ(t) ≤ τ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayFunction {
    kind: DelayKind,
    upper: f64,
    lower: f64,
}

impl DelayFunction {
    pub fn constant(tau: f64) -> Result<Self> {
        Self::new(DelayKind::Constant(tau), tau, tau)
    }

    pub fn grid(times: Vec<f64>, values: Vec<f64>, upper: f64, lower: f64) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("delay grid needs matching, non-empty times and values"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("delay grid times must be strictly increasing"));
        }
        let d = Self::new(DelayKind::Grid { times, values }, upper, lower)?;
        if let DelayKind::Grid { values, .. } = &d.kind {
            if let Some(v) = values.iter().find(|v| !(**v >= lower && **v <= upper)) {
                return Err(invalid(format!("delay grid value {v} outside [{lower}, {upper}]")));
            }
        }
        Ok(d)
    }

    pub fn expression(expr: Expr, upper: f64, lower: f64) -> Result<Self> {
        if expr.variables() != ["t"] {
            return Err(invalid("delay expression must be a function of t"));
        }
        Self::new(DelayKind::Expression(expr), upper, lower)
    }

    fn new(kind: DelayKind, upper: f64, lower: f64) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(invalid(format!("delay upper bound must be positive, got {upper}")));
        }
        if !(lower.is_finite() && lower >= 0.0 && lower <= upper) {
            return Err(invalid(format!("delay lower bound must lie in [0, {upper}], got {lower}")));
        }
        Ok(DelayFunction { kind, upper, lower })
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    /// τ̄
    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    /// τ₀ (zero when no positive lower bound is declared)
    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain { t, lo: 0.0, hi: f64::INFINITY });
        }
        let value = match &self.kind {
            DelayKind::Constant(c) => *c,
            DelayKind::Grid { times, values } => piecewise_linear(times, values, t),
            DelayKind::Expression(e) => e.eval1(t),
        };
        if !(value >= self.lower && value <= self.upper) {
            return Err(Error::DelayOutOfBounds { t, value, lower: self.lower, upper: self.upper });
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainKind {
    Constant(f64),
    /// `values[0]` before `breakpoints[0]`, `values[i]` on `[breakpoints[i-1], breakpoints[i])`,
    /// and the last value from the last breakpoint on.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Linear between knots, constant outside.
    PiecewiseLinear { times: Vec<f64>, values: Vec<f64> },
    /// Continuous closed form; `period` declares exact periodicity on `[0, ∞)`.
    Expression { expr: Expr, period: Option<f64> },
}

/// What is known about `k` beyond any finite horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainTail {
    /// `k(t) = value` for every `t ≥ from`.
    EventuallyConstant { from: f64, value: f64 },
    Periodic { period: f64 },
    Unknown,
}

/// Delay feedback coefficient `k(t)`, defined on `[-τ̄, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainFunction {
    kind: GainKind,
    window_bound: Option<f64>,
}

impl GainFunction {
    pub fn constant(k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(invalid("gain must be finite"));
        }
        Ok(GainFunction { kind: GainKind::Constant(k), window_bound: None })
    }

    pub fn zero() -> Self {
        GainFunction { kind: GainKind::Constant(0.0), window_bound: None }
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(invalid("piecewise-constant gain needs one more value than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("gain breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("gain data must be finite"));
        }
        Ok(GainFunction { kind: GainKind::PiecewiseConstant { breakpoints, values }, window_bound: None })
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("piecewise-linear gain needs matching, non-empty knots"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("gain knots must be strictly increasing"));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("gain data must be finite"));
        }
        Ok(GainFunction { kind: GainKind::PiecewiseLinear { times, values }, window_bound: None })
    }

    pub fn expression(expr: Expr, period: Option<f64>) -> Result<Self> {
        if expr.variables() != ["t"] {
            return Err(invalid("gain expression must be a function of t"));
        }
        if let Some(p) = period {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("gain period must be positive"));
            }
        }
        Ok(GainFunction { kind: GainKind::Expression { expr, period }, window_bound: None })
    }

    /// Attaches the window bound `K` (normally produced by `analysis::window_bound`).
    pub fn with_window_bound(mut self, k: f64) -> Self {
        self.window_bound = Some(k);
        self
    }

    pub fn window_bound(&self) -> Option<f64> {
        self.window_bound
    }

    pub fn kind(&self) -> &GainKind {
        &self.kind
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.kind, GainKind::Constant(_) | GainKind::PiecewiseConstant { .. })
    }

    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            GainKind::Constant(c) => *c == 0.0,
            GainKind::PiecewiseConstant { values, .. } | GainKind::PiecewiseLinear { values, .. } => {
                values.iter().all(|v| *v == 0.0)
            }
            GainKind::Expression { .. } => false,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            GainKind::Constant(c) => *c,
            GainKind::PiecewiseConstant { breakpoints, values } => values[breakpoints.partition_point(|b| *b <= t)],
            GainKind::PiecewiseLinear { times, values } => piecewise_linear(times, values, t),
            GainKind::Expression { expr, .. } => expr.eval1(t),
        }
    }

    /// Value at `t` seen from inside the cell `[lo, hi]`, which must not contain a
    /// jump in its interior. Endpoint queries take the one-sided limit from inside.
    pub fn eval_within(&self, t: f64, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            GainKind::PiecewiseConstant { .. } => self.eval(0.5 * (lo + hi)),
            _ => self.eval(t),
        }
    }

    /// Jump points or knots strictly inside `(lo, hi)`, sorted.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let pts: &[f64] = match &self.kind {
            GainKind::PiecewiseConstant { breakpoints, .. } => breakpoints,
            GainKind::PiecewiseLinear { times, .. } => times,
            _ => &[],
        };
        pts.iter().copied().filter(|b| *b > lo && *b < hi).collect()
    }

    pub fn tail(&self) -> GainTail {
        match &self.kind {
            GainKind::Constant(c) => GainTail::EventuallyConstant { from: f64::NEG_INFINITY, value: *c },
            GainKind::PiecewiseConstant { breakpoints, values } => GainTail::EventuallyConstant {
                from: breakpoints.last().copied().unwrap_or(f64::NEG_INFINITY),
                value: *values.last().expect("non-empty"),
            },
            GainKind::PiecewiseLinear { times, values } => GainTail::EventuallyConstant {
                from: *times.last().expect("non-empty"),
                value: *values.last().expect("non-empty"),
            },
            GainKind::Expression { period: Some(p), .. } => GainTail::Periodic { period: *p },
            GainKind::Expression { period: None, .. } => GainTail::Unknown,
        }
    }

    /// `∫_a^b |k(s)| ds`, exact for the piecewise kinds.
    pub fn integral_abs(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.kind {
            GainKind::Constant(c) => c.abs() * (b - a),
            GainKind::PiecewiseConstant { breakpoints, values } => {
                let mut total = 0.0;
                let mut lo = a;
                let mut idx = breakpoints.partition_point(|x| *x <= a);
                while lo < b {
                    let hi = breakpoints.get(idx).copied().unwrap_or(f64::INFINITY).min(b);
                    total += values[idx].abs() * (hi - lo);
                    lo = hi;
                    idx += 1;
                }
                total
            }
            GainKind::PiecewiseLinear { times, values } => {
                let mut cuts = vec![a];
                cuts.extend(times.iter().copied().filter(|x| *x > a && *x < b));
                cuts.push(b);
                cuts.windows(2)
                    .map(|w| {
                        let fa = piecewise_linear(times, values, w[0]);
                        let fb = piecewise_linear(times, values, w[1]);
                        abs_linear_integral(fa, fb, w[1] - w[0])
                    })
                    .sum()
            }
            GainKind::Expression { expr, .. } => {
                let tol = 1e-15 * (1.0 + (b - a));
                adaptive_simpson(&|s| expr.eval1(s).abs(), a, b, tol)
            }
        }
    }
}

fn abs_linear_integral(fa: f64, fb: f64, len: f64) -> f64 {
    if fa * fb >= 0.0 {
        0.5 * (fa.abs() + fb.abs()) * len
    } else {
        // sign change: split at the root
        let r = fa.abs() / (fa.abs() + fb.abs());
        0.5 * (fa.abs() * r + fb.abs() * (1.0 - r)) * len
    }
}

pub(crate) fn piecewise_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    let i = times.partition_point(|x| *x <= t);
    if i == 0 {
        return values[0];
    }
    if i == times.len() {
        return values[times.len() - 1];
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

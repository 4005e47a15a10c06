use crate::error::{Error, Result};
use crate::types::{GainFunction, GainKind, GainTail};

/// `K = max_t ∫_{t-τ̄}^t |k|` over windows ending in `[0, horizon]`: a sliding grid of step
/// `τ̄/64` plus every window with an end at a breakpoint.
pub fn window_bound(k: &GainFunction, tau_bar: f64, horizon: f64) -> Result<f64> {
    if !(tau_bar > 0.0) {
        return Err(Error::Precondition("window length τ̄ must be positive".into()));
    }
    if !(horizon >= tau_bar) {
        return Err(Error::Precondition(format!("horizon {horizon} is shorter than τ̄ = {tau_bar}")));
    }
    if let GainKind::Constant(c) = k.kind() {
        return Ok(c.abs() * tau_bar);
    }
    let step = tau_bar / 64.0;
    let mut ends: Vec<f64> = (0..=(horizon / step).floor() as usize).map(|j| j as f64 * step).collect();
    ends.push(horizon);
    for b in k.breakpoints_in(-tau_bar, horizon) {
        ends.extend([b, b + tau_bar].into_iter().filter(|t| *t >= 0.0 && *t <= horizon));
    }
    Ok(ends.into_iter().map(|t| k.integral_abs(t - tau_bar, t)).fold(0.0, f64::max))
}

/// [`window_bound`] with the horizon stretched to cover the declared tail of `k`;
/// the flag tells whether the value bounds every window on `[0, ∞)`.
pub fn window_bound_all_time(k: &GainFunction, tau_bar: f64, horizon: f64) -> Result<(f64, bool)> {
    let horizon = horizon.max(tau_bar);
    match k.tail() {
        GainTail::EventuallyConstant { from, .. } => {
            let h = if from.is_finite() { horizon.max(from + tau_bar) } else { horizon };
            Ok((window_bound(k, tau_bar, h)?, true))
        }
        GainTail::Periodic { period } => Ok((window_bound(k, tau_bar, horizon.max(period + tau_bar))?, true)),
        GainTail::Unknown => Ok((window_bound(k, tau_bar, horizon)?, false)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use std::f64::consts::PI;

    #[test]
    fn constant_and_sine() {
        assert_eq!(window_bound(&GainFunction::constant(-0.3).unwrap(), 1.0, 5.0).unwrap(), 0.3);
        let k = GainFunction::expression(Expr::of_time("abs(sin(t))").unwrap(), Some(PI)).unwrap();
        let kb = window_bound(&k, PI, 10.0).unwrap();
        assert!((kb - 2.0).abs() < 1e-10);
    }

    #[test]
    fn jump_matches_fine_riemann_sum() {
        let k = GainFunction::piecewise_constant(vec![0.7, 1.9], vec![0.2, 1.5, -0.1]).unwrap();
        let kb = window_bound(&k, 1.0, 4.0).unwrap();
        let n = 100_000;
        let h = 1.0 / n as f64;
        let mut best: f64 = 0.0;
        for j in 0..=200 {
            let t = j as f64 * 0.02;
            let s: f64 = (0..n).map(|i| k.eval(t - 1.0 + (i as f64 + 0.5) * h).abs() * h).sum();
            best = best.max(s);
        }
        assert!((kb - best).abs() < 1e-8, "{kb} vs {best}");
    }
}

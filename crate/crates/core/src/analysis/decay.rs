use serde::Serialize;

use super::envelope::StabilityEnvelope;
use super::{passes, window::window_bound_all_time};
use crate::error::{Error, Result};
use crate::semigroup::SemigroupCertificate;
use crate::types::{GainFunction, GeneratorOperator, HistorySegment, Trajectory};

/// `‖U(t)‖ ≤ M̃ e^γ e^{-rate·t}` with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayBound {
    pub m: f64,
    pub omega: f64,
    pub omega_prime: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    pub k_window: f64,
    pub b_norm: f64,
    pub tau_bar: f64,
    pub initial_norm: f64,
    /// `max_{s∈[-τ̄,0]} e^{ωs}‖f(s)‖`.
    pub history_max: f64,
    /// `M (‖U₀‖ + e^{ωτ̄} K ‖B‖ history_max)`.
    pub m_tilde: f64,
    /// `ω - ω' - ML`.
    pub rate: f64,
    /// `e^γ`.
    pub prefactor: f64,
    /// Last time the envelope is certified (infinite for all-time envelopes).
    pub valid_until: f64,
}

impl DecayBound {
    pub fn value_at(&self, t: f64) -> f64 {
        self.m_tilde * self.prefactor * (-self.rate * t).exp()
    }

    pub fn values(&self, times: &[f64]) -> Result<Vec<f64>> {
        if let Some(t) = times.iter().find(|t| **t > self.valid_until) {
            return Err(Error::Hypothesis(format!("bound requested at t = {t} beyond the envelope horizon {}", self.valid_until)));
        }
        Ok(times.iter().map(|t| self.value_at(*t)).collect())
    }
}

/// Maximum of `e^{ωs}‖f(s)‖` over the history with each cell refined eight times.
fn history_max(g: &GeneratorOperator, history: &HistorySegment, omega: f64) -> Result<f64> {
    let grid = history.grid();
    let mut best: f64 = 0.0;
    for w in grid.windows(2) {
        for j in 0..8 {
            let s = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
            best = best.max((omega * s).exp() * g.metric_norm(&history.eval(s)?)?);
        }
    }
    Ok(best.max(g.metric_norm(history.initial_state())?))
}

/// Assembles the decay bound; refuses when `L ≥ (ω - ω')/M`.
pub fn decay_bound_curve(
    env: &StabilityEnvelope,
    cert: &SemigroupCertificate,
    b_norm: f64,
    g: &GeneratorOperator,
    history: &HistorySegment,
    lipschitz: Option<f64>,
) -> Result<DecayBound> {
    let (m, omega) = (cert.m, cert.omega);
    if !(env.omega_prime < omega) {
        return Err(Error::Hypothesis(format!("ω' = {} is not below ω = {omega}", env.omega_prime)));
    }
    let l = lipschitz.unwrap_or(0.0);
    if l >= (omega - env.omega_prime) / m {
        return Err(Error::Hypothesis(format!(
            "Lipschitz constant {l} is not below (ω - ω')/M = {}",
            (omega - env.omega_prime) / m
        )));
    }
    let tau_bar = history.span();
    let h_max = history_max(g, history, omega)?;
    let u0 = g.metric_norm(history.initial_state())?;
    let m_tilde = m * (u0 + (omega * tau_bar).exp() * env.k_window * b_norm * h_max);
    Ok(DecayBound {
        m,
        omega,
        omega_prime: env.omega_prime,
        gamma: env.gamma,
        lipschitz: l,
        k_window: env.k_window,
        b_norm,
        tau_bar,
        initial_norm: u0,
        history_max: h_max,
        m_tilde,
        rate: omega - env.omega_prime - m * l,
        prefactor: env.gamma.exp(),
        valid_until: if env.all_time { f64::INFINITY } else { env.horizon },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `min (bound - value)`.
    pub worst_margin: f64,
    pub pass: bool,
    /// Least-squares decay rate of `log value` over the second half of the horizon.
    pub empirical_rate: Option<f64>,
    pub theoretical_rate: f64,
}

impl DecayReport {
    pub(crate) fn build(times: Vec<f64>, values: Vec<f64>, bounds: Vec<f64>, theoretical_rate: f64) -> Self {
        let worst_margin = bounds.iter().zip(&values).map(|(b, v)| b - v).fold(f64::INFINITY, f64::min);
        let pass = bounds.iter().zip(&values).all(|(b, v)| passes(*v, *b));
        let empirical_rate = fit_rate(&times, &values);
        DecayReport { times, values, bounds, worst_margin, pass, empirical_rate, theoretical_rate }
    }
}

fn fit_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let t_end = *times.last()?;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= 0.5 * t_end && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Compares `‖U(t)‖_H` with the bound at every trajectory node it covers.
pub fn verify_decay(tr: &Trajectory, bound: &DecayBound) -> DecayReport {
    let norms = tr.norms();
    let (times, values): (Vec<f64>, Vec<f64>) =
        tr.grid().iter().cloned().zip(norms).filter(|(t, _)| *t <= bound.valid_until).unzip();
    let bounds = times.iter().map(|t| bound.value_at(*t)).collect();
    DecayReport::build(times, values, bounds, bound.rate)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub window_end: f64,
    /// `M‖B‖∫₀ᵀ|k|`, below 1.
    pub budget: f64,
    /// `e (M‖U₀‖ + max‖f‖)`.
    pub bound: f64,
    pub max_norm: f64,
    pub worst_margin: f64,
    pub pass: bool,
}

/// Largest `T ≤ t_max` with `M‖B‖∫₀ᵀ|k| < budget`, by bisection.
pub fn first_contraction_window(k: &GainFunction, m: f64, b_norm: f64, budget: f64, t_max: f64) -> f64 {
    let mass = |t: f64| m * b_norm * k.integral_abs(0.0, t);
    if mass(t_max) < budget {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Checks `‖U(t)‖ ≤ e (M‖U₀‖ + max_{[-τ̄,0]}‖f‖)` on `[0, window_end]` for a linear problem.
pub fn verify_apriori(tr: &Trajectory, cert: &SemigroupCertificate, b_norm: f64, window_end: f64) -> Result<AprioriReport> {
    let p = tr.problem();
    if p.nonlinearity().is_some() {
        return Err(Error::Precondition("the a priori bound is stated for the linear problem".into()));
    }
    if !(window_end > 0.0 && window_end <= tr.final_time()) {
        return Err(Error::Precondition(format!("window end {window_end} outside the trajectory")));
    }
    let budget = cert.m * b_norm * p.gain().integral_abs(0.0, window_end);
    if !(budget < 1.0) {
        return Err(Error::Precondition(format!("M‖B‖∫|k| = {budget} is not below 1 on [0, {window_end}]")));
    }
    let g = p.generator();
    let hist = p.history();
    let mut f_max: f64 = 0.0;
    for w in hist.grid().windows(2) {
        for j in 0..8 {
            f_max = f_max.max(g.norm(&hist.eval(w[0] + (w[1] - w[0]) * j as f64 / 8.0)?));
        }
    }
    f_max = f_max.max(g.norm(hist.initial_state()));
    let bound = std::f64::consts::E * (cert.m * g.norm(p.initial_state()) + f_max);
    let norms: Vec<f64> = tr.grid().iter().zip(tr.norms()).filter(|(t, _)| **t <= window_end).map(|(_, n)| n).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    Ok(AprioriReport {
        window_end,
        budget,
        bound,
        max_norm,
        worst_margin: bound - max_norm,
        pass: norms.iter().all(|n| passes(*n, bound)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    /// `ũ(t) = max_{s∈[t-τ̄,t]∩[0,t]} e^{ωs}‖U(s)‖` over trajectory nodes.
    pub windowed_max: Vec<f64>,
    /// `M̃ exp(M‖B‖e^{ωτ̄}∫₀ᵗ|k| + MLt)`.
    pub envelope: Vec<f64>,
    pub worst_margin: f64,
    pub pass: bool,
}

/// Recomputes `ũ` from the trajectory and compares it with the Gronwall majorant.
pub fn verify_gronwall(tr: &Trajectory, cert: &SemigroupCertificate) -> Result<GronwallReport> {
    let p = tr.problem();
    let g = p.generator();
    let (m, omega, tau_bar) = (cert.m, cert.omega, p.tau_bar());
    let b_norm = p.feedback().norm();
    let l = p.lipschitz();
    let (k_window, _) = window_bound_all_time(p.gain(), tau_bar, tr.final_time())?;
    let h_max = history_max(g, p.history(), omega)?;
    let m_tilde = m * (g.norm(p.initial_state()) + (omega * tau_bar).exp() * k_window * b_norm * h_max);
    let c = m * b_norm * (omega * tau_bar).exp();

    let grid = tr.grid();
    let weighted: Vec<f64> = grid.iter().zip(tr.norms()).map(|(t, n)| (omega * t).exp() * n).collect();
    let mut windowed_max = Vec::with_capacity(grid.len());
    let mut envelope = Vec::with_capacity(grid.len());
    let mut mass = 0.0;
    let mut lo = 0;
    let mut deque: std::collections::VecDeque<usize> = Default::default();
    for i in 0..grid.len() {
        if i > 0 {
            mass += p.gain().integral_abs(grid[i - 1], grid[i]);
        }
        while deque.back().is_some_and(|j| weighted[*j] <= weighted[i]) {
            deque.pop_back();
        }
        deque.push_back(i);
        while grid[lo] < grid[i] - tau_bar {
            lo += 1;
        }
        while deque.front().is_some_and(|j| *j < lo) {
            deque.pop_front();
        }
        windowed_max.push(weighted[deque[0]]);
        envelope.push(m_tilde * (c * mass + m * l * grid[i]).exp());
    }
    let worst_margin = envelope.iter().zip(&windowed_max).map(|(e, u)| e - u).fold(f64::INFINITY, f64::min);
    let pass = envelope.iter().zip(&windowed_max).all(|(e, u)| passes(*u, *e));
    Ok(GronwallReport { times: grid.to_vec(), windowed_max, envelope, worst_margin, pass })
}

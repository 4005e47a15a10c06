use serde::Serialize;

use super::window::window_bound_all_time;
use crate::error::{Error, Result};
use crate::semigroup::SemigroupCertificate;
use crate::types::{GainFunction, GainKind, GainTail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    UserSupplied,
    Fitted,
}

/// `(γ, ω')` with `Φ(t) := M‖B‖e^{ωτ̄} ∫₀ᵗ|k| ≤ γ + ω't` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEnvelope {
    pub gamma: f64,
    pub omega_prime: f64,
    pub horizon: f64,
    /// Window bound `K` of the gain.
    pub k_window: f64,
    /// The inequality (and `K`) extend to every `t ≥ 0` by the declared structure of `k`.
    pub all_time: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub envelopes: Vec<StabilityEnvelope>,
    /// Index of the admissible envelope minimising `e^γ e^{-(ω-ω')t_target}`.
    pub best: Option<usize>,
    /// Slope constant `M‖B‖e^{ωτ̄}`.
    pub slope_constant: f64,
}

impl EnvelopeFit {
    pub fn best(&self) -> Option<&StabilityEnvelope> {
        self.best.map(|i| &self.envelopes[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub horizon: f64,
    pub omega_primes: Vec<f64>,
    pub t_target: f64,
    /// Lipschitz constant of the nonlinearity; admissible envelopes need `ML < ω - ω'`.
    pub lipschitz: f64,
}

impl FitSettings {
    /// `count` equally spaced rates in `[0, ω)`.
    pub fn uniform(omega: f64, count: usize, horizon: f64) -> Self {
        let omega_primes = (0..count).map(|i| omega * i as f64 / count as f64).collect();
        FitSettings { horizon, omega_primes, t_target: horizon, lipschitz: 0.0 }
    }
}

struct Primitive {
    times: Vec<f64>,
    phi: Vec<f64>,
    exact_cells: bool,
}

fn primitive(k: &GainFunction, c: f64, horizon: f64, tau_bar: f64, refine: usize) -> Primitive {
    let step = (tau_bar / 64.0).min(horizon / 4096.0) / refine as f64;
    let n = (horizon / step).ceil() as usize;
    let mut times: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    times.push(horizon);
    times.extend(k.breakpoints_in(0.0, horizon));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut phi = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    phi.push(0.0);
    for w in times.windows(2) {
        acc += k.integral_abs(w[0], w[1]);
        phi.push(c * acc);
    }
    let exact_cells = matches!(k.kind(), GainKind::Constant(_) | GainKind::PiecewiseConstant { .. });
    Primitive { times, phi, exact_cells }
}

impl Primitive {
    /// Upper bound of `sup_t Φ(t) - ω't`; exact at nodes, and between nodes either exact
    /// (piecewise linear `Φ`) or bounded using that `Φ` is nondecreasing.
    fn sup_gap(&self, omega_prime: f64) -> f64 {
        let g: Vec<f64> = self.phi.iter().zip(&self.times).map(|(p, t)| p - omega_prime * t).collect();
        let mut sup = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !self.exact_cells {
            for i in 0..g.len() - 1 {
                let dphi = self.phi[i + 1] - self.phi[i];
                let dt = self.times[i + 1] - self.times[i];
                sup = sup.max((g[i] + dphi).min(g[i + 1] + omega_prime * dt));
            }
        }
        sup
    }
}

fn all_time(k: &GainFunction, c: f64, horizon: f64, omega_prime: f64) -> bool {
    match k.tail() {
        GainTail::EventuallyConstant { from, value } => horizon >= from && omega_prime >= c * value.abs(),
        GainTail::Periodic { period } => horizon >= period && omega_prime * period >= c * k.integral_abs(0.0, period),
        GainTail::Unknown => false,
    }
}

/// Fits `γ(ω')` for every rate of the grid and picks the best admissible pair.
pub fn fit_envelope(
    k: &GainFunction,
    cert: &SemigroupCertificate,
    b_norm: f64,
    tau_bar: f64,
    settings: &FitSettings,
) -> Result<EnvelopeFit> {
    if settings.omega_primes.is_empty() {
        return Err(Error::Precondition("empty ω' grid".into()));
    }
    if let Some(w) = settings.omega_primes.iter().find(|w| !(**w >= 0.0 && **w < cert.omega)) {
        return Err(Error::Precondition(format!("ω' = {w} outside [0, ω = {})", cert.omega)));
    }
    if !(settings.horizon > 0.0) {
        return Err(Error::Precondition("envelope horizon must be positive".into()));
    }
    let c = cert.m * b_norm * (cert.omega * tau_bar).exp();
    let (k_window, k_all_time) = window_bound_all_time(k, tau_bar, settings.horizon)?;
    let prim = primitive(k, c, settings.horizon, tau_bar, 1);
    let mut rates = settings.omega_primes.clone();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let decidable = !matches!(k.tail(), GainTail::Unknown);

    let mut envelopes = Vec::with_capacity(rates.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, &w) in rates.iter().enumerate() {
        let gamma = prim.sup_gap(w).max(0.0);
        let at = k_all_time && all_time(k, c, settings.horizon, w);
        envelopes.push(StabilityEnvelope {
            gamma,
            omega_prime: w,
            horizon: settings.horizon,
            k_window,
            all_time: at,
            provenance: Provenance::Fitted,
        });
        let admissible = (!decidable || at) && cert.m * settings.lipschitz < cert.omega - w;
        let score = gamma - (cert.omega - w) * settings.t_target;
        if admissible && best.is_none_or(|(_, s)| score < s) {
            best = Some((i, score));
        }
    }
    Ok(EnvelopeFit { envelopes, best: best.map(|(i, _)| i), slope_constant: c })
}

/// Worst margin `γ + ω't - Φ(t)` on a grid refined `refine` times beyond the fitting grid.
pub fn check_envelope(
    env: &StabilityEnvelope,
    k: &GainFunction,
    cert: &SemigroupCertificate,
    b_norm: f64,
    tau_bar: f64,
    refine: usize,
) -> f64 {
    let c = cert.m * b_norm * (cert.omega * tau_bar).exp();
    let prim = primitive(k, c, env.horizon, tau_bar, refine.max(1));
    prim.phi.iter().zip(&prim.times).map(|(p, t)| env.gamma + env.omega_prime * t - p).fold(f64::INFINITY, f64::min)
}

/// Envelope declared by the user, accepted only if it holds on the fitting grid.
pub fn user_envelope(
    gamma: f64,
    omega_prime: f64,
    k: &GainFunction,
    cert: &SemigroupCertificate,
    b_norm: f64,
    tau_bar: f64,
    horizon: f64,
) -> Result<StabilityEnvelope> {
    if !(gamma >= 0.0 && omega_prime >= 0.0 && omega_prime < cert.omega) {
        return Err(Error::Hypothesis(format!("envelope needs γ ≥ 0 and 0 ≤ ω' < ω, got ({gamma}, {omega_prime})")));
    }
    let c = cert.m * b_norm * (cert.omega * tau_bar).exp();
    let (k_window, k_all_time) = window_bound_all_time(k, tau_bar, horizon)?;
    let prim = primitive(k, c, horizon, tau_bar, 1);
    let gap = prim.sup_gap(omega_prime);
    if gap > gamma * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!("declared γ = {gamma} is below the required {gap} for ω' = {omega_prime}")));
    }
    Ok(StabilityEnvelope {
        gamma,
        omega_prime,
        horizon,
        k_window,
        all_time: k_all_time && all_time(k, c, horizon, omega_prime),
        provenance: Provenance::UserSupplied,
    })
}

use serde::Serialize;

use super::decay::{DecayBound, DecayReport};
use super::passes;
use crate::error::Result;
use crate::models::{window_integral, EnergyReport};
use crate::types::Trajectory;

/// Constants of the energy estimate `E(t) ≤ C* e^{-βt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyConstants {
    /// `C₀ = M̃ e^γ`, the constant of the norm bound.
    pub c0: f64,
    pub beta: f64,
    /// `½C₀² + ½C₀² K e^{2βτ̄}`.
    pub c_star: f64,
}

impl EnergyConstants {
    pub fn from_bound(bound: &DecayBound) -> Self {
        let c0 = bound.m_tilde * bound.prefactor;
        let beta = bound.rate;
        let c_star = 0.5 * c0 * c0 + 0.5 * c0 * c0 * bound.k_window * (2.0 * beta * bound.tau_bar).exp();
        EnergyConstants { c0, beta, c_star }
    }
}

/// Checks the energy report against `C* e^{-βt}`.
pub fn verify_energy_decay(report: &EnergyReport, bound: &DecayBound) -> (EnergyConstants, DecayReport) {
    let c = EnergyConstants::from_bound(bound);
    let keep: Vec<usize> = (0..report.times.len()).filter(|i| report.times[*i] <= bound.valid_until).collect();
    let times: Vec<f64> = keep.iter().map(|i| report.times[*i]).collect();
    let values: Vec<f64> = keep.iter().map(|i| report.total[*i]).collect();
    let bounds = times.iter().map(|t| c.c_star * (-c.beta * t).exp()).collect();
    (c, DecayReport::build(times, values, bounds, c.beta))
}

/// Worst margin of `E(t) ≤ ½‖U(t)‖² + ½∫_{t-τ̄}^t |k(s)| ‖U(s)‖² ds` and whether it holds everywhere.
pub fn verify_energy_window_inequality(tr: &Trajectory, report: &EnergyReport) -> Result<(f64, bool)> {
    let g = tr.problem().generator();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for (t, e) in report.times.iter().zip(&report.total) {
        let u = g.norm(&tr.eval(*t)?);
        let rhs = 0.5 * u * u + 0.5 * window_integral(tr, *t, &|x| g.norm(x).powi(2))?;
        worst = worst.min(rhs - e);
        ok &= passes(*e, rhs);
    }
    Ok((worst, ok))
}

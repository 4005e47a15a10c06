//! Hypotheses and conclusions of the decay estimates as numerical checks.

mod decay;
mod energy;
mod envelope;
mod window;

pub use decay::{
    decay_bound_curve, first_contraction_window, verify_apriori, verify_decay, verify_gronwall, AprioriReport, DecayBound,
    DecayReport, GronwallReport,
};
pub use energy::{verify_energy_decay, verify_energy_window_inequality, EnergyConstants};
pub use envelope::{check_envelope, fit_envelope, user_envelope, EnvelopeFit, FitSettings, Provenance, StabilityEnvelope};
pub use window::{window_bound, window_bound_all_time};

/// Relative slack of every pass/fail comparison.
pub const SLACK: f64 = 1e-9;

pub(crate) fn passes(value: f64, bound: f64) -> bool {
    bound - value >= -SLACK * (1.0 + bound.abs())
}

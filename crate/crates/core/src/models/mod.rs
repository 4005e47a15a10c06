//! Concrete problems: a scalar delay equation and finite-difference wave and elasticity systems.

mod energy;
mod mesh;
mod wave;

pub use energy::{compute_energy, EnergyLayout, EnergyReport};
pub(crate) use energy::window_integral;
pub use mesh::Region;
pub use wave::{build_elasticity, build_wave, ContinuumModel, ElasticityModelConfig, WaveModelConfig, INITIAL_DATA_VARIABLES};

use nalgebra::dmatrix;

use crate::error::{invalid, Result};
use crate::semigroup::SemigroupCertificate;
use crate::types::{DelayFunction, DelayProblem, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment};

/// `u' = -a u + k(t) b u(t - τ(t))` with the exact certificate `(M, ω) = (1, a)`.
pub fn build_scalar(a: f64, b: f64, gain: GainFunction, delay: DelayFunction, history: HistorySegment) -> Result<DelayProblem> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("scalar decay rate a must be positive"));
    }
    if !b.is_finite() {
        return Err(invalid("scalar feedback b must be finite"));
    }
    let g = GeneratorOperator::with_identity_metric(dmatrix![-a])?;
    let cert = SemigroupCertificate::declared(&g, 1.0, a, 16)?;
    let fb = FeedbackOperator::new(dmatrix![b], &g)?;
    Ok(DelayProblem::new(g, fb, gain, delay, history)?.with_certificate(cert))
}

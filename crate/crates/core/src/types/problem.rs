use super::functions::{DelayFunction, GainFunction};
use super::history::HistorySegment;
use super::operators::{FeedbackOperator, GeneratorOperator, Nonlinearity, State};
use crate::error::{invalid, Error, Result};
use crate::semigroup::SemigroupCertificate;

/// Full description of `U' = AU + k(t)BU(t - τ(t)) + G(U)` with history `f`.
#[derive(Debug, Clone)]
pub struct DelayProblem {
    generator: GeneratorOperator,
    feedback: FeedbackOperator,
    gain: GainFunction,
    delay: DelayFunction,
    history: HistorySegment,
    nonlinearity: Option<Nonlinearity>,
    certificate: Option<SemigroupCertificate>,
}

impl DelayProblem {
    pub fn new(
        generator: GeneratorOperator,
        feedback: FeedbackOperator,
        gain: GainFunction,
        delay: DelayFunction,
        history: HistorySegment,
    ) -> Result<Self> {
        let n = generator.dim();
        let b = feedback.matrix();
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::Dimension { expected: n, found: b.nrows().max(b.ncols()) });
        }
        if history.dim() != n {
            return Err(Error::Dimension { expected: n, found: history.dim() });
        }
        let tau_bar = delay.upper_bound();
        if (history.span() - tau_bar).abs() > 1e-12 * (1.0 + tau_bar) {
            return Err(invalid(format!(
                "history spans [{}, 0] but the delay bound is {}",
                -history.span(),
                tau_bar
            )));
        }
        Ok(DelayProblem { generator, feedback, gain, delay, history, nonlinearity: None, certificate: None })
    }

    /// Attaches `G` after checking `G(0) = 0` and its Lipschitz constant.
    pub fn with_nonlinearity(mut self, g: Nonlinearity) -> Result<Self> {
        g.validate(&self.generator)?;
        self.nonlinearity = Some(g);
        Ok(self)
    }

    /// Attaches a decay certificate; it is not re-verified here.
    pub fn with_certificate(mut self, cert: SemigroupCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    pub fn with_gain(mut self, gain: GainFunction) -> Self {
        self.gain = gain;
        self
    }

    pub fn generator(&self) -> &GeneratorOperator {
        &self.generator
    }

    pub fn feedback(&self) -> &FeedbackOperator {
        &self.feedback
    }

    pub fn gain(&self) -> &GainFunction {
        &self.gain
    }

    pub fn delay(&self) -> &DelayFunction {
        &self.delay
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn nonlinearity(&self) -> Option<&Nonlinearity> {
        self.nonlinearity.as_ref()
    }

    pub fn certificate(&self) -> Option<&SemigroupCertificate> {
        self.certificate.as_ref()
    }

    pub fn tau_bar(&self) -> f64 {
        self.delay.upper_bound()
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn initial_state(&self) -> &State {
        self.history.initial_state()
    }

    /// Lipschitz constant of `G`, zero when absent.
    pub fn lipschitz(&self) -> f64 {
        self.nonlinearity.as_ref().map_or(0.0, |g| g.lipschitz())
    }

    /// `G(x)`, or `None` when the problem is linear.
    pub fn nonlinear_term(&self, x: &State) -> Option<State> {
        self.nonlinearity.as_ref().map(|g| g.apply(&self.generator, x))
    }
}

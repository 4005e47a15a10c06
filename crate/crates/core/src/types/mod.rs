mod functions;
mod history;
mod operators;
mod problem;
mod trajectory;

pub use functions::{DelayFunction, DelayKind, GainFunction, GainKind, GainTail};
pub use history::{HistorySegment, Interpolation, NodeDerivatives};
pub use operators::{FeedbackOperator, GeneratorOperator, NonlinearMap, Nonlinearity, State};
pub use problem::DelayProblem;
pub use trajectory::Trajectory;

pub(crate) use history::interpolate;
pub(crate) use operators::spectral_norm;

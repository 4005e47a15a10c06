//! Solver and verifier for linear and semilinear evolution equations with a
//! time-varying delayed feedback term,
//! `U'(t) = A U(t) + k(t) B U(t - τ(t)) + G(U(t))`, `U = f` on `[-τ̄, 0]`.

// Input checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod expr;
pub mod models;
pub mod oracle;
mod quad;
pub mod semigroup;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use expr::Expr;
pub use semigroup::{apply_semigroup, estimate_certificate, operator_norm_semigroup, SemigroupCertificate};
pub use types::*;

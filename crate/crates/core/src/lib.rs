//! Laplace-type integrals `∫_a^b phi(x) exp(n h(x)) dx`.
//!
//! * [`expr`]: expression parsing, evaluation and Taylor-jet derivatives.
//! * [`critical`]: locating the interior maximizer of `h` and its degeneracy.
//! * [`asymptotic`]: closed-form leading-order estimates in log space.
//! * [`quadrature`]: adaptive quadrature oracle for the scaled integral.
//! * [`proofmirror`]: finite-`n` instantiation of the window-splitting argument.
//! * [`conditions`]: sample-based checks of the hypotheses on `phi` and `h`.
//! * [`cli`]: the `laplace` command-line front end.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose, and the
// quadrature nodes keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod asymptotic;
pub mod cli;
pub mod conditions;
pub mod critical;
pub mod expr;
pub mod json;
pub mod par;
pub mod proofmirror;
pub mod quadrature;

use thiserror::Error;

pub use asymptotic::{Estimate, LogScaledValue};
pub use critical::CriticalPoint;
pub use expr::{Expr, Jet};
pub use par::Exec;
pub use quadrature::{ProblemOptions, ProblemSpec, QuadResult};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Domain(#[from] expr::DomainError),
    #[error(transparent)]
    Critical(#[from] critical::CriticalError),
    #[error(transparent)]
    Asymptotic(#[from] asymptotic::AsymptoticError),
    #[error(transparent)]
    Quad(#[from] quadrature::QuadError),
    #[error(transparent)]
    Proof(#[from] proofmirror::ProofError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

//! The quotient, its test functions, minimisation in λ and the regime
//! diagnostics.

mod audit;
mod concentration;
mod lambda_star;
mod minimize;
mod quotient;
mod supersolution;
mod test_family;

use thiserror::Error;

pub use audit::{hardy_audit, random_zero_trace_samples, AuditReport};
pub use concentration::{
    concentration_diagnostic, ConcentrationLevel, ConcentrationReport, ConcentrationVerdict,
};
pub use lambda_star::{
    lambda_star, lambda_star_on_forms, JSample, LambdaStarOptions, LambdaStarReport,
};
pub use minimize::{
    euler_lagrange_residual, initial_guesses, minimize_quotient, Method, MinimizeOptions,
    MinimizeResult,
};
pub use quotient::{chi, chi_described, QuotientReport};
pub use supersolution::{supersolution_check, SupersolutionReport};
pub use test_family::{
    closed_form_pieces, cutoff_phi, test_family_u_eps, ueps_comparison, ueps_quadrature,
    ClosedFormPieces, CutoffReport, UepsComparison, UepsQuadrature,
};

use crate::discretization::DiscretizationError;
use crate::hardy::HardyError;
use crate::quadrature::QuadratureError;

/// `Λ_p = (1 − 1/p)^p`.
pub fn sharp_constant(p: f64) -> f64 {
    (1.0 - 1.0 / p).powf(p)
}

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hardy term of the trial function is {0:e}; nothing to divide by")]
    ZeroDenominator(f64),
    #[error("profile grid starts at {profile_min:e} but the trial needs {needed:e}")]
    ProfileTooCoarse { profile_min: f64, needed: f64 },
    #[error("trial function overflows at delta = {0:e}")]
    NonFiniteTrial(f64),
    #[error("class mismatch: {0}")]
    ClassMismatch(String),
    #[error("no convergence after {} iterations (best value {})", .0.iterations, .0.j_estimate)]
    NoConvergence(Box<MinimizeResult>),
    #[error("hardy matrix is not positive definite")]
    IndefiniteH,
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Hardy(#[from] HardyError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

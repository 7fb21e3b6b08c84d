use thiserror::Error;

use crate::solver::SolveTrace;

/// Errors produced by the graded-space numerics.
#[derive(Debug, Error)]
pub enum FrechetError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no probe lies inside the ball of radius {radius}")]
    EmptyEstimate { radius: f64 },

    #[error("contraction violated: estimated factor {rho} is not below 1")]
    ContractionViolation { rho: f64 },

    #[error("series did not reach tolerance within {terms} terms")]
    SeriesNonConvergence {
        terms: usize,
        partial: Box<crate::operators::LinearMapModel>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate ball: radius {radius} is not below the metric's supremum {sup}")]
    DegenerateBall { radius: f64, sup: f64 },

    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("singular velocity at t = {t}")]
    SingularVelocity { t: f64 },

    #[error("certificate violated: {detail}")]
    CertificateViolation {
        detail: String,
        trace: Option<Box<SolveTrace>>,
    },

    #[error("no certificate: {0}")]
    NoCertificate(String),

    #[error("fixed-point iteration did not converge within {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        trace: Box<SolveTrace>,
    },
}

pub type Result<T> = std::result::Result<T, FrechetError>;

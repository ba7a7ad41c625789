//! Top-level error type and process exit codes.

use thiserror::Error;

use crate::approx::ApproxError;
use crate::config::ConfigError;
use crate::estimator::EstimatorError;
use crate::moments::MomentError;
use crate::optimize::OptimizeError;
use crate::population::PopulationError;
use crate::verify::VerificationError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("population: {0}")]
    Population(#[from] PopulationError),
    #[error("moments: {0}")]
    Moments(#[from] MomentError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("approximation: {0}")]
    Approximation(#[from] ApproxError),
    #[error("optimizer: {0}")]
    Optimize(#[from] OptimizeError),
    #[error("verification: {0}")]
    Verification(#[from] VerificationError),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// 1 for invalid input, 2 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Population(_) | Error::Io(_) => 1,
            Error::Moments(MomentError::Population(_)) => 1,
            Error::Verification(
                VerificationError::SpaceTooLarge { .. } | VerificationError::TooFewReplicates(_),
            ) => 1,
            _ => 2,
        }
    }
}

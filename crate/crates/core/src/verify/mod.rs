//! Independent oracles for the analytic results: exhaustive enumeration of
//! the stratified SRSWOR design (exact) and seeded Monte Carlo (stochastic).

mod enumerate;
mod montecarlo;

use thiserror::Error;

use crate::estimator::EstimatorError;

pub use enumerate::{
    exact_bias_mse, exact_expectation, exact_v_table, Combinations, ExactDesignDistribution,
    DEFAULT_ENUMERATION_LIMIT,
};
pub use montecarlo::{draw_replicate, monte_carlo, monte_carlo_values, McEstimate, McResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("joint sample space has {size} samples, above the enumeration limit of {limit}; use Monte Carlo instead")]
    SpaceTooLarge { size: String, limit: u64 },
    #[error("estimator failed on sample {sample}: {source}")]
    Estimator {
        sample: String,
        source: EstimatorError,
    },
    #[error("at least 2 replicates are required, got {0}")]
    TooFewReplicates(usize),
    #[error("Monte Carlo produced fewer than 2 usable replicates ({skipped} skipped)")]
    NoUsableReplicates { skipped: usize },
}

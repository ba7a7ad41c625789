//! Exponential ratio/product-type estimators of a population mean under
//! stratified simple random sampling without replacement.
//!
//! The crate is organised as a pipeline:
//!
//! - [`population`]: load and summarise a stratified finite population.
//! - [`moments`]: exact SRSWOR design moments of the relative errors `(e0, e1)`.
//! - [`estimator`]: the four point estimators `t1s`..`t4s` on a drawn sample.
//! - [`series`] and [`approx`]: truncated series expansions and the first- and
//!   second-order bias/MSE built from them.
//! - [`optimize`]: tuning of `alpha` (t3s) and `theta` (t4s).
//! - [`verify`]: exhaustive enumeration and seeded Monte Carlo oracles.
//! - [`config`], [`report`] and [`pipeline`]: the command-line front end.

pub mod approx;
pub mod config;
pub mod error;
pub mod estimator;
pub mod moments;
pub mod numeric;
pub mod optimize;
pub mod pipeline;
pub mod population;
pub mod report;
pub mod series;
pub mod verify;

pub use approx::{ApproximationMode, ApproximationResult, Order};
pub use error::Error;
pub use estimator::{estimate, EstimatorKind, EstimatorSpec, StratifiedSample};
pub use moments::{design_coefficients, v_table, DesignCoefficients, VKey, VTable};
pub use population::{load_population, summarize_stratum, StratifiedPopulation, StratumPopulation};

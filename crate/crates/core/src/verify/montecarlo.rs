use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VerificationError;
use crate::estimator::{estimate, EstimatorSpec, StratifiedSample, StratumDraw};
use crate::numeric::CompensatedSum;
use crate::population::StratifiedPopulation;
use crate::report::num17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    #[serde(with = "num17")]
    pub mean: f64,
    /// Sample variance (divisor `replicates - 1`) of the per-replicate values.
    #[serde(with = "num17")]
    pub variance: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(with = "num17")]
    pub standard_error: f64,
}

impl McEstimate {
    fn from_values(values: &[f64], seed: u64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
        let ss = values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value();
        let variance = ss / (n - 1.0);
        McEstimate {
            mean,
            variance,
            replicates: values.len(),
            seed,
            standard_error: (variance / n).sqrt(),
        }
    }
}

/// Monte Carlo bias and MSE of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub bias: McEstimate,
    pub mse: McEstimate,
    /// Replicates dropped because the estimator failed on them.
    pub skipped: usize,
}

/// Draws replicate `replicate` of the design. The generator is ChaCha8 keyed
/// by `seed` with the replicate index as its stream, so a replicate's sample
/// depends only on `(seed, replicate)`.
pub fn draw_replicate(pop: &StratifiedPopulation, seed: u64, replicate: u64) -> StratifiedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let draws = pop
        .strata()
        .iter()
        .enumerate()
        .map(|(h, s)| {
            let big_n = s.capital_n();
            let mut perm: Vec<usize> = (0..big_n).collect();
            // partial Fisher-Yates: the first n_h slots are the sample
            for i in 0..s.small_n() {
                let j = rng.random_range(i..big_n);
                perm.swap(i, j);
            }
            perm.truncate(s.small_n());
            StratumDraw::from_indices(pop, h, perm)
        })
        .collect();
    StratifiedSample::from_draws(pop.weights(), draws)
}

/// Per-replicate estimates in replicate order; `None` where the estimator
/// failed.
pub fn monte_carlo_values(
    pop: &StratifiedPopulation,
    spec: &EstimatorSpec,
    replicates: usize,
    seed: u64,
) -> Vec<Option<f64>> {
    let x = pop.grand_x_mean();
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| estimate(spec, &draw_replicate(pop, seed, r), x).ok())
        .collect()
}

pub fn monte_carlo(
    pop: &StratifiedPopulation,
    spec: &EstimatorSpec,
    replicates: usize,
    seed: u64,
) -> Result<McResult, VerificationError> {
    if replicates < 2 {
        return Err(VerificationError::TooFewReplicates(replicates));
    }
    let y = pop.grand_y_mean();
    let values = monte_carlo_values(pop, spec, replicates, seed);
    let errors: Vec<f64> = values.iter().flatten().map(|t| t - y).collect();
    let skipped = replicates - errors.len();
    if errors.len() < 2 {
        return Err(VerificationError::NoUsableReplicates { skipped });
    }
    let squared: Vec<f64> = errors.iter().map(|e| e * e).collect();
    Ok(McResult {
        bias: McEstimate::from_values(&errors, seed),
        mse: McEstimate::from_values(&squared, seed),
        skipped,
    })
}

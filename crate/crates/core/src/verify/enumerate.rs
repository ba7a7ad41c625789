use rayon::prelude::*;

use super::VerificationError;
use crate::estimator::{estimate, EstimatorSpec, StratifiedSample, StratumDraw};
use crate::moments::{VKey, VTable};
use crate::numeric::{binomial, CompensatedSum};
use crate::population::StratifiedPopulation;

pub const DEFAULT_ENUMERATION_LIMIT: u64 = 10_000_000;

/// Joint samples handled per parallel work unit. Fixed, so the reduction
/// tree does not depend on the worker count.
const CHUNK: u64 = 4096;

/// Size-`k` subsets of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        // rightmost position that can still advance
        match (0..k).rev().find(|&i| next[i] < self.n - k + i) {
            Some(i) => {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// The stratified SRSWOR design: the Cartesian product of per-stratum
/// combinations, every joint sample equally likely.
pub struct ExactDesignDistribution<'a> {
    pop: &'a StratifiedPopulation,
    draws: Vec<Vec<StratumDraw>>,
    size: u64,
}

impl<'a> ExactDesignDistribution<'a> {
    pub fn new(pop: &'a StratifiedPopulation, limit: u64) -> Result<Self, VerificationError> {
        let mut size: Option<u128> = Some(1);
        for s in pop.strata() {
            let c = binomial(s.capital_n() as u64, s.small_n() as u64);
            size = size.zip(c).and_then(|(a, b)| a.checked_mul(b));
        }
        let size = match size {
            Some(size) if size <= u128::from(limit) => size as u64,
            Some(size) => {
                return Err(VerificationError::SpaceTooLarge {
                    size: size.to_string(),
                    limit,
                })
            }
            None => {
                return Err(VerificationError::SpaceTooLarge {
                    size: "> 2^128".into(),
                    limit,
                })
            }
        };
        let draws = pop
            .strata()
            .iter()
            .enumerate()
            .map(|(h, s)| {
                Combinations::new(s.capital_n(), s.small_n())
                    .map(|idx| StratumDraw::from_indices(pop, h, idx))
                    .collect()
            })
            .collect();
        Ok(Self { pop, draws, size })
    }

    /// Number of joint samples, `prod_h C(N_h, n_h)`.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn population(&self) -> &StratifiedPopulation {
        self.pop
    }

    /// Mixed-radix digits (last stratum fastest) of joint sample `index`.
    fn digits(&self, mut index: u64) -> Vec<usize> {
        let mut digits = vec![0; self.draws.len()];
        for (h, d) in self.draws.iter().enumerate().rev() {
            let radix = d.len() as u64;
            digits[h] = (index % radix) as usize;
            index /= radix;
        }
        digits
    }

    fn sample_at(&self, digits: &[usize]) -> StratifiedSample {
        let draws = digits
            .iter()
            .zip(&self.draws)
            .map(|(&d, ds)| ds[d].clone())
            .collect();
        StratifiedSample::from_draws(self.pop.weights(), draws)
    }

    /// Advances the odometer; updates only the strata whose digit changed.
    fn advance(&self, digits: &mut [usize], sample: &mut StratifiedSample) {
        for h in (0..digits.len()).rev() {
            digits[h] += 1;
            if digits[h] < self.draws[h].len() {
                sample.set_draw(self.pop.weights(), h, &self.draws[h][digits[h]]);
                return;
            }
            digits[h] = 0;
            sample.set_draw(self.pop.weights(), h, &self.draws[h][0]);
        }
    }

    /// Visits every joint sample once, in lexicographic odometer order.
    pub fn for_each_sample(&self, mut visit: impl FnMut(&StratifiedSample)) {
        let mut digits = vec![0; self.draws.len()];
        let mut sample = self.sample_at(&digits);
        for i in 0..self.size {
            if i > 0 {
                self.advance(&mut digits, &mut sample);
            }
            visit(&sample);
        }
    }

    /// Exact design expectations of `width` statistics computed together.
    ///
    /// `statistic` writes its values into the provided slice. Evaluation is
    /// parallel over fixed-size chunks with a chunk-ordered compensated
    /// reduction, so the result is bit-identical for any worker count.
    pub fn expectations<E, F>(&self, width: usize, statistic: F) -> Result<Vec<f64>, E>
    where
        E: Send,
        F: Fn(&StratifiedSample, &mut [f64]) -> Result<(), E> + Sync,
    {
        let chunks = self.size.div_ceil(CHUNK);
        let partials: Vec<Vec<CompensatedSum>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(self.size);
                let mut digits = self.digits(start);
                let mut sample = self.sample_at(&digits);
                let mut acc = vec![CompensatedSum::new(); width];
                let mut values = vec![0.0; width];
                for i in start..end {
                    if i > start {
                        self.advance(&mut digits, &mut sample);
                    }
                    statistic(&sample, &mut values)?;
                    for (a, v) in acc.iter_mut().zip(&values) {
                        a.add(*v);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_, E>>()?;
        let mut total = vec![CompensatedSum::new(); width];
        for chunk in &partials {
            for (t, p) in total.iter_mut().zip(chunk) {
                t.merge(p);
            }
        }
        Ok(total.iter().map(|t| t.value() / self.size as f64).collect())
    }
}

/// `E[statistic]` over the full design.
pub fn exact_expectation(
    pop: &StratifiedPopulation,
    statistic: impl Fn(&StratifiedSample) -> f64 + Sync,
    limit: u64,
) -> Result<f64, VerificationError> {
    let design = ExactDesignDistribution::new(pop, limit)?;
    let out = design.expectations::<VerificationError, _>(1, |s, out| {
        out[0] = statistic(s);
        Ok(())
    })?;
    Ok(out[0])
}

/// Exact `(E[t] - Ybar, E[(t - Ybar)^2])`.
pub fn exact_bias_mse(
    pop: &StratifiedPopulation,
    spec: &EstimatorSpec,
    limit: u64,
) -> Result<(f64, f64), VerificationError> {
    let design = ExactDesignDistribution::new(pop, limit)?;
    let y = pop.grand_y_mean();
    let x = pop.grand_x_mean();
    let out = design.expectations(2, |s, out| {
        let t = estimate(spec, s, x).map_err(|source| VerificationError::Estimator {
            sample: describe(s),
            source,
        })?;
        out[0] = t - y;
        out[1] = (t - y) * (t - y);
        Ok(())
    })?;
    Ok((out[0], out[1]))
}

/// `E[e0^a e1^b]` for every V-table key, by enumeration.
pub fn exact_v_table(pop: &StratifiedPopulation, limit: u64) -> Result<VTable, VerificationError> {
    let design = ExactDesignDistribution::new(pop, limit)?;
    let y = pop.grand_y_mean();
    let x = pop.grand_x_mean();
    let out = design.expectations::<VerificationError, _>(VKey::ALL.len(), |s, out| {
        let e0 = (s.ybar_st() - y) / y;
        let e1 = (s.xbar_st() - x) / x;
        for (slot, key) in out.iter_mut().zip(VKey::ALL) {
            *slot = e0.powi(i32::from(key.a)) * e1.powi(i32::from(key.b));
        }
        Ok(())
    })?;
    Ok(VTable::from_entries(VKey::ALL.into_iter().zip(out), y, x))
}

fn describe(s: &StratifiedSample) -> String {
    let parts: Vec<String> = s
        .draws()
        .iter()
        .map(|d| format!("{:?}", d.indices))
        .collect();
    format!("[{}]", parts.join(", "))
}

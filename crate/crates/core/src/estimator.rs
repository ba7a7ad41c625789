//! Combined exponential ratio/product-type estimators of `Ybar`.
//!
//! ```text
//! t1s = ybar_st * exp[(Xbar - xbar_st) / (Xbar + xbar_st)]
//! t2s = ybar_st * exp[(xbar_st - Xbar) / (xbar_st + Xbar)]
//! t3s = ybar_st * exp[alpha (Xbar - xbar_st) / (Xbar + xbar_st)]
//! t4s = theta * t1s + (1 - theta) * t2s
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::compensated_sum;
use crate::population::StratifiedPopulation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("degenerate auxiliary configuration: Xbar + xbar_st = 0 (Xbar = {xbar_pop}, xbar_st = {xbar_st})")]
    DegenerateAuxiliary { xbar_pop: f64, xbar_st: f64 },
    #[error("estimate is not finite ({0})")]
    NonFinite(f64),
    #[error("stratum {stratum}: {message}")]
    InvalidSample { stratum: usize, message: String },
    #[error("unknown estimator `{0}` (expected t1s, t2s, t3s or t4s)")]
    UnknownKind(String),
    #[error("invalid estimator parameter `{0}`")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    T1S,
    T2S,
    T3S,
    T4S,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::T1S,
        EstimatorKind::T2S,
        EstimatorKind::T3S,
        EstimatorKind::T4S,
    ];

    /// Name of the tuning parameter, if the estimator has one.
    pub fn parameter_name(self) -> Option<&'static str> {
        match self {
            EstimatorKind::T3S => Some("alpha"),
            EstimatorKind::T4S => Some("theta"),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::T1S => "t1s",
            EstimatorKind::T2S => "t2s",
            EstimatorKind::T3S => "t3s",
            EstimatorKind::T4S => "t4s",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t1s" => Ok(EstimatorKind::T1S),
            "t2s" => Ok(EstimatorKind::T2S),
            "t3s" => Ok(EstimatorKind::T3S),
            "t4s" => Ok(EstimatorKind::T4S),
            other => Err(EstimatorError::UnknownKind(other.to_owned())),
        }
    }
}

/// An estimator with its tuning parameter bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    T1S,
    T2S,
    T3S { alpha: f64 },
    T4S { theta: f64 },
}

impl EstimatorSpec {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorSpec::T1S => EstimatorKind::T1S,
            EstimatorSpec::T2S => EstimatorKind::T2S,
            EstimatorSpec::T3S { .. } => EstimatorKind::T3S,
            EstimatorSpec::T4S { .. } => EstimatorKind::T4S,
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match *self {
            EstimatorSpec::T3S { alpha } => Some(alpha),
            EstimatorSpec::T4S { theta } => Some(theta),
            _ => None,
        }
    }

    /// Binds `parameter` to `kind`; ignored for parameter-free kinds.
    pub fn with_parameter(kind: EstimatorKind, parameter: f64) -> Self {
        match kind {
            EstimatorKind::T1S => EstimatorSpec::T1S,
            EstimatorKind::T2S => EstimatorSpec::T2S,
            EstimatorKind::T3S => EstimatorSpec::T3S { alpha: parameter },
            EstimatorKind::T4S => EstimatorSpec::T4S { theta: parameter },
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind().parameter_name(), self.parameter()) {
            (Some(name), Some(value)) => write!(f, "{}({name}={value})", self.kind()),
            _ => write!(f, "{}", self.kind()),
        }
    }
}

/// Units drawn from one stratum and their means.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumDraw {
    pub indices: Vec<usize>,
    pub x_mean: f64,
    pub y_mean: f64,
}

impl StratumDraw {
    pub fn from_indices(
        pop: &StratifiedPopulation,
        stratum: usize,
        indices: Vec<usize>,
    ) -> StratumDraw {
        let units = pop.strata()[stratum].units();
        let n = indices.len() as f64;
        let x_mean = compensated_sum(indices.iter().map(|&i| units[i].x)) / n;
        let y_mean = compensated_sum(indices.iter().map(|&i| units[i].y)) / n;
        StratumDraw {
            indices,
            x_mean,
            y_mean,
        }
    }
}

/// One stratified SRSWOR sample with its derived stratified means.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSample {
    draws: Vec<StratumDraw>,
    ybar_st: f64,
    xbar_st: f64,
}

impl StratifiedSample {
    /// Validates the index sets against the population's design.
    pub fn from_indices(
        pop: &StratifiedPopulation,
        index_sets: Vec<Vec<usize>>,
    ) -> Result<Self, EstimatorError> {
        if index_sets.len() != pop.strata().len() {
            return Err(EstimatorError::InvalidSample {
                stratum: index_sets.len().min(pop.strata().len()),
                message: format!(
                    "expected {} index sets, found {}",
                    pop.strata().len(),
                    index_sets.len()
                ),
            });
        }
        let mut draws = Vec::with_capacity(index_sets.len());
        for (h, (set, stratum)) in index_sets.into_iter().zip(pop.strata()).enumerate() {
            if set.len() != stratum.small_n() {
                return Err(EstimatorError::InvalidSample {
                    stratum: h,
                    message: format!("expected {} units, found {}", stratum.small_n(), set.len()),
                });
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(EstimatorError::InvalidSample {
                    stratum: h,
                    message: "repeated unit index".into(),
                });
            }
            if let Some(&bad) = sorted.last().filter(|&&i| i >= stratum.capital_n()) {
                return Err(EstimatorError::InvalidSample {
                    stratum: h,
                    message: format!("index {bad} out of range for N_h = {}", stratum.capital_n()),
                });
            }
            draws.push(StratumDraw::from_indices(pop, h, set));
        }
        Ok(Self::from_draws(pop.weights(), draws))
    }

    /// Assembles a sample from already-validated draws.
    pub fn from_draws(weights: &[f64], draws: Vec<StratumDraw>) -> Self {
        let (ybar_st, xbar_st) = stratified_means(weights, &draws);
        Self {
            draws,
            ybar_st,
            xbar_st,
        }
    }

    pub(crate) fn set_draw(&mut self, weights: &[f64], stratum: usize, draw: &StratumDraw) {
        self.draws[stratum].clone_from(draw);
        let (y, x) = stratified_means(weights, &self.draws);
        self.ybar_st = y;
        self.xbar_st = x;
    }

    pub fn draws(&self) -> &[StratumDraw] {
        &self.draws
    }

    pub fn ybar_st(&self) -> f64 {
        self.ybar_st
    }

    pub fn xbar_st(&self) -> f64 {
        self.xbar_st
    }
}

fn stratified_means(weights: &[f64], draws: &[StratumDraw]) -> (f64, f64) {
    let y = compensated_sum(weights.iter().zip(draws).map(|(w, d)| w * d.y_mean));
    let x = compensated_sum(weights.iter().zip(draws).map(|(w, d)| w * d.x_mean));
    (y, x)
}

/// Evaluates `spec` on `sample` given the known auxiliary mean `xbar_pop`.
pub fn estimate(
    spec: &EstimatorSpec,
    sample: &StratifiedSample,
    xbar_pop: f64,
) -> Result<f64, EstimatorError> {
    estimate_from_means(spec, sample.ybar_st, sample.xbar_st, xbar_pop)
}

/// [`estimate`] on bare stratified means.
pub fn estimate_from_means(
    spec: &EstimatorSpec,
    ybar_st: f64,
    xbar_st: f64,
    xbar_pop: f64,
) -> Result<f64, EstimatorError> {
    let denom = xbar_pop + xbar_st;
    if denom == 0.0 {
        return Err(EstimatorError::DegenerateAuxiliary { xbar_pop, xbar_st });
    }
    let ratio = || ybar_st * ((xbar_pop - xbar_st) / (xbar_pop + xbar_st)).exp();
    let product = || ybar_st * ((xbar_st - xbar_pop) / (xbar_st + xbar_pop)).exp();
    let value = match *spec {
        EstimatorSpec::T1S => ratio(),
        EstimatorSpec::T2S => product(),
        EstimatorSpec::T3S { alpha } => {
            ybar_st * (alpha * ((xbar_pop - xbar_st) / (xbar_pop + xbar_st))).exp()
        }
        EstimatorSpec::T4S { theta } => theta * ratio() + (1.0 - theta) * product(),
    };
    if !value.is_finite() {
        return Err(EstimatorError::NonFinite(value));
    }
    Ok(value)
}

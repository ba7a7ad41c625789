//! Stratified finite populations and their per-stratum summaries.
//!
//! Stratum weights are `W_h = N_h / N`, so that `sum_h W_h * Ybar_h` is the
//! pooled population mean and the stratified sample mean is design-unbiased.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use thiserror::Error;

use crate::numeric::compensated_sum;

/// Human-readable statement of the stratum weights used everywhere.
pub const WEIGHT_DEFINITION: &str = "W_h = N_h / N (stratum share of the population)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("population source is empty")]
    Empty,
    #[error("line {line}: expected header `stratum,x,y`, found `{found}`")]
    BadHeader { line: u64, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("design names stratum `{0}` which has no units in the population")]
    UnknownStratum(String),
    #[error("no sample size given for stratum `{0}`")]
    MissingDesign(String),
    #[error(
        "stratum `{stratum}`: sample size n_h = {n} must satisfy 1 <= n_h < N_h = {capital_n}"
    )]
    InvalidSampleSize {
        stratum: String,
        n: usize,
        capital_n: usize,
    },
    #[error("stratum label `{0}` is used by more than one stratum")]
    DuplicateStratum(String),
    #[error("population has no strata")]
    NoStrata,
    #[error("stratum `{stratum}` has N_h = {size}; at least 2 units are needed")]
    DegenerateStratum { stratum: String, size: usize },
    #[error("stratum `{stratum}` unit {index}: auxiliary value x = {x} is not positive")]
    NonPositiveAuxiliary {
        stratum: String,
        index: usize,
        x: f64,
    },
    #[error("non-finite value in stratum `{stratum}` unit {index}")]
    NonFinite { stratum: String, index: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub x: f64,
    pub y: f64,
}

/// One stratum: its units in file order and the planned SRSWOR sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumPopulation {
    id: String,
    units: Vec<Unit>,
    sample_size: usize,
}

impl StratumPopulation {
    pub fn new(
        id: impl Into<String>,
        units: Vec<Unit>,
        sample_size: usize,
    ) -> Result<Self, PopulationError> {
        let id = id.into();
        if sample_size == 0 || sample_size >= units.len() {
            return Err(PopulationError::InvalidSampleSize {
                stratum: id,
                n: sample_size,
                capital_n: units.len(),
            });
        }
        for (index, u) in units.iter().enumerate() {
            if !u.x.is_finite() || !u.y.is_finite() {
                return Err(PopulationError::NonFinite { stratum: id, index });
            }
        }
        Ok(Self {
            id,
            units,
            sample_size,
        })
    }

    /// Convenience constructor from parallel `x` and `y` slices.
    pub fn from_xy(
        id: impl Into<String>,
        x: &[f64],
        y: &[f64],
        sample_size: usize,
    ) -> Result<Self, PopulationError> {
        assert_eq!(x.len(), y.len(), "x and y must have equal length");
        let units = x.iter().zip(y).map(|(&x, &y)| Unit { x, y }).collect();
        Self::new(id, units, sample_size)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    /// `N_h`.
    pub fn capital_n(&self) -> usize {
        self.units.len()
    }

    /// `n_h`.
    pub fn small_n(&self) -> usize {
        self.sample_size
    }

    pub fn x_mean(&self) -> f64 {
        compensated_sum(self.units.iter().map(|u| u.x)) / self.units.len() as f64
    }

    pub fn y_mean(&self) -> f64 {
        compensated_sum(self.units.iter().map(|u| u.y)) / self.units.len() as f64
    }
}

/// A validated stratified population with weights and grand means.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedPopulation {
    strata: Vec<StratumPopulation>,
    weights: Vec<f64>,
    grand_x_mean: f64,
    grand_y_mean: f64,
}

impl StratifiedPopulation {
    pub fn new(strata: Vec<StratumPopulation>) -> Result<Self, PopulationError> {
        if strata.is_empty() {
            return Err(PopulationError::NoStrata);
        }
        let mut seen = HashSet::new();
        for s in &strata {
            if !seen.insert(s.id.as_str()) {
                return Err(PopulationError::DuplicateStratum(s.id.clone()));
            }
        }
        let total: usize = strata.iter().map(StratumPopulation::capital_n).sum();
        let weights: Vec<f64> = strata
            .iter()
            .map(|s| s.capital_n() as f64 / total as f64)
            .collect();
        let grand_x_mean =
            compensated_sum(strata.iter().zip(&weights).map(|(s, w)| w * s.x_mean()));
        let grand_y_mean =
            compensated_sum(strata.iter().zip(&weights).map(|(s, w)| w * s.y_mean()));
        Ok(Self {
            strata,
            weights,
            grand_x_mean,
            grand_y_mean,
        })
    }

    pub fn strata(&self) -> &[StratumPopulation] {
        &self.strata
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Xbar`.
    pub fn grand_x_mean(&self) -> f64 {
        self.grand_x_mean
    }

    /// `Ybar`.
    pub fn grand_y_mean(&self) -> f64 {
        self.grand_y_mean
    }

    pub fn total_size(&self) -> usize {
        self.strata.iter().map(StratumPopulation::capital_n).sum()
    }

    /// Exponential estimators assume a strictly positive auxiliary variable.
    pub fn require_positive_auxiliary(&self) -> Result<(), PopulationError> {
        for s in &self.strata {
            if let Some((index, u)) = s.units.iter().enumerate().find(|(_, u)| u.x <= 0.0) {
                return Err(PopulationError::NonPositiveAuxiliary {
                    stratum: s.id.clone(),
                    index,
                    x: u.x,
                });
            }
        }
        Ok(())
    }

    /// Same population with every value transformed; sample sizes kept.
    pub fn map_units(&self, f: impl Fn(Unit) -> Unit) -> Result<Self, PopulationError> {
        let strata = self
            .strata
            .iter()
            .map(|s| {
                StratumPopulation::new(
                    s.id.clone(),
                    s.units.iter().copied().map(&f).collect(),
                    s.sample_size,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(strata)
    }
}

/// Reads a `stratum,x,y` CSV stream and attaches the per-stratum sample sizes.
///
/// Strata appear in order of first occurrence; unit order within a stratum is
/// preserved.
pub fn load_population<R: Read>(
    source: R,
    design: &BTreeMap<String, usize>,
) -> Result<StratifiedPopulation, PopulationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(PopulationError::Empty),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    let header_fields: Vec<&str> = header.iter().collect();
    if header_fields != ["stratum", "x", "y"] {
        return Err(PopulationError::BadHeader {
            line: 1,
            found: header_fields.join(","),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Unit>> = BTreeMap::new();
    for record in records {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(PopulationError::Malformed {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let label = &record[0];
        if label.is_empty() {
            return Err(PopulationError::Malformed {
                line,
                message: "empty stratum label".into(),
            });
        }
        let x = parse_real(&record[1], "x", line)?;
        let y = parse_real(&record[2], "y", line)?;
        if !grouped.contains_key(label) {
            order.push(label.to_owned());
        }
        grouped
            .entry(label.to_owned())
            .or_default()
            .push(Unit { x, y });
    }
    if order.is_empty() {
        return Err(PopulationError::Empty);
    }
    if let Some(unknown) = design.keys().find(|k| !grouped.contains_key(*k)) {
        return Err(PopulationError::UnknownStratum(unknown.clone()));
    }

    let strata = order
        .into_iter()
        .map(|label| {
            let n = *design
                .get(&label)
                .ok_or_else(|| PopulationError::MissingDesign(label.clone()))?;
            let units = grouped.remove(&label).unwrap_or_default();
            StratumPopulation::new(label, units, n)
        })
        .collect::<Result<Vec<_>, _>>()?;
    StratifiedPopulation::new(strata)
}

fn parse_real(field: &str, name: &str, line: u64) -> Result<f64, PopulationError> {
    let value: f64 = field.parse().map_err(|_| PopulationError::Malformed {
        line,
        message: format!("cannot parse {name} value `{field}` as a number"),
    })?;
    if !value.is_finite() {
        return Err(PopulationError::Malformed {
            line,
            message: format!("{name} value `{field}` is not finite"),
        });
    }
    Ok(value)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> PopulationError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(io) => PopulationError::Io(io.to_string()),
        _ => PopulationError::Malformed {
            line,
            message: e.to_string(),
        },
    }
}

/// Per-stratum means, variances (divisor `N_h - 1`) and central product
/// moments `C_ab = mean((y - Ybar_h)^a (x - Xbar_h)^b)` (divisor `N_h`).
#[derive(Debug, Clone, PartialEq)]
pub struct StratumSummary {
    pub x_mean: f64,
    pub y_mean: f64,
    pub s2_y: f64,
    pub s2_x: f64,
    pub s_xy: f64,
    central: [[f64; 5]; 5],
}

impl StratumSummary {
    /// `C_ab`: first index is the power of the y-deviation, second of the
    /// x-deviation. Defined for `a + b <= 4`.
    pub fn central_moment(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= 4, "central moments are kept up to total order 4");
        self.central[a][b]
    }

    /// All `(a, b, C_ab)` with `a + b <= 4`.
    pub fn central_moments(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                out.insert((a, b), self.central[a][b]);
            }
        }
        out
    }
}

pub fn summarize_stratum(s: &StratumPopulation) -> Result<StratumSummary, PopulationError> {
    let big_n = s.capital_n();
    if big_n < 2 {
        return Err(PopulationError::DegenerateStratum {
            stratum: s.id.clone(),
            size: big_n,
        });
    }
    let x_mean = s.x_mean();
    let y_mean = s.y_mean();
    let deviations: Vec<(f64, f64)> = s
        .units
        .iter()
        .map(|u| (u.y - y_mean, u.x - x_mean))
        .collect();

    let mut central = [[0.0; 5]; 5];
    for (a, row) in central.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate().take(5 - a) {
            *cell = match (a, b) {
                (0, 0) => 1.0,
                (1, 0) | (0, 1) => 0.0,
                _ => {
                    compensated_sum(
                        deviations
                            .iter()
                            .map(|&(dy, dx)| dy.powi(a as i32) * dx.powi(b as i32)),
                    ) / big_n as f64
                }
            };
        }
    }
    let to_sample = big_n as f64 / (big_n - 1) as f64;
    Ok(StratumSummary {
        x_mean,
        y_mean,
        s2_y: central[2][0] * to_sample,
        s2_x: central[0][2] * to_sample,
        s_xy: central[1][1] * to_sample,
        central,
    })
}

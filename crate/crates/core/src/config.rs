//! Run configuration: a TOML file whose fields can each be overridden from
//! the command line.
//!
//! ```toml
//! population = "synthetic.csv"        # relative to the config file
//! estimators = ["t1s", "t2s", "t3s:optimize", "t4s:0.75"]
//! order = "both"                      # 1 | 2 | "both"
//! verify = "exact"                    # "none" | "exact" | "mc"
//! replicates = 200000                 # required iff verify = "mc"
//! seed = 7
//! format = "json"                     # "table" | "csv" | "json"
//! printed_mode = true
//! max_enum = 10000000
//!
//! [sample_sizes]
//! A = 3
//! B = 3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::Order;
use crate::estimator::EstimatorKind;
use crate::verify::DEFAULT_ENUMERATION_LIMIT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config file: {0}")]
    Parse(String),
    #[error("no population file given (use --population or `population = ...`)")]
    MissingPopulation,
    #[error("invalid estimator request `{0}` (expected t1s, t2s, t3s:<alpha|optimize>, t4s:<theta|optimize>)")]
    InvalidEstimator(String),
    #[error("{0} needs a parameter value or `optimize`")]
    MissingParameter(EstimatorKind),
    #[error("invalid sample size `{0}` (expected STRATUM=SIZE)")]
    InvalidSampleSize(String),
    #[error("invalid {field} `{value}`")]
    InvalidValue { field: &'static str, value: String },
    #[error("replicates must be given when verify = mc")]
    MissingReplicates,
    #[error("replicates given but verify is not mc")]
    UnexpectedReplicates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterChoice {
    /// t1s/t2s.
    NotApplicable,
    Fixed(f64),
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorRequest {
    pub kind: EstimatorKind,
    pub parameter: ParameterChoice,
}

impl EstimatorRequest {
    /// Parses `t1s`, `t3s:0.5`, `t4s:optimize`. A bare `t3s`/`t4s` becomes an
    /// optimize request when `optimize_default` is set.
    pub fn parse(text: &str, optimize_default: bool) -> Result<Self, ConfigError> {
        let invalid = || ConfigError::InvalidEstimator(text.to_owned());
        let (kind_text, param_text) = match text.split_once(':') {
            Some((k, p)) => (k, Some(p.trim())),
            None => (text, None),
        };
        let kind: EstimatorKind = kind_text.parse().map_err(|_| invalid())?;
        let parameter = match (kind.parameter_name(), param_text) {
            (None, None) => ParameterChoice::NotApplicable,
            (None, Some(_)) => return Err(invalid()),
            (Some(_), Some(p)) if p.eq_ignore_ascii_case("optimize") => ParameterChoice::Optimize,
            (Some(_), Some(p)) => {
                let value: f64 = p.parse().map_err(|_| invalid())?;
                if !value.is_finite() {
                    return Err(invalid());
                }
                ParameterChoice::Fixed(value)
            }
            (Some(_), None) if optimize_default => ParameterChoice::Optimize,
            (Some(_), None) => return Err(ConfigError::MissingParameter(kind)),
        };
        Ok(Self { kind, parameter })
    }

    pub fn all_optimized() -> Vec<Self> {
        EstimatorKind::ALL
            .iter()
            .map(|&kind| EstimatorRequest {
                kind,
                parameter: if kind.parameter_name().is_some() {
                    ParameterChoice::Optimize
                } else {
                    ParameterChoice::NotApplicable
                },
            })
            .collect()
    }
}

impl fmt::Display for EstimatorRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter {
            ParameterChoice::NotApplicable => write!(f, "{}", self.kind),
            ParameterChoice::Fixed(v) => write!(f, "{}:{v}", self.kind),
            ParameterChoice::Optimize => write!(f, "{}:optimize", self.kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderSelection {
    First,
    Second,
    Both,
}

impl OrderSelection {
    pub fn orders(self) -> Vec<Order> {
        match self {
            OrderSelection::First => vec![Order::First],
            OrderSelection::Second => vec![Order::Second],
            OrderSelection::Both => vec![Order::First, Order::Second],
        }
    }
}

impl FromStr for OrderSelection {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "first" => Ok(OrderSelection::First),
            "2" | "second" => Ok(OrderSelection::Second),
            "both" => Ok(OrderSelection::Both),
            _ => Err(ConfigError::InvalidValue {
                field: "order",
                value: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    None,
    Exact,
    Mc,
}

impl FromStr for VerifyMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(VerifyMode::None),
            "exact" => Ok(VerifyMode::Exact),
            "mc" => Ok(VerifyMode::Mc),
            _ => Err(ConfigError::InvalidValue {
                field: "verify",
                value: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(ConfigError::InvalidValue {
                field: "format",
                value: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub population_path: PathBuf,
    pub sample_sizes: BTreeMap<String, usize>,
    pub estimators: Vec<EstimatorRequest>,
    pub order: OrderSelection,
    pub verify: VerifyMode,
    pub replicates: Option<usize>,
    pub seed: u64,
    pub output_format: OutputFormat,
    pub printed_mode: bool,
    pub max_enum: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.verify, self.replicates) {
            (VerifyMode::Mc, None) => Err(ConfigError::MissingReplicates),
            (VerifyMode::Mc, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(ConfigError::UnexpectedReplicates),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OrderValue {
    Number(u8),
    Text(String),
}

/// Raw contents of a config file, every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    population: Option<PathBuf>,
    #[serde(default)]
    sample_sizes: BTreeMap<String, usize>,
    estimators: Option<Vec<String>>,
    order: Option<OrderValue>,
    verify: Option<String>,
    replicates: Option<usize>,
    seed: Option<u64>,
    format: Option<String>,
    printed_mode: Option<bool>,
    max_enum: Option<u64>,
    optimize: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file; a relative population path is resolved against
    /// the file's directory.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut file = Self::parse(&text)?;
        if let (Some(pop), Some(dir)) = (file.population.as_mut(), path.parent()) {
            if pop.is_relative() {
                *pop = dir.join(&*pop);
            }
        }
        Ok(file)
    }
}

/// Command-line overrides; `None`/empty means "keep the file value".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub population: Option<PathBuf>,
    /// `STRATUM=SIZE` entries.
    pub sample_sizes: Vec<String>,
    pub estimators: Vec<String>,
    pub order: Option<String>,
    pub optimize: bool,
    pub verify: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub printed_mode: bool,
    pub max_enum: Option<u64>,
}

/// Merges file values with command-line overrides and validates the result.
pub fn resolve(file: ConfigFile, cli: Overrides) -> Result<RunConfig, ConfigError> {
    let population_path = cli
        .population
        .or(file.population)
        .ok_or(ConfigError::MissingPopulation)?;

    let mut sample_sizes = file.sample_sizes;
    for entry in &cli.sample_sizes {
        let (label, size) = entry
            .split_once('=')
            .ok_or_else(|| ConfigError::InvalidSampleSize(entry.clone()))?;
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| ConfigError::InvalidSampleSize(entry.clone()))?;
        sample_sizes.insert(label.trim().to_owned(), size);
    }

    let optimize_default = cli.optimize || file.optimize.unwrap_or(false);
    let texts = if cli.estimators.is_empty() {
        file.estimators
    } else {
        Some(cli.estimators)
    };
    let estimators = match texts {
        None => EstimatorRequest::all_optimized(),
        Some(texts) => texts
            .iter()
            .map(|t| EstimatorRequest::parse(t, optimize_default))
            .collect::<Result<Vec<_>, _>>()?,
    };

    let order = match (cli.order, file.order) {
        (Some(text), _) | (None, Some(OrderValue::Text(text))) => text.parse()?,
        (None, Some(OrderValue::Number(n))) => n.to_string().parse()?,
        (None, None) => OrderSelection::Both,
    };
    let verify = match cli.verify.or(file.verify) {
        Some(text) => text.parse()?,
        None => VerifyMode::None,
    };
    let output_format = match cli.format.or(file.format) {
        Some(text) => text.parse()?,
        None => OutputFormat::Table,
    };

    let config = RunConfig {
        population_path,
        sample_sizes,
        estimators,
        order,
        verify,
        replicates: cli.replicates.or(file.replicates),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        output_format,
        printed_mode: cli.printed_mode || file.printed_mode.unwrap_or(false),
        max_enum: cli
            .max_enum
            .or(file.max_enum)
            .unwrap_or(DEFAULT_ENUMERATION_LIMIT),
    };
    config.validate()?;
    Ok(config)
}

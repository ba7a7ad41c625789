//! Comparison report and its table / CSV / JSON renderings.
//!
//! JSON numbers are written with 17 significant digits so that every float
//! survives a write/read cycle bit-for-bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::approx::Order;
use crate::config::{OutputFormat, VerifyMode};
use crate::estimator::EstimatorKind;
use crate::moments::VTable;
use crate::optimize::OptimizationOutcome;
use crate::verify::McResult;

/// A float serialized as a JSON number with 17 significant digits
/// (`null` when not finite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num17(pub f64);

impl Serialize for Num17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// `#[serde(with = "num17")]` for `f64` fields.
pub mod num17 {
    use serde::{Deserializer, Serialize, Serializer};

    use super::Num17;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Num17(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::null_as_nan(d)
    }
}

/// `#[serde(with = "opt_num17")]` for `Option<f64>` fields.
pub mod opt_num17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Num17;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Num17).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

/// `#[serde(with = "num17_pair")]` for `Option<(f64, f64)>` fields.
pub mod num17_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Num17;

    pub fn serialize<S: Serializer>(v: &Option<(f64, f64)>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|(a, b)| [Num17(a), Num17(b)]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(f64, f64)>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[a, b]| (a, b)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumInfo {
    pub label: String,
    pub capital_n: usize,
    pub small_n: usize,
    #[serde(with = "num17")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub estimator: EstimatorKind,
    pub parameter_name: String,
    pub outcome: OptimizationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub population: String,
    pub strata: Vec<StratumInfo>,
    pub weight_definition: String,
    #[serde(with = "num17")]
    pub y_mean: f64,
    #[serde(with = "num17")]
    pub x_mean: f64,
    pub v_table: VTable,
    /// Order-4 entries without cross-stratum terms, reported in printed mode.
    pub v_table_within_stratum: Option<VTable>,
    pub orders: Vec<Order>,
    pub verify: VerifyMode,
    pub replicates: Option<usize>,
    pub seed: u64,
    pub printed_mode: bool,
    pub max_enum: u64,
    pub enumeration_size: Option<u64>,
    pub corrections: Vec<String>,
    pub optimizations: Vec<OptimizationRecord>,
    pub warnings: Vec<String>,
}

/// Printed-formula columns for t1s/t2s with their deltas from the derived
/// engine (`derived - printed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedColumns {
    #[serde(with = "num17")]
    pub bias2: f64,
    #[serde(with = "num17")]
    pub mse2: f64,
    #[serde(with = "num17")]
    pub delta_bias2: f64,
    #[serde(with = "num17")]
    pub delta_mse2: f64,
    /// Second-order values from the expansion with the printed series
    /// coefficients (t1s only).
    #[serde(with = "opt_num17")]
    pub coefficient_bias2: Option<f64>,
    #[serde(with = "opt_num17")]
    pub coefficient_mse2: Option<f64>,
    #[serde(with = "opt_num17")]
    pub coefficient_delta_bias2: Option<f64>,
    #[serde(with = "opt_num17")]
    pub coefficient_delta_mse2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactColumns {
    #[serde(with = "opt_num17")]
    pub parameter: Option<f64>,
    #[serde(with = "num17")]
    pub bias: f64,
    #[serde(with = "num17")]
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McColumns {
    #[serde(with = "opt_num17")]
    pub parameter: Option<f64>,
    pub result: McResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimator: EstimatorKind,
    pub parameter_name: Option<String>,
    #[serde(with = "opt_num17")]
    pub parameter1: Option<f64>,
    #[serde(with = "opt_num17")]
    pub parameter2: Option<f64>,
    #[serde(with = "opt_num17")]
    pub bias1: Option<f64>,
    #[serde(with = "opt_num17")]
    pub bias2: Option<f64>,
    #[serde(with = "opt_num17")]
    pub mse1: Option<f64>,
    #[serde(with = "opt_num17")]
    pub mse2: Option<f64>,
    pub printed: Option<PrintedColumns>,
    pub exact: Option<ExactColumns>,
    pub monte_carlo: Option<McColumns>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

/// Flag attached to rows whose second-order MSE is negative.
pub const NEGATIVE_MSE_FLAG: &str = "negative_mse2";

impl ReportRow {
    /// `(metric, value)` pairs in CSV order; the metric list depends only on
    /// the report settings, so every row yields the same names.
    pub fn metrics(&self, meta: &ReportMetadata) -> Vec<(&'static str, Option<f64>)> {
        let mut out = Vec::new();
        if meta.orders.contains(&Order::First) {
            out.push(("parameter1", self.parameter1));
            out.push(("bias1", self.bias1));
            out.push(("mse1", self.mse1));
        }
        if meta.orders.contains(&Order::Second) {
            out.push(("parameter2", self.parameter2));
            out.push(("bias2", self.bias2));
            out.push(("mse2", self.mse2));
        }
        if meta.printed_mode {
            let p = self.printed.as_ref();
            out.push(("printed_bias2", p.map(|p| p.bias2)));
            out.push(("printed_mse2", p.map(|p| p.mse2)));
            out.push(("printed_delta_bias2", p.map(|p| p.delta_bias2)));
            out.push(("printed_delta_mse2", p.map(|p| p.delta_mse2)));
            out.push(("coefficient_bias2", p.and_then(|p| p.coefficient_bias2)));
            out.push(("coefficient_mse2", p.and_then(|p| p.coefficient_mse2)));
        }
        match meta.verify {
            VerifyMode::None => {}
            VerifyMode::Exact => {
                let e = self.exact.as_ref();
                out.push(("exact_bias", e.map(|e| e.bias)));
                out.push(("exact_mse", e.map(|e| e.mse)));
            }
            VerifyMode::Mc => {
                let m = self.monte_carlo.as_ref().map(|m| &m.result);
                out.push(("mc_bias", m.map(|m| m.bias.mean)));
                out.push(("mc_bias_se", m.map(|m| m.bias.standard_error)));
                out.push(("mc_mse", m.map(|m| m.mse.mean)));
                out.push(("mc_mse_se", m.map(|m| m.mse.standard_error)));
            }
        }
        out
    }
}

pub fn emit(report: &ComparisonReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => to_csv(report),
        OutputFormat::Table => to_table(report),
    }
}

pub fn to_json(report: &ComparisonReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<ComparisonReport, serde_json::Error> {
    serde_json::from_str(text)
}

fn csv_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// One record per (estimator, metric).
pub fn to_csv(report: &ComparisonReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["estimator", "metric", "value"])
        .expect("in-memory write");
    for row in &report.rows {
        for (metric, value) in row.metrics(&report.metadata) {
            writer
                .write_record([row.estimator.label(), metric, &csv_value(value)])
                .expect("in-memory write");
        }
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.9e}"),
        None => "-".to_owned(),
    }
}

pub fn to_table(report: &ComparisonReport) -> String {
    let meta = &report.metadata;
    let mut out = String::new();
    let w = 18;
    let _ = writeln!(out, "Bias and MSE of estimators");
    let _ = writeln!(
        out,
        "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}",
        "Estimator",
        "Param (1st)",
        "Param (2nd)",
        "Bias (1st)",
        "Bias (2nd)",
        "MSE (1st)",
        "MSE (2nd)"
    );
    for row in &report.rows {
        let flag = if row.flags.iter().any(|f| f == NEGATIVE_MSE_FLAG) {
            "!"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}{flag}",
            row.estimator.label(),
            cell(row.parameter1),
            cell(row.parameter2),
            cell(row.bias1),
            cell(row.bias2),
            cell(row.mse1),
            cell(row.mse2),
        );
    }
    if report
        .rows
        .iter()
        .any(|r| r.flags.iter().any(|f| f == NEGATIVE_MSE_FLAG))
    {
        let _ = writeln!(
            out,
            "! negative second-order MSE: the approximation has broken down"
        );
    }

    if meta.printed_mode {
        let _ = writeln!(
            out,
            "\nPrinted second-order formulas (delta = derived - printed)"
        );
        let _ = writeln!(
            out,
            "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}",
            "Estimator", "Bias (printed)", "MSE (printed)", "Delta bias", "Delta MSE"
        );
        for row in &report.rows {
            if let Some(p) = &row.printed {
                let _ = writeln!(
                    out,
                    "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}",
                    row.estimator.label(),
                    cell(Some(p.bias2)),
                    cell(Some(p.mse2)),
                    cell(Some(p.delta_bias2)),
                    cell(Some(p.delta_mse2)),
                );
                if let (Some(b), Some(m), Some(db), Some(dm)) = (
                    p.coefficient_bias2,
                    p.coefficient_mse2,
                    p.coefficient_delta_bias2,
                    p.coefficient_delta_mse2,
                ) {
                    let _ = writeln!(
                        out,
                        "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}   (printed series coefficients)",
                        "",
                        cell(Some(b)),
                        cell(Some(m)),
                        cell(Some(db)),
                        cell(Some(dm)),
                    );
                }
            }
        }
    }

    match meta.verify {
        VerifyMode::None => {}
        VerifyMode::Exact => {
            let size = meta
                .enumeration_size
                .map_or_else(String::new, |s| format!(" over {s} samples"));
            let _ = writeln!(out, "\nExact design values (enumeration{size})");
            let _ = writeln!(
                out,
                "{:<10}{:>w$}{:>w$}{:>w$}",
                "Estimator", "Parameter", "Bias", "MSE"
            );
            for row in &report.rows {
                if let Some(e) = &row.exact {
                    let _ = writeln!(
                        out,
                        "{:<10}{:>w$}{:>w$}{:>w$}",
                        row.estimator.label(),
                        cell(e.parameter),
                        cell(Some(e.bias)),
                        cell(Some(e.mse))
                    );
                }
            }
        }
        VerifyMode::Mc => {
            let _ = writeln!(
                out,
                "\nMonte Carlo ({} replicates, seed {})",
                meta.replicates.unwrap_or(0),
                meta.seed
            );
            let _ = writeln!(
                out,
                "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}{:>9}",
                "Estimator", "Parameter", "Bias", "SE", "MSE", "SE", "Skipped"
            );
            for row in &report.rows {
                if let Some(m) = &row.monte_carlo {
                    let r = &m.result;
                    let _ = writeln!(
                        out,
                        "{:<10}{:>w$}{:>w$}{:>w$}{:>w$}{:>w$}{:>9}",
                        row.estimator.label(),
                        cell(m.parameter),
                        cell(Some(r.bias.mean)),
                        cell(Some(r.bias.standard_error)),
                        cell(Some(r.mse.mean)),
                        cell(Some(r.mse.standard_error)),
                        r.skipped
                    );
                }
            }
        }
    }

    if !meta.optimizations.is_empty() {
        let _ = writeln!(out, "\nTuning");
        for rec in &meta.optimizations {
            let o = &rec.outcome;
            let bracket = o.bracket.map_or_else(
                || "closed form".to_owned(),
                |(a, b)| format!("bracket [{a}, {b}], {} iterations", o.iterations),
            );
            let _ = writeln!(
                out,
                "  {} order {}: {} = {:.12}  MSE = {:.9e}  ({bracket}){}",
                rec.estimator,
                u8::from(o.order),
                rec.parameter_name,
                o.parameter,
                o.objective,
                if o.negative_objective { "  !" } else { "" }
            );
        }
    }

    let _ = writeln!(out, "\nPopulation: {}", meta.population);
    let _ = writeln!(
        out,
        "  Ybar = {:.12}  Xbar = {:.12}",
        meta.y_mean, meta.x_mean
    );
    let _ = writeln!(out, "  weights: {}", meta.weight_definition);
    for s in &meta.strata {
        let _ = writeln!(
            out,
            "  stratum {}: N = {}, n = {}, W = {:.9}",
            s.label, s.capital_n, s.small_n, s.weight
        );
    }
    let _ = writeln!(out, "\nV-table");
    for (key, value) in meta.v_table.iter() {
        let _ = writeln!(out, "  {key} = {value:.12e}");
    }
    let _ = writeln!(out, "\nCorrections applied");
    for c in &meta.corrections {
        let _ = writeln!(out, "  - {c}");
    }
    for warning in &meta.warnings {
        let _ = writeln!(out, "warning: {warning}");
    }
    out
}

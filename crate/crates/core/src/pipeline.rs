//! load -> V-table -> tuning -> bias/MSE -> verification -> report.

use std::fs::File;

use crate::approx::{bias, mse, printed_coefficient_second_order_t1s, printed_second_order, Order};
use crate::config::{ParameterChoice, RunConfig, VerifyMode};
use crate::error::Error;
use crate::estimator::{EstimatorKind, EstimatorSpec};
use crate::moments::{v_table, v_table_to_order, v_table_within_stratum, MomentOrder, VTable};
use crate::optimize::optimize;
use crate::population::{load_population, StratifiedPopulation, WEIGHT_DEFINITION};
use crate::report::{
    ComparisonReport, ExactColumns, McColumns, OptimizationRecord, PrintedColumns, ReportMetadata,
    ReportRow, StratumInfo, NEGATIVE_MSE_FLAG,
};
use crate::verify::{exact_bias_mse, monte_carlo, ExactDesignDistribution};

/// Deviations of the derived engine from the equations as printed; every
/// report carries the full list.
pub const CORRECTIONS: &[&str] = &[
    "stratum weights W_h = N_h / N (printed w_h = N_h / n_h cannot make ybar_st unbiased)",
    "first-order MSE of t1s uses V02 coefficient 1/4 (printed 1/2)",
    "V13 and V22 use C11*C02 and C20*C02 + 2*C11^2 in place of the printed first-central-moment factors",
    "order-4 V entries include cross-stratum pair terms, exact for more than one stratum",
    "k2 numerator grouped as (N-n)[N(N+1) - 6n(N-n)], fixed by enumeration",
    "t1s series coefficients of e1^3 and e1^4 are -13/48 and 73/384 (printed -7/48 and 25/384)",
];

pub fn load(config: &RunConfig) -> Result<StratifiedPopulation, Error> {
    let file = File::open(&config.population_path).map_err(|e| {
        Error::Io(format!(
            "cannot open {}: {e}",
            config.population_path.display()
        ))
    })?;
    let pop = load_population(file, &config.sample_sizes)?;
    pop.require_positive_auxiliary()?;
    Ok(pop)
}

pub fn run(config: &RunConfig) -> Result<ComparisonReport, Error> {
    config.validate()?;
    let pop = load(config)?;
    run_on(config, &pop)
}

/// Runs the pipeline on an already loaded population.
pub fn run_on(config: &RunConfig, pop: &StratifiedPopulation) -> Result<ComparisonReport, Error> {
    let orders = config.order.orders();
    let v = table_for(config, pop)?;
    let within = if config.printed_mode && pop.strata().len() > 1 {
        Some(v_table_within_stratum(pop)?)
    } else {
        None
    };

    let enumeration_size = match config.verify {
        VerifyMode::Exact => Some(ExactDesignDistribution::new(pop, config.max_enum)?.size()),
        _ => None,
    };

    let mut optimizations = Vec::new();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for request in &config.estimators {
        let kind = request.kind;
        let mut parameter_at = |order: Order| -> Result<Option<f64>, Error> {
            Ok(match request.parameter {
                ParameterChoice::NotApplicable => None,
                ParameterChoice::Fixed(p) => Some(p),
                ParameterChoice::Optimize => {
                    let outcome = optimize(kind, &v, order)?;
                    if outcome.negative_objective {
                        warnings.push(format!(
                            "{kind}: minimized order-{} MSE is negative ({:e})",
                            u8::from(order),
                            outcome.objective
                        ));
                    }
                    let p = outcome.parameter;
                    optimizations.push(OptimizationRecord {
                        estimator: kind,
                        parameter_name: kind.parameter_name().unwrap_or_default().to_owned(),
                        outcome,
                    });
                    Some(p)
                }
            })
        };
        let mut row = ReportRow {
            estimator: kind,
            parameter_name: kind.parameter_name().map(str::to_owned),
            parameter1: None,
            parameter2: None,
            bias1: None,
            bias2: None,
            mse1: None,
            mse2: None,
            printed: None,
            exact: None,
            monte_carlo: None,
            flags: Vec::new(),
        };
        let spec_for = |p: Option<f64>| match p {
            Some(p) => EstimatorSpec::with_parameter(kind, p),
            None => EstimatorSpec::with_parameter(kind, 0.0),
        };
        for &order in &orders {
            let p = parameter_at(order)?;
            let spec = spec_for(p);
            let b = bias(&spec, &v, order)?;
            let m = mse(&spec, &v, order)?;
            match order {
                Order::First => (row.parameter1, row.bias1, row.mse1) = (p, Some(b), Some(m)),
                Order::Second => (row.parameter2, row.bias2, row.mse2) = (p, Some(b), Some(m)),
            }
        }
        if row.mse2.is_some_and(|m| m < 0.0) {
            row.flags.push(NEGATIVE_MSE_FLAG.to_owned());
            warnings.push(format!("{kind}: second-order MSE is negative"));
        }

        if config.printed_mode && matches!(kind, EstimatorKind::T1S | EstimatorKind::T2S) {
            let spec = spec_for(None);
            let (pb, pm) = printed_second_order(&spec, &v)?;
            let db = bias(&spec, &v, Order::Second)?;
            let dm = mse(&spec, &v, Order::Second)?;
            let mut printed = PrintedColumns {
                bias2: pb,
                mse2: pm,
                delta_bias2: db - pb,
                delta_mse2: dm - pm,
                coefficient_bias2: None,
                coefficient_mse2: None,
                coefficient_delta_bias2: None,
                coefficient_delta_mse2: None,
            };
            if kind == EstimatorKind::T1S {
                let (cb, cm) = printed_coefficient_second_order_t1s(&v)?;
                printed.coefficient_bias2 = Some(cb);
                printed.coefficient_mse2 = Some(cm);
                printed.coefficient_delta_bias2 = Some(db - cb);
                printed.coefficient_delta_mse2 = Some(dm - cm);
            }
            row.printed = Some(printed);
        }

        let verify_parameter = row.parameter2.or(row.parameter1);
        let verify_spec = spec_for(verify_parameter);
        match config.verify {
            VerifyMode::None => {}
            VerifyMode::Exact => {
                let (b, m) = exact_bias_mse(pop, &verify_spec, config.max_enum)?;
                row.exact = Some(ExactColumns {
                    parameter: verify_parameter,
                    bias: b,
                    mse: m,
                });
            }
            VerifyMode::Mc => {
                let replicates = config.replicates.unwrap_or(0);
                let result = monte_carlo(pop, &verify_spec, replicates, config.seed)?;
                if result.skipped > 0 {
                    warnings.push(format!(
                        "{kind}: {} Monte Carlo replicates skipped (estimator undefined)",
                        result.skipped
                    ));
                }
                row.monte_carlo = Some(McColumns {
                    parameter: verify_parameter,
                    result,
                });
            }
        }
        rows.push(row);
    }

    let metadata = ReportMetadata {
        tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        population: config.population_path.display().to_string(),
        strata: pop
            .strata()
            .iter()
            .zip(pop.weights())
            .map(|(s, &w)| StratumInfo {
                label: s.id().to_owned(),
                capital_n: s.capital_n(),
                small_n: s.small_n(),
                weight: w,
            })
            .collect(),
        weight_definition: WEIGHT_DEFINITION.to_owned(),
        y_mean: pop.grand_y_mean(),
        x_mean: pop.grand_x_mean(),
        v_table: v,
        v_table_within_stratum: within,
        orders,
        verify: config.verify,
        replicates: config.replicates,
        seed: config.seed,
        printed_mode: config.printed_mode,
        max_enum: config.max_enum,
        enumeration_size,
        corrections: CORRECTIONS.iter().map(|s| (*s).to_owned()).collect(),
        optimizations,
        warnings,
    };
    Ok(ComparisonReport { metadata, rows })
}

/// The V-table used by [`run_on`] for `config`.
pub fn table_for(config: &RunConfig, pop: &StratifiedPopulation) -> Result<VTable, Error> {
    if config.order.orders().contains(&Order::Second) || config.printed_mode {
        Ok(v_table(pop)?)
    } else {
        Ok(v_table_to_order(pop, MomentOrder::Second)?)
    }
}

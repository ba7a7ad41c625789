//! Choice of the tuning constants `alpha` (t3s) and `theta` (t4s).
//!
//! First order has closed forms, `alpha = 2 V11 / V02` and
//! `theta = V11 / V02 + 1/2`. At second order the MSE is a polynomial in the
//! parameter (quartic in `alpha`, quadratic in `theta`); it is minimized by a
//! uniform grid over a fixed bracket followed by golden-section refinement
//! around the best grid point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{mse_curve, ApproxError, Order, ParamCurve};
use crate::estimator::EstimatorKind;
use crate::moments::{VKey, VTable};
use crate::report::{num17, num17_pair};

pub const ALPHA_BRACKET: (f64, f64) = (-4.0, 4.0);
pub const THETA_BRACKET: (f64, f64) = (-2.0, 3.0);
pub const GRID_POINTS: usize = 801;
pub const GOLDEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("degenerate auxiliary variance: V02 = 0, no informative tuning parameter exists")]
    DegenerateAuxiliaryVariance,
    #[error("{0} has no tuning parameter")]
    NoParameter(EstimatorKind),
    #[error(transparent)]
    Approximation(#[from] ApproxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationOutcome {
    #[serde(with = "num17")]
    pub parameter: f64,
    /// MSE at `parameter`.
    #[serde(with = "num17")]
    pub objective: f64,
    pub order: Order,
    pub method: Method,
    /// Interval searched; `None` for closed forms.
    #[serde(with = "num17_pair")]
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
    /// The minimized MSE approximation is negative.
    pub negative_objective: bool,
}

pub fn optimize_alpha(v: &VTable, order: Order) -> Result<OptimizationOutcome, OptimizeError> {
    optimize(EstimatorKind::T3S, v, order)
}

pub fn optimize_theta(v: &VTable, order: Order) -> Result<OptimizationOutcome, OptimizeError> {
    optimize(EstimatorKind::T4S, v, order)
}

/// Optimizes the tuning parameter of `kind` (t3s or t4s).
pub fn optimize(
    kind: EstimatorKind,
    v: &VTable,
    order: Order,
) -> Result<OptimizationOutcome, OptimizeError> {
    let bracket = match kind {
        EstimatorKind::T3S => ALPHA_BRACKET,
        EstimatorKind::T4S => THETA_BRACKET,
        other => return Err(OptimizeError::NoParameter(other)),
    };
    let v02 = v
        .get(VKey::new(0, 2))
        .ok_or(ApproxError::MissingMoment(VKey::new(0, 2)))?;
    let v11 = v
        .get(VKey::new(1, 1))
        .ok_or(ApproxError::MissingMoment(VKey::new(1, 1)))?;
    if v02 == 0.0 {
        return Err(OptimizeError::DegenerateAuxiliaryVariance);
    }
    let curve = mse_curve(kind, v, order)?;
    let outcome = match order {
        Order::First => {
            let parameter = match kind {
                EstimatorKind::T3S => 2.0 * v11 / v02,
                _ => v11 / v02 + 0.5,
            };
            let objective = curve.eval(parameter);
            OptimizationOutcome {
                parameter,
                objective,
                order,
                method: Method::ClosedForm,
                bracket: None,
                iterations: 0,
                negative_objective: objective < 0.0,
            }
        }
        Order::Second => {
            let (parameter, iterations) = grid_then_golden(|p| curve.eval(p), bracket);
            let objective = curve.eval(parameter);
            OptimizationOutcome {
                parameter,
                objective,
                order,
                method: Method::Numeric,
                bracket: Some(bracket),
                iterations,
                negative_objective: objective < 0.0,
            }
        }
    };
    Ok(outcome)
}

/// The MSE objective minimized by [`optimize`], as a polynomial in the
/// parameter.
pub fn objective(kind: EstimatorKind, v: &VTable, order: Order) -> Result<ParamCurve, ApproxError> {
    mse_curve(kind, v, order)
}

/// Grid search over `GRID_POINTS` points of `bracket` (ties toward smaller
/// `|p|`, then lower grid index), then golden-section refinement on the two
/// neighbouring grid cells down to width `GOLDEN_TOLERANCE`. Returns the
/// minimizer and the number of golden-section iterations.
pub fn grid_then_golden(f: impl Fn(f64) -> f64, bracket: (f64, f64)) -> (f64, usize) {
    let (lo, hi) = bracket;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid_point = |i: usize| {
        if i == GRID_POINTS - 1 {
            hi
        } else {
            lo + step * i as f64
        }
    };

    let mut best_index = 0;
    let mut best_value = f(grid_point(0));
    for i in 1..GRID_POINTS {
        let p = grid_point(i);
        let value = f(p);
        let better =
            value < best_value || (value == best_value && p.abs() < grid_point(best_index).abs());
        if better {
            best_index = i;
            best_value = value;
        }
    }
    let best = grid_point(best_index);
    let a = grid_point(best_index.saturating_sub(1));
    let b = grid_point((best_index + 1).min(GRID_POINTS - 1));
    let (refined, iterations) = golden_section(&f, a, b, GOLDEN_TOLERANCE);
    if f(refined) <= best_value {
        (refined, iterations)
    } else {
        (best, iterations)
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while (b - a) > tol {
        iterations += 1;
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        if iterations > 500 {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    // pick the best of the final candidates
    let candidates = [(mid, f(mid)), (x1, f1), (x2, f2)];
    let best = candidates
        .iter()
        .copied()
        .fold(candidates[0], |acc, c| if c.1 < acc.1 { c } else { acc });
    (best.0, iterations)
}

//! First- and second-order bias and MSE from truncated series expansions.
//!
//! Writing `ybar_st = Ybar (1 + e0)` and `xbar_st = Xbar (1 + e1)`, every
//! estimator satisfies `t / Ybar - 1 = (1 + e0) g(e1) - 1` with
//! `g(e1) = exp(-p e1 / (2 + e1))` (`p = 1` for t1s, `-1` for t2s, `alpha` for
//! t3s) or the `theta`-mixture of the `p = +-1` branches for t4s. The
//! order-`k` bias is `Ybar E[expansion]` truncated at degree `2k`; the MSE is
//! `Ybar^2 E[expansion^2]` truncated at degree `2k`. Expectations map
//! `e0^a e1^b` to `V_ab`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{EstimatorKind, EstimatorSpec};
use crate::moments::{VKey, VTable};
use crate::numeric::CompensatedSum;
use crate::series::{
    rational, rational_from_f64, ParamPoly, Rational, SeriesPolynomial, MAX_DEGREE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("moment {0} is required but not present in the V-table")]
    MissingMoment(VKey),
    #[error("monomial e0^{a} e1^{b} has no V-table entry")]
    UnsupportedMonomial { a: u8, b: u8 },
    #[error("printed second-order formulas are only available for t1s and t2s, not {0}")]
    PrintedModeUnavailable(EstimatorKind),
}

/// Order of approximation: series truncated at total degree 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn degree(self) -> u8 {
        match self {
            Order::First => 2,
            Order::Second => 4,
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        match o {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(format!("order must be 1 or 2, found {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproximationMode {
    /// Internally derived series expansion.
    Derived,
    /// Literal second-order formulas as printed (t1s, t2s only).
    Printed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationResult {
    pub estimator: EstimatorSpec,
    pub bias1: f64,
    pub mse1: f64,
    pub bias2: f64,
    pub mse2: f64,
    pub mode: ApproximationMode,
}

/// `-e1 / (2 + e1)` truncated at degree 4: `sum_k (-1)^k e1^k / 2^k`.
fn exponent_series() -> SeriesPolynomial<ParamPoly> {
    let mut u = SeriesPolynomial::zero(MAX_DEGREE);
    for k in 1..=MAX_DEGREE {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        u.add_term(0, k, ParamPoly::constant(rational(sign, 1 << k)));
    }
    u
}

/// `exp(scale * u)` for the exponent series `u`.
fn exp_of_scaled(scale: ParamPoly) -> SeriesPolynomial<ParamPoly> {
    let scaled = exponent_series().scale(&scale);
    let mut factorial = 1i64;
    let coeffs: Vec<ParamPoly> = (0..=i64::from(MAX_DEGREE))
        .map(|j| {
            if j > 0 {
                factorial *= j;
            }
            ParamPoly::constant(rational(1, factorial))
        })
        .collect();
    scaled.compose_power_series(&coeffs)
}

/// `g(e1)` for an estimator kind, symbolic in its tuning parameter.
pub fn auxiliary_factor(kind: EstimatorKind) -> SeriesPolynomial<ParamPoly> {
    let one = ParamPoly::one();
    match kind {
        EstimatorKind::T1S => exp_of_scaled(one),
        EstimatorKind::T2S => exp_of_scaled(-one),
        EstimatorKind::T3S => exp_of_scaled(ParamPoly::param()),
        EstimatorKind::T4S => {
            let theta = ParamPoly::param();
            let ratio = exp_of_scaled(one.clone()).scale(&theta);
            let product = exp_of_scaled(-one.clone()).scale(&(one - theta));
            ratio.add(&product)
        }
    }
}

/// Series of `t / Ybar - 1` in `(e0, e1)`, truncated at degree 4, with the
/// tuning parameter left symbolic.
pub fn expand_kind(kind: EstimatorKind) -> SeriesPolynomial<ParamPoly> {
    let one_plus_e0 = SeriesPolynomial::constant(ParamPoly::one(), MAX_DEGREE).add(
        &SeriesPolynomial::monomial(1, 0, ParamPoly::one(), MAX_DEGREE),
    );
    let minus_one = SeriesPolynomial::constant(-ParamPoly::one(), MAX_DEGREE);
    one_plus_e0.mul(&auxiliary_factor(kind)).add(&minus_one)
}

/// Expansion of `spec` with its parameter bound to the exact value of the
/// float it carries.
pub fn expand_estimator(spec: &EstimatorSpec) -> SeriesPolynomial<Rational> {
    let symbolic = expand_kind(spec.kind());
    let p = spec
        .parameter()
        .map_or_else(Rational::zero, rational_from_f64);
    symbolic.bind_rational(&p)
}

/// `E[poly]` as a linear form in the V-table entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentForm {
    pub constant: ParamPoly,
    pub terms: BTreeMap<VKey, ParamPoly>,
}

impl MomentForm {
    pub fn coefficient(&self, key: VKey) -> ParamPoly {
        self.terms.get(&key).cloned().unwrap_or_default()
    }

    /// Collapses the form at `v` into a polynomial in the tuning parameter.
    pub fn curve(&self, v: &VTable) -> Result<ParamCurve, ApproxError> {
        let len = self
            .terms
            .values()
            .chain(std::iter::once(&self.constant))
            .map(|p| p.coeffs().len())
            .max()
            .unwrap_or(0);
        let mut acc = vec![CompensatedSum::new(); len];
        for (power, c) in self.constant.to_f64().into_iter().enumerate() {
            acc[power].add(c);
        }
        for (key, poly) in &self.terms {
            let moment = v.get(*key).ok_or(ApproxError::MissingMoment(*key))?;
            for (power, c) in poly.to_f64().into_iter().enumerate() {
                acc[power].add(c * moment);
            }
        }
        Ok(ParamCurve {
            coeffs: acc.iter().map(CompensatedSum::value).collect(),
        })
    }
}

/// Polynomial in the tuning parameter with float coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCurve {
    coeffs: Vec<f64>,
}

impl ParamCurve {
    pub fn eval(&self, p: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * p + c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(mut self, k: f64) -> Self {
        for c in &mut self.coeffs {
            *c *= k;
        }
        self
    }
}

/// Symbolic expectation: `e0^a e1^b -> V_ab`, constants kept, first-order
/// monomials vanish.
pub fn expectation_form(poly: &SeriesPolynomial<ParamPoly>) -> Result<MomentForm, ApproxError> {
    let mut form = MomentForm {
        constant: ParamPoly::zero(),
        terms: BTreeMap::new(),
    };
    for ((a, b), c) in poly.terms() {
        match a + b {
            0 => form.constant = form.constant.clone() + c.clone(),
            1 => {}
            _ => {
                let key = VKey::new(a, b);
                if !VKey::ALL.contains(&key) {
                    return Err(ApproxError::UnsupportedMonomial { a, b });
                }
                let slot = form.terms.entry(key).or_default();
                *slot = slot.clone() + c.clone();
            }
        }
    }
    form.terms.retain(|_, c| !c.is_zero());
    Ok(form)
}

/// `E[poly]` for a polynomial with float coefficients.
pub fn expectation_of(poly: &SeriesPolynomial<f64>, v: &VTable) -> Result<f64, ApproxError> {
    let mut acc = CompensatedSum::new();
    for ((a, b), c) in poly.terms() {
        match a + b {
            0 => acc.add(*c),
            1 => {}
            _ => {
                let key = VKey::new(a, b);
                if !VKey::ALL.contains(&key) {
                    return Err(ApproxError::UnsupportedMonomial { a, b });
                }
                acc.add(c * v.get(key).ok_or(ApproxError::MissingMoment(key))?);
            }
        }
    }
    Ok(acc.value())
}

/// [`expectation_of`] for exact rational coefficients.
pub fn expectation_of_rational(
    poly: &SeriesPolynomial<Rational>,
    v: &VTable,
) -> Result<f64, ApproxError> {
    expectation_of(&poly.map(|c| c.to_f64().expect("finite rational")), v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Bias,
    Mse,
}

fn cached_form(kind: EstimatorKind, order: Order, metric: Metric) -> &'static MomentForm {
    static FORMS: OnceLock<BTreeMap<(EstimatorKind, u8, bool), MomentForm>> = OnceLock::new();
    let forms = FORMS.get_or_init(|| {
        let mut out = BTreeMap::new();
        for kind in EstimatorKind::ALL {
            let expansion = expand_kind(kind);
            let squared = expansion.square();
            for order in [Order::First, Order::Second] {
                let bias = expectation_form(&expansion.truncate(order.degree()))
                    .expect("expansion monomials are V-table keys");
                let mse = expectation_form(&squared.truncate(order.degree()))
                    .expect("squared expansion monomials are V-table keys");
                out.insert((kind, u8::from(order), false), bias);
                out.insert((kind, u8::from(order), true), mse);
            }
        }
        out
    });
    &forms[&(kind, u8::from(order), metric == Metric::Mse)]
}

/// Relative bias form `E[expansion]` at `order`, symbolic in the parameter.
pub fn bias_form(kind: EstimatorKind, order: Order) -> &'static MomentForm {
    cached_form(kind, order, Metric::Bias)
}

/// Relative MSE form `E[expansion^2]` at `order`, symbolic in the parameter.
pub fn mse_form(kind: EstimatorKind, order: Order) -> &'static MomentForm {
    cached_form(kind, order, Metric::Mse)
}

/// Absolute bias as a polynomial in the tuning parameter.
pub fn bias_curve(
    kind: EstimatorKind,
    v: &VTable,
    order: Order,
) -> Result<ParamCurve, ApproxError> {
    Ok(bias_form(kind, order).curve(v)?.scale(v.y_mean()))
}

/// Absolute MSE as a polynomial in the tuning parameter.
pub fn mse_curve(kind: EstimatorKind, v: &VTable, order: Order) -> Result<ParamCurve, ApproxError> {
    Ok(mse_form(kind, order)
        .curve(v)?
        .scale(v.y_mean() * v.y_mean()))
}

pub fn bias(spec: &EstimatorSpec, v: &VTable, order: Order) -> Result<f64, ApproxError> {
    Ok(bias_curve(spec.kind(), v, order)?.eval(spec.parameter().unwrap_or(0.0)))
}

pub fn mse(spec: &EstimatorSpec, v: &VTable, order: Order) -> Result<f64, ApproxError> {
    Ok(mse_curve(spec.kind(), v, order)?.eval(spec.parameter().unwrap_or(0.0)))
}

/// Bias and MSE at both orders from the derived expansion.
pub fn approximate(spec: &EstimatorSpec, v: &VTable) -> Result<ApproximationResult, ApproxError> {
    Ok(ApproximationResult {
        estimator: *spec,
        bias1: bias(spec, v, Order::First)?,
        mse1: mse(spec, v, Order::First)?,
        bias2: bias(spec, v, Order::Second)?,
        mse2: mse(spec, v, Order::Second)?,
        mode: ApproximationMode::Derived,
    })
}

/// Second-order columns from the printed formulas; first-order columns from
/// the derived engine (which agree with the printed first-order forms once
/// the t1s `V02` coefficient is read as 1/4).
pub fn approximate_printed(
    spec: &EstimatorSpec,
    v: &VTable,
) -> Result<ApproximationResult, ApproxError> {
    let (bias2, mse2) = printed_second_order(spec, v)?;
    Ok(ApproximationResult {
        estimator: *spec,
        bias1: bias(spec, v, Order::First)?,
        mse1: mse(spec, v, Order::First)?,
        bias2,
        mse2,
        mode: ApproximationMode::Printed,
    })
}

/// Literal evaluation of the printed second-order bias and MSE of t1s/t2s.
pub fn printed_second_order(spec: &EstimatorSpec, v: &VTable) -> Result<(f64, f64), ApproxError> {
    let get = |a, b| {
        let key = VKey::new(a, b);
        v.get(key).ok_or(ApproxError::MissingMoment(key))
    };
    let (v20, v02, v11) = (get(2, 0)?, get(0, 2)?, get(1, 1)?);
    let (v21, v12, v03) = (get(2, 1)?, get(1, 2)?, get(0, 3)?);
    let (v22, v13, v04) = (get(2, 2)?, get(1, 3)?, get(0, 4)?);
    let y = v.y_mean();
    match spec.kind() {
        EstimatorKind::T1S => {
            let bias = y / 2.0
                * (-v11 + 0.75 * v02 + 0.75 * v12 - 7.0 / 24.0 * v03 - 7.0 / 24.0 * v13
                    + 25.0 / 192.0 * v04);
            let mse = y
                * y
                * (v20 + 0.25 * v02 - v11 + v22 - v21 + 1.25 * v12 - 25.0 / 24.0 * v13
                    + 55.0 / 192.0 * v04);
            Ok((bias, mse))
        }
        EstimatorKind::T2S => {
            let bias = y / 2.0
                * (v11 - 0.25 * v02 - 0.25 * v12 - 5.0 / 24.0 * v13 + 1.0 / 192.0 * v04
                    - 5.0 / 24.0 * v03);
            let mse = y
                * y
                * (v20 + 0.25 * v02 + v11 + 23.0 / 192.0 * v04 - 0.125 * v03 + 0.25 * v12
                    - 1.0 / 24.0 * v13
                    + v21);
            Ok((bias, mse))
        }
        kind => Err(ApproxError::PrintedModeUnavailable(kind)),
    }
}

/// The t1s expansion with the printed third/fourth-degree coefficients
/// (`e1^3`, `e0 e1^3`: -7/48; `e1^4`: 25/384) in place of the composed ones
/// (-13/48, 73/384).
pub fn printed_coefficient_expansion_t1s() -> SeriesPolynomial<Rational> {
    let derived = expand_kind(EstimatorKind::T1S).bind_rational(&Rational::zero());
    let mut out = SeriesPolynomial::zero(MAX_DEGREE);
    for ((a, b), c) in derived.terms() {
        let replaced = match (a, b) {
            (0, 3) | (1, 3) => rational(-7, 48),
            (0, 4) => rational(25, 384),
            _ => c.clone(),
        };
        out.add_term(a, b, replaced);
    }
    out
}

/// Second-order (bias, MSE) of t1s computed from the printed-coefficient
/// expansion; differences from [`approximate`] isolate the coefficient
/// discrepancy.
pub fn printed_coefficient_second_order_t1s(v: &VTable) -> Result<(f64, f64), ApproxError> {
    let expansion = printed_coefficient_expansion_t1s();
    let y = v.y_mean();
    let bias = y * expectation_of_rational(&expansion, v)?;
    let mse = y * y * expectation_of_rational(&expansion.square(), v)?;
    Ok((bias, mse))
}

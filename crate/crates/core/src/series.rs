//! Truncated bivariate power series in `(e0, e1)`.
//!
//! Coefficients are generic: exact rationals, polynomials in a tuning
//! parameter with rational coefficients ([`ParamPoly`]), or plain floats once
//! the parameter has been bound.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact value of a finite float.
pub fn rational_from_f64(v: f64) -> Rational {
    Rational::from_float(v).expect("finite value")
}

/// Highest total degree kept by any expansion in this crate.
pub const MAX_DEGREE: u8 = 4;

/// Polynomial in a single tuning parameter `p` with exact rational
/// coefficients, lowest power first, no trailing zeros.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct ParamPoly {
    coeffs: Vec<Rational>,
}

impl ParamPoly {
    pub fn from_coeffs(coeffs: Vec<Rational>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// The parameter itself.
    pub fn param() -> Self {
        Self::from_coeffs(vec![Rational::zero(), Rational::one()])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coefficient(&self, power: usize) -> Rational {
        self.coeffs
            .get(power)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * p + c.to_f64().expect("finite rational"))
    }

    pub fn eval_rational(&self, p: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * p + c)
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Coefficients as floats, lowest power first.
    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().expect("finite rational"))
            .collect()
    }
}

impl fmt::Debug for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (power, c) in self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match power {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})p")?,
                _ => write!(f, "({c})p^{power}")?,
            }
        }
        Ok(())
    }
}

impl Add for ParamPoly {
    type Output = ParamPoly;

    fn add(self, rhs: ParamPoly) -> ParamPoly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        ParamPoly::from_coeffs(
            (0..len)
                .map(|i| self.coefficient(i) + rhs.coefficient(i))
                .collect(),
        )
    }
}

impl Sub for ParamPoly {
    type Output = ParamPoly;

    fn sub(self, rhs: ParamPoly) -> ParamPoly {
        self + (-rhs)
    }
}

impl Neg for ParamPoly {
    type Output = ParamPoly;

    fn neg(self) -> ParamPoly {
        ParamPoly::from_coeffs(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl Mul for ParamPoly {
    type Output = ParamPoly;

    fn mul(self, rhs: ParamPoly) -> ParamPoly {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return ParamPoly::default();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ParamPoly::from_coeffs(out)
    }
}

impl Zero for ParamPoly {
    fn zero() -> Self {
        ParamPoly::default()
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl One for ParamPoly {
    fn one() -> Self {
        ParamPoly::constant(Rational::one())
    }
}

impl From<Rational> for ParamPoly {
    fn from(c: Rational) -> Self {
        ParamPoly::constant(c)
    }
}

/// Coefficient ring for [`SeriesPolynomial`].
pub trait Coefficient:
    Clone + PartialEq + fmt::Debug + Zero + One + Add<Output = Self> + Mul<Output = Self>
{
}

impl<T> Coefficient for T where
    T: Clone + PartialEq + fmt::Debug + Zero + One + Add<Output = T> + Mul<Output = T>
{
}

/// Polynomial in `(e0, e1)` keyed by `(power of e0, power of e1)`, truncated
/// at total degree `max_degree`. Zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct SeriesPolynomial<C = Rational> {
    terms: BTreeMap<(u8, u8), C>,
    max_degree: u8,
}

impl<C: Coefficient> SeriesPolynomial<C> {
    pub fn zero(max_degree: u8) -> Self {
        Self {
            terms: BTreeMap::new(),
            max_degree,
        }
    }

    pub fn constant(c: C, max_degree: u8) -> Self {
        Self::monomial(0, 0, c, max_degree)
    }

    pub fn monomial(a: u8, b: u8, c: C, max_degree: u8) -> Self {
        let mut p = Self::zero(max_degree);
        p.add_term(a, b, c);
        p
    }

    /// Adds `c * e0^a e1^b`; terms above the truncation degree are dropped.
    pub fn add_term(&mut self, a: u8, b: u8, c: C) {
        if a + b > self.max_degree || c.is_zero() {
            return;
        }
        let slot = self.terms.entry((a, b)).or_insert_with(C::zero);
        *slot = slot.clone() + c;
        if slot.is_zero() {
            self.terms.remove(&(a, b));
        }
    }

    pub fn max_degree(&self) -> u8 {
        self.max_degree
    }

    pub fn coefficient(&self, a: u8, b: u8) -> C {
        self.terms.get(&(a, b)).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u8, u8), &C)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Keeps terms of total degree `<= degree`.
    pub fn truncate(&self, degree: u8) -> Self {
        let max_degree = degree.min(self.max_degree);
        Self {
            terms: self
                .terms
                .iter()
                .filter(|((a, b), _)| a + b <= max_degree)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            max_degree,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.max_degree.min(other.max_degree));
        for ((a, b), c) in self.terms.iter().chain(other.terms.iter()) {
            out.add_term(*a, *b, c.clone());
        }
        out
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut out = Self::zero(self.max_degree);
        for ((a, b), c) in &self.terms {
            out.add_term(*a, *b, c.clone() * k.clone());
        }
        out
    }

    /// Product truncated at the smaller of the two truncation degrees.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.max_degree.min(other.max_degree));
        for ((a1, b1), c1) in &self.terms {
            for ((a2, b2), c2) in &other.terms {
                out.add_term(a1 + a2, b1 + b2, c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// `sum_j c_j * self^j` for a coefficient list `c_0, c_1, ...`.
    pub fn compose_power_series(&self, coeffs: &[C]) -> Self {
        let mut out = Self::zero(self.max_degree);
        let mut power = Self::constant(C::one(), self.max_degree);
        for c in coeffs {
            out = out.add(&power.scale(c));
            power = power.mul(self);
        }
        out
    }

    pub fn map<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> SeriesPolynomial<D> {
        let mut out = SeriesPolynomial::zero(self.max_degree);
        for ((a, b), c) in &self.terms {
            out.add_term(*a, *b, f(c));
        }
        out
    }
}

impl SeriesPolynomial<ParamPoly> {
    /// Binds the parameter to a float.
    pub fn bind(&self, p: f64) -> SeriesPolynomial<f64> {
        self.map(|c| c.eval(p))
    }

    /// Binds the parameter to an exact rational.
    pub fn bind_rational(&self, p: &Rational) -> SeriesPolynomial<Rational> {
        self.map(|c| c.eval_rational(p))
    }
}

impl<C: fmt::Debug> fmt::Debug for SeriesPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(
                self.terms
                    .iter()
                    .map(|((a, b), c)| (format!("e0^{a} e1^{b}"), c)),
            )
            .finish()
    }
}

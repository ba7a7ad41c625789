//! Exact SRSWOR design moments of the relative errors
//! `e0 = (ybar_st - Ybar) / Ybar` and `e1 = (xbar_st - Xbar) / Xbar`.
//!
//! Within a stratum of size `N` sampled with `n` units, the central moments of
//! the sample mean are
//!
//! ```text
//! E[d^2] = gamma * S^2,                 gamma = (1 - n/N) / n
//! E[d^3] = k1 * C_3,                    k1 = (N-n)(N-2n) / (n^2 (N-1)(N-2))
//! E[d^4] = k2 * C_4 + 3 k3 * C_2^2,     k2 = (N-n)[N(N+1) - 6n(N-n)] / (n^3 (N-1)(N-2)(N-3))
//!                                       k3 = (N-n) N (N-n-1)(n-1) / (n^3 (N-1)(N-2)(N-3))
//! ```
//!
//! with `C_r` the population central moments (divisor `N`). Mixed moments
//! follow by polarization. Strata are independent, so order-3 entries are
//! plain weighted sums; order-4 entries also pick up cross-stratum products of
//! second moments (`3 sum_{h != k} ...`), which [`v_table`] includes and
//! [`v_table_within_stratum`] leaves out.

use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numeric::CompensatedSum;
use crate::population::{summarize_stratum, PopulationError, StratifiedPopulation, StratumSummary};
use crate::report::Num17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("insufficient stratum size for k2/k3: stratum `{stratum}` has N_h = {size}, fourth-order moments need N_h >= 4")]
    InsufficientForFourthOrder { stratum: String, size: usize },
    #[error("insufficient stratum size for k1: stratum `{stratum}` has N_h = {size}, third-order moments need N_h >= 3")]
    InsufficientForThirdOrder { stratum: String, size: usize },
    #[error("relative moments undefined: population mean of {variable} is zero")]
    ZeroMean { variable: &'static str },
    #[error(transparent)]
    Population(#[from] PopulationError),
}

/// Highest total order of design moments requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MomentOrder {
    Second = 2,
    Third = 3,
    Fourth = 4,
}

/// `(a, b)` names the moment `E[e0^a e1^b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VKey {
    pub a: u8,
    pub b: u8,
}

impl VKey {
    pub const fn new(a: u8, b: u8) -> Self {
        Self { a, b }
    }

    pub const fn order(self) -> u8 {
        self.a + self.b
    }

    /// `"V20"`, `"V13"`, ...
    pub fn label(self) -> String {
        format!("V{}{}", self.a, self.b)
    }

    fn from_label(s: &str) -> Option<Self> {
        let digits = s.strip_prefix('V')?.as_bytes();
        if digits.len() != 2 || !digits.iter().all(u8::is_ascii_digit) {
            return None;
        }
        let key = VKey::new(digits[0] - b'0', digits[1] - b'0');
        VKey::ALL.contains(&key).then_some(key)
    }

    /// The table's key set, in report order.
    pub const ALL: [VKey; 10] = [
        VKey::new(2, 0),
        VKey::new(0, 2),
        VKey::new(1, 1),
        VKey::new(3, 0),
        VKey::new(2, 1),
        VKey::new(1, 2),
        VKey::new(0, 3),
        VKey::new(2, 2),
        VKey::new(1, 3),
        VKey::new(0, 4),
    ];

    fn index(self) -> Option<usize> {
        VKey::ALL.iter().position(|k| *k == self)
    }
}

impl fmt::Display for VKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}{}", self.a, self.b)
    }
}

/// SRSWOR coefficients of one stratum. `k1` needs `N >= 3`, `k2`/`k3` need
/// `N >= 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumCoefficients {
    pub f: f64,
    pub gamma: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
}

impl StratumCoefficients {
    pub fn for_sizes(capital_n: usize, small_n: usize) -> Self {
        let big = capital_n as f64;
        let n = small_n as f64;
        let f = n / big;
        let gamma = (1.0 - f) / n;
        let k1 = (capital_n >= 3)
            .then(|| (big - n) * (big - 2.0 * n) / (n * n * (big - 1.0) * (big - 2.0)));
        let (k2, k3) = if capital_n >= 4 {
            let denom = n.powi(3) * (big - 1.0) * (big - 2.0) * (big - 3.0);
            let k2 = (big - n) * (big * (big + 1.0) - 6.0 * n * (big - n)) / denom;
            let k3 = (big - n) * big * (big - n - 1.0) * (n - 1.0) / denom;
            (Some(k2), Some(k3))
        } else {
            (None, None)
        };
        Self {
            f,
            gamma,
            k1,
            k2,
            k3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignCoefficients {
    pub strata: Vec<StratumCoefficients>,
}

impl DesignCoefficients {
    pub fn gamma(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.gamma).collect()
    }

    pub fn f(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.f).collect()
    }
}

pub fn design_coefficients(
    pop: &StratifiedPopulation,
    order: MomentOrder,
) -> Result<DesignCoefficients, MomentError> {
    let strata = pop
        .strata()
        .iter()
        .map(|s| {
            let size = s.capital_n();
            if order >= MomentOrder::Fourth && size < 4 {
                return Err(MomentError::InsufficientForFourthOrder {
                    stratum: s.id().to_owned(),
                    size,
                });
            }
            if order >= MomentOrder::Third && size < 3 {
                return Err(MomentError::InsufficientForThirdOrder {
                    stratum: s.id().to_owned(),
                    size,
                });
            }
            Ok(StratumCoefficients::for_sizes(size, s.small_n()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DesignCoefficients { strata })
}

/// Normalized design moments `V_ab = E[e0^a e1^b]`, together with the grand
/// means used for normalization. Entries beyond the computed order are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct VTable {
    entries: [Option<f64>; 10],
    y_mean: f64,
    x_mean: f64,
}

impl VTable {
    /// Builds a table from explicit entries; keys not listed are absent.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (VKey, f64)>,
        y_mean: f64,
        x_mean: f64,
    ) -> Self {
        let mut table = Self {
            entries: [None; 10],
            y_mean,
            x_mean,
        };
        for (key, value) in entries {
            let idx = key
                .index()
                .unwrap_or_else(|| panic!("{key} is not a V-table key"));
            table.entries[idx] = Some(value);
        }
        table
    }

    pub fn get(&self, key: VKey) -> Option<f64> {
        key.index().and_then(|i| self.entries[i])
    }

    /// Shorthand for `get(VKey::new(a, b))`, panicking when absent.
    pub fn v(&self, a: u8, b: u8) -> f64 {
        self.get(VKey::new(a, b))
            .unwrap_or_else(|| panic!("V{a}{b} not present in table"))
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn x_mean(&self) -> f64 {
        self.x_mean
    }

    pub fn iter(&self) -> impl Iterator<Item = (VKey, f64)> + '_ {
        VKey::ALL
            .iter()
            .zip(&self.entries)
            .filter_map(|(k, v)| v.map(|v| (*k, v)))
    }

    /// Copy with every entry of order 3 and 4 set to zero.
    pub fn second_order_only(&self) -> Self {
        let mut out = self.clone();
        for (key, entry) in VKey::ALL.iter().zip(out.entries.iter_mut()) {
            if key.order() > 2 {
                *entry = Some(0.0);
            }
        }
        out
    }

    /// Copy with one entry replaced.
    pub fn with_entry(&self, key: VKey, value: f64) -> Self {
        let mut out = self.clone();
        let idx = key
            .index()
            .unwrap_or_else(|| panic!("{key} is not a V-table key"));
        out.entries[idx] = Some(value);
        out
    }
}

impl Serialize for VTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        for (key, value) in self.iter() {
            map.serialize_entry(&key.label(), &Num17(value))?;
        }
        map.serialize_entry("Ybar", &Num17(self.y_mean))?;
        map.serialize_entry("Xbar", &Num17(self.x_mean))?;
        map.end()
    }
}

impl<'de> Deserialize<'de> for VTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TableVisitor;

        impl<'de> Visitor<'de> for TableVisitor {
            type Value = VTable;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of V-table entries plus Ybar and Xbar")
            }

            fn visit_map<M: MapAccess<'de>>(self, mut map: M) -> Result<VTable, M::Error> {
                let mut table = VTable {
                    entries: [None; 10],
                    y_mean: f64::NAN,
                    x_mean: f64::NAN,
                };
                while let Some(name) = map.next_key::<String>()? {
                    let value: f64 = map.next_value()?;
                    match name.as_str() {
                        "Ybar" => table.y_mean = value,
                        "Xbar" => table.x_mean = value,
                        other => {
                            let key = VKey::from_label(other).ok_or_else(|| {
                                de::Error::unknown_field(other, &["V20", "Ybar", "Xbar"])
                            })?;
                            table.entries[key.index().expect("validated key")] = Some(value);
                        }
                    }
                }
                Ok(table)
            }
        }

        deserializer.deserialize_map(TableVisitor)
    }
}

/// Exact design moments including cross-stratum fourth-order terms.
pub fn v_table(pop: &StratifiedPopulation) -> Result<VTable, MomentError> {
    v_table_to_order(pop, MomentOrder::Fourth)
}

pub fn v_table_to_order(
    pop: &StratifiedPopulation,
    order: MomentOrder,
) -> Result<VTable, MomentError> {
    build_table(pop, order, true)
}

/// Order-4 entries summed within strata only, without cross-stratum pair
/// products. Equal to [`v_table`] for a single stratum.
pub fn v_table_within_stratum(pop: &StratifiedPopulation) -> Result<VTable, MomentError> {
    build_table(pop, MomentOrder::Fourth, false)
}

struct StratumTerms {
    weight: f64,
    coefficients: StratumCoefficients,
    summary: StratumSummary,
}

impl StratumTerms {
    /// Unnormalized `W^2 E[d_y^a d_x^b]` for `a + b = 2`.
    fn second(&self, a: usize, b: usize) -> f64 {
        let s = &self.summary;
        let raw = match (a, b) {
            (2, 0) => s.s2_y,
            (0, 2) => s.s2_x,
            (1, 1) => s.s_xy,
            _ => unreachable!("second-order key"),
        };
        self.weight.powi(2) * self.coefficients.gamma * raw
    }

    fn third(&self, a: usize, b: usize) -> f64 {
        let k1 = self.coefficients.k1.expect("k1 validated");
        self.weight.powi(3) * k1 * self.summary.central_moment(a, b)
    }

    fn fourth(&self, a: usize, b: usize) -> f64 {
        let k2 = self.coefficients.k2.expect("k2 validated");
        let k3 = self.coefficients.k3.expect("k3 validated");
        let c = |a, b| self.summary.central_moment(a, b);
        let pairings = match (a, b) {
            (0, 4) => 3.0 * c(0, 2) * c(0, 2),
            (1, 3) => 3.0 * c(1, 1) * c(0, 2),
            (2, 2) => c(2, 0) * c(0, 2) + 2.0 * c(1, 1) * c(1, 1),
            _ => unreachable!("fourth-order key"),
        };
        self.weight.powi(4) * (k2 * c(a, b) + k3 * pairings)
    }
}

fn build_table(
    pop: &StratifiedPopulation,
    order: MomentOrder,
    cross_stratum: bool,
) -> Result<VTable, MomentError> {
    let y_mean = pop.grand_y_mean();
    let x_mean = pop.grand_x_mean();
    if y_mean == 0.0 {
        return Err(MomentError::ZeroMean { variable: "y" });
    }
    if x_mean == 0.0 {
        return Err(MomentError::ZeroMean { variable: "x" });
    }
    let coefficients = design_coefficients(pop, order)?;
    let terms = pop
        .strata()
        .iter()
        .zip(pop.weights())
        .zip(coefficients.strata)
        .map(|((s, &weight), coefficients)| {
            Ok(StratumTerms {
                weight,
                coefficients,
                summary: summarize_stratum(s)?,
            })
        })
        .collect::<Result<Vec<_>, MomentError>>()?;

    let sum = |f: &dyn Fn(&StratumTerms) -> f64| -> f64 {
        terms.iter().map(f).collect::<CompensatedSum>().value()
    };
    // sum_{h != k} p_h q_k
    let cross = |p: &dyn Fn(&StratumTerms) -> f64, q: &dyn Fn(&StratumTerms) -> f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for (h, th) in terms.iter().enumerate() {
            for (k, tk) in terms.iter().enumerate() {
                if h != k {
                    acc.add(p(th) * q(tk));
                }
            }
        }
        acc.value()
    };

    let norm = |a: u8, b: u8| y_mean.powi(i32::from(a)) * x_mean.powi(i32::from(b));
    let mut entries = Vec::with_capacity(10);
    for key in VKey::ALL {
        if key.order() > order as u8 {
            continue;
        }
        let (a, b) = (usize::from(key.a), usize::from(key.b));
        let raw = match key.order() {
            2 => sum(&|t| t.second(a, b)),
            3 => sum(&|t| t.third(a, b)),
            _ => {
                let within = sum(&|t| t.fourth(a, b));
                if cross_stratum {
                    let vyy = |t: &StratumTerms| t.second(2, 0);
                    let vxx = |t: &StratumTerms| t.second(0, 2);
                    let vxy = |t: &StratumTerms| t.second(1, 1);
                    within
                        + match (a, b) {
                            (0, 4) => 3.0 * cross(&vxx, &vxx),
                            (1, 3) => 3.0 * cross(&vxy, &vxx),
                            (2, 2) => cross(&vyy, &vxx) + 2.0 * cross(&vxy, &vxy),
                            _ => unreachable!(),
                        }
                } else {
                    within
                }
            }
        };
        entries.push((key, raw / norm(key.a, key.b)));
    }
    Ok(VTable::from_entries(entries, y_mean, x_mean))
}

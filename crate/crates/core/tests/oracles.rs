//! Independent oracles: direct enumeration of small designs and a second
//! derivation of the series coefficients.

use expstrat::approx::{expand_estimator, expectation_of, mse, Order};
use expstrat::estimator::EstimatorSpec;
use expstrat::moments::{v_table, StratumCoefficients, VKey};
use expstrat::numeric::relative_difference;
use expstrat::population::{summarize_stratum, StratifiedPopulation, StratumPopulation};
use expstrat::series::{rational, Rational, SeriesPolynomial};
use expstrat::verify::{exact_bias_mse, exact_expectation, exact_v_table, Combinations};

const LIMIT: u64 = 10_000_000;

/// Relative agreement, with an absolute floor for entries that vanish.
fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-15
}

fn single(x: &[f64], y: &[f64], n: usize) -> StratifiedPopulation {
    StratifiedPopulation::new(vec![StratumPopulation::from_xy("S", x, y, n).unwrap()]).unwrap()
}

fn six_unit_population() -> StratifiedPopulation {
    single(
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        &[2.0, 3.0, 5.0, 4.0, 6.0, 8.0],
        3,
    )
}

/// `E[(ybar - Ybar)^a (xbar - Xbar)^b]` over all samples of one stratum.
fn enumerate_raw(x: &[f64], y: &[f64], n: usize, a: i32, b: i32) -> f64 {
    let big = x.len();
    let (xm, ym) = (
        x.iter().sum::<f64>() / big as f64,
        y.iter().sum::<f64>() / big as f64,
    );
    let mut total = 0.0;
    let mut count = 0usize;
    for idx in Combinations::new(big, n) {
        let xs = idx.iter().map(|&i| x[i]).sum::<f64>() / n as f64;
        let ys = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        total += (ys - ym).powi(a) * (xs - xm).powi(b);
        count += 1;
    }
    total / count as f64
}

fn central(x: &[f64], y: &[f64], a: i32, b: i32) -> f64 {
    let big = x.len() as f64;
    let (xm, ym) = (x.iter().sum::<f64>() / big, y.iter().sum::<f64>() / big);
    x.iter()
        .zip(y)
        .map(|(x, y)| (y - ym).powi(a) * (x - xm).powi(b))
        .sum::<f64>()
        / big
}

#[test]
fn k2_grouping_is_the_unique_one_matching_enumeration() {
    let xs = [1.0, 2.0, 4.0, 7.0, 11.0, 16.0, 22.0];
    let ys = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
    for (big, n) in [(5usize, 2usize), (6, 2), (6, 3), (7, 3)] {
        let (x, y) = (&xs[..big], &ys[..big]);
        let (bn, sn) = (big as f64, n as f64);
        let denom = sn.powi(3) * (bn - 1.0) * (bn - 2.0) * (bn - 3.0);
        let candidates = [
            (bn - sn) * (bn * (bn + 1.0) - 6.0 * sn * (bn - sn)) / denom,
            ((bn - sn) * (bn + 1.0) * bn - 6.0 * sn * (bn - sn)) / denom,
            (bn - sn) * (bn + 1.0) * (bn - 6.0 * sn * (bn - sn)) / denom,
        ];
        let c = StratumCoefficients::for_sizes(big, n);
        let (k2, k3) = (c.k2.unwrap(), c.k3.unwrap());
        assert_eq!(k2, candidates[0]);
        let c04 = central(x, y, 0, 4);
        let c02 = central(x, y, 0, 2);
        let exact = enumerate_raw(x, y, n, 0, 4);
        let matching: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(_, k)| relative_difference(*k * c04 + 3.0 * k3 * c02 * c02, exact) < 1e-12)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(matching, vec![0], "(N, n) = ({big}, {n})");

        // mixed fourth moments with the corrected index placement
        let (c20, c11) = (central(x, y, 2, 0), central(x, y, 1, 1));
        let v22 = k2 * central(x, y, 2, 2) + k3 * (c20 * c02 + 2.0 * c11 * c11);
        assert!(relative_difference(v22, enumerate_raw(x, y, n, 2, 2)) < 1e-12);
        let v13 = k2 * central(x, y, 1, 3) + 3.0 * k3 * c11 * c02;
        assert!(relative_difference(v13, enumerate_raw(x, y, n, 1, 3)) < 1e-12);
        let k1 = c.k1.unwrap();
        let (f, e) = (k1 * central(x, y, 0, 3), enumerate_raw(x, y, n, 0, 3));
        // k1 = 0 when N = 2n; compare on the scale of the spread
        let scale = f.abs().max(e.abs()).max(c02.powf(1.5));
        assert!(
            (f - e).abs() <= 1e-12 * scale,
            "(N, n) = ({big}, {n}): {f:e} vs {e:e}"
        );
    }
}

#[test]
fn six_unit_population_matches_enumeration() {
    let pop = six_unit_population();
    let analytic = v_table(&pop).unwrap();
    let exact = exact_v_table(&pop, LIMIT).unwrap();
    for key in VKey::ALL {
        let (a, e) = (analytic.v(key.a, key.b), exact.v(key.a, key.b));
        assert!(close(a, e, 1e-9), "{key}: {a:e} vs {e:e}");
    }
}

#[test]
fn cube_of_e1_is_k1_c03() {
    // x = 1..6 is symmetric, so both sides vanish; the skewed x makes it bite
    for pop in [
        six_unit_population(),
        single(
            &[1.0, 2.0, 3.0, 5.0, 8.0, 13.0],
            &[2.0, 3.0, 5.0, 4.0, 6.0, 8.0],
            3,
        ),
    ] {
        let x = pop.grand_x_mean();
        let e1_cubed = exact_expectation(&pop, |s| ((s.xbar_st() - x) / x).powi(3), LIMIT).unwrap();
        let summary = summarize_stratum(&pop.strata()[0]).unwrap();
        let k1 = StratumCoefficients::for_sizes(6, 3).k1.unwrap();
        let formula = k1 * summary.central_moment(0, 3) / x.powi(3);
        assert!(
            close(e1_cubed, formula, 1e-9),
            "{e1_cubed:e} vs {formula:e}"
        );
    }
}

#[test]
fn quartic_polynomial_expectation_matches_direct_enumeration() {
    let pop = six_unit_population();
    let v = v_table(&pop).unwrap();
    let (y, x) = (pop.grand_y_mean(), pop.grand_x_mean());
    let mut poly = SeriesPolynomial::<f64>::zero(4);
    poly.add_term(1, 1, -0.5);
    poly.add_term(0, 2, 0.375);
    poly.add_term(1, 3, 2.0);
    poly.add_term(0, 4, -1.25);
    poly.add_term(2, 2, 0.75);
    let analytic = expectation_of(&poly, &v).unwrap();
    let direct = exact_expectation(
        &pop,
        |s| {
            let e0 = (s.ybar_st() - y) / y;
            let e1 = (s.xbar_st() - x) / x;
            -0.5 * e0 * e1 + 0.375 * e1 * e1 + 2.0 * e0 * e1.powi(3) - 1.25 * e1.powi(4)
                + 0.75 * e0 * e0 * e1 * e1
        },
        LIMIT,
    )
    .unwrap();
    assert!(
        relative_difference(analytic, direct) < 1e-9,
        "{analytic:e} vs {direct:e}"
    );
}

/// `exp(p u(e1))` coefficients via `n h_n = sum_k k p u_k h_{n-k}` with
/// `u_k = (-1)^k / 2^k`.
fn exp_recurrence(p: &Rational, terms: usize) -> Vec<Rational> {
    let u: Vec<Rational> = (0..terms as i64)
        .map(|k| {
            if k == 0 {
                rational(0, 1)
            } else {
                rational(if k % 2 == 0 { 1 } else { -1 }, 1 << k)
            }
        })
        .collect();
    let mut h = vec![rational(1, 1)];
    for n in 1..terms {
        let mut acc = rational(0, 1);
        for k in 1..=n {
            acc += rational(k as i64, 1) * p * &u[k] * &h[n - k];
        }
        h.push(acc / rational(n as i64, 1));
    }
    h
}

#[test]
fn series_coefficients_agree_with_recurrence() {
    for (spec, p) in [
        (EstimatorSpec::T1S, rational(1, 1)),
        (EstimatorSpec::T2S, rational(-1, 1)),
        (EstimatorSpec::T3S { alpha: 0.75 }, rational(3, 4)),
        (EstimatorSpec::T3S { alpha: -2.5 }, rational(-5, 2)),
    ] {
        let h = exp_recurrence(&p, 5);
        let e = expand_estimator(&spec);
        assert_eq!(e.coefficient(0, 0), rational(0, 1));
        for b in 1..=4u8 {
            assert_eq!(e.coefficient(0, b), h[usize::from(b)], "{spec} e1^{b}");
        }
        for b in 0..=3u8 {
            assert_eq!(e.coefficient(1, b), h[usize::from(b)], "{spec} e0 e1^{b}");
        }
    }
    let h = exp_recurrence(&rational(1, 1), 5);
    assert_eq!(h[3], rational(-13, 48));
    assert_eq!(h[4], rational(73, 384));
}

#[test]
fn series_coefficients_agree_with_finite_differences() {
    // fourth derivative of exp(-t / (2 + t)) at 0 via a central stencil
    let f = |t: f64| (-t / (2.0 + t)).exp();
    let h = 1e-2;
    let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h.powi(3));
    let d4 = (f(2.0 * h) - 4.0 * f(h) + 6.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / h.powi(4);
    assert!((d3 / 6.0 - (-13.0 / 48.0)).abs() < 1e-3, "{}", d3 / 6.0);
    assert!((d4 / 24.0 - 73.0 / 384.0).abs() < 1e-3, "{}", d4 / 24.0);
    assert!((d3 / 6.0 - (-7.0 / 48.0)).abs() > 0.1);
}

#[test]
fn plain_mean_and_constant_auxiliary_are_unbiased() {
    let pop = six_unit_population();
    let exact_v = exact_v_table(&pop, LIMIT).unwrap();
    let y = pop.grand_y_mean();
    let (b, m) = exact_bias_mse(&pop, &EstimatorSpec::T3S { alpha: 0.0 }, LIMIT).unwrap();
    assert!(b.abs() < 1e-12);
    assert!(relative_difference(m, y * y * exact_v.v(2, 0)) < 1e-12);

    let flat = single(&[4.0; 6], &[2.0, 3.0, 5.0, 4.0, 6.0, 8.0], 3);
    let v20 = exact_v_table(&flat, LIMIT).unwrap().v(2, 0);
    for spec in [
        EstimatorSpec::T1S,
        EstimatorSpec::T2S,
        EstimatorSpec::T3S { alpha: 1.7 },
        EstimatorSpec::T4S { theta: 0.3 },
    ] {
        let (b, m) = exact_bias_mse(&flat, &spec, LIMIT).unwrap();
        assert!(b.abs() < 1e-12, "{spec}");
        assert!(relative_difference(m, y * y * v20) < 1e-12, "{spec}");
    }
}

#[test]
fn second_order_t1s_mse_regression() {
    let pop = six_unit_population();
    let v = v_table(&pop).unwrap();
    let m2 = mse(&EstimatorSpec::T1S, &v, Order::Second).unwrap();
    assert!(
        relative_difference(m2, MSE2_T1S_SIX_UNITS) < 1e-12,
        "{m2:.17e}"
    );

    let (_, exact) = exact_bias_mse(&pop, &EstimatorSpec::T1S, LIMIT).unwrap();
    let m1 = mse(&EstimatorSpec::T1S, &v, Order::First).unwrap();
    assert!((m2 - exact).abs() <= (m1 - exact).abs());
}

const MSE2_T1S_SIX_UNITS: f64 = 1.980_085_243_974_132_6e-1;

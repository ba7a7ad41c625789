use expstrat::approx::{bias, mse, Order};
use expstrat::estimator::{estimate_from_means, EstimatorKind, EstimatorSpec};
use expstrat::moments::{v_table, VKey, VTable};
use expstrat::numeric::relative_difference;
use expstrat::optimize::{objective, optimize};
use expstrat::population::{summarize_stratum, StratifiedPopulation, StratumPopulation, Unit};
use expstrat::series::{rational, Rational, SeriesPolynomial};
use expstrat::verify::{exact_v_table, monte_carlo};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

/// `(x, y, n)` for one stratum with `min_n <= N <= max_n`.
fn stratum(min_n: usize, max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (min_n..=max_n).prop_flat_map(|big| {
        (
            prop::collection::vec(1.0f64..50.0, big),
            prop::collection::vec(-10.0f64..10.0, big),
            1..big,
            0.2f64..2.0,
        )
            .prop_map(|(x, noise, n, slope)| {
                let y = x
                    .iter()
                    .zip(&noise)
                    .map(|(x, e)| 5.0 + slope * x + e)
                    .collect();
                (x, y, n)
            })
    })
}

fn population(
    max_strata: usize,
    min_n: usize,
    max_n: usize,
) -> impl Strategy<Value = StratifiedPopulation> {
    prop::collection::vec(stratum(min_n, max_n), 1..=max_strata).prop_map(|strata| {
        let strata = strata
            .into_iter()
            .enumerate()
            .map(|(h, (x, y, n))| StratumPopulation::from_xy(format!("S{h}"), &x, &y, n).unwrap())
            .collect();
        StratifiedPopulation::new(strata).unwrap()
    })
}

fn scaled(pop: &StratifiedPopulation, cx: f64, cy: f64, shift_y: f64) -> StratifiedPopulation {
    pop.map_units(|u| Unit {
        x: u.x * cx,
        y: u.y * cy + shift_y,
    })
    .unwrap()
}

fn tables_agree(a: &VTable, b: &VTable, rel: f64) -> Result<(), TestCaseError> {
    for key in VKey::ALL {
        let (x, y) = (a.v(key.a, key.b), b.v(key.a, key.b));
        prop_assert!(close(x, y, rel, 1e-15), "{}: {:e} vs {:e}", key, x, y);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stratified_mean_reconstructs_pooled_mean(pop in population(4, 2, 12)) {
        let pooled: Vec<f64> = pop.strata().iter().flat_map(|s| s.units().iter().map(|u| u.y)).collect();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let weighted: f64 = pop.strata().iter().zip(pop.weights()).map(|(s, w)| w * s.y_mean()).sum();
        prop_assert!(relative_difference(weighted, mean) <= 1e-12);
        prop_assert!((pop.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn summaries_scale_with_x(pop in population(1, 2, 10), c in 0.1f64..10.0) {
        let s = summarize_stratum(&pop.strata()[0]).unwrap();
        let t = summarize_stratum(&scaled(&pop, c, 1.0, 0.0).strata()[0]).unwrap();
        prop_assert!(relative_difference(t.x_mean, c * s.x_mean) <= 1e-12);
        for a in 0..=4usize {
            for b in 0..=(4 - a) {
                let expected = s.central_moment(a, b) * c.powi(b as i32);
                let floor = 1e-9 * (s.s2_x.max(s.s2_y) * c.max(1.0).powi(2)).powf((a + b) as f64 / 2.0);
                prop_assert!(close(t.central_moment(a, b), expected, 1e-10, floor), "C{}{}", a, b);
            }
        }
    }

    #[test]
    fn summaries_ignore_unit_order((x, y, n) in stratum(2, 10), rotate in 0usize..10) {
        let a = StratumPopulation::from_xy("S", &x, &y, n).unwrap();
        let mut units: Vec<Unit> = a.units().to_vec();
        units.reverse();
        let k = rotate % units.len();
        units.rotate_left(k);
        let b = StratumPopulation::new("S", units, n).unwrap();
        let (sa, sb) = (summarize_stratum(&a).unwrap(), summarize_stratum(&b).unwrap());
        for ((key, va), (_, vb)) in sa.central_moments().into_iter().zip(sb.central_moments()) {
            prop_assert!(close(va, vb, 1e-12, 1e-12), "{:?}", key);
        }
        prop_assert!(relative_difference(sa.s2_y, sb.s2_y) <= 1e-12);
    }

    #[test]
    fn y_scale_leaves_v_table_unchanged(pop in population(3, 4, 10), c in 0.1f64..10.0) {
        let a = v_table(&pop).unwrap();
        let b = v_table(&scaled(&pop, 1.0, c, 0.0)).unwrap();
        tables_agree(&a, &b, 1e-10)?;
    }

    #[test]
    fn squaring_commutes_with_truncation(coeffs in prop::collection::vec(-20i64..20, 45)) {
        // all monomials of total degree <= 8
        let mut p = SeriesPolynomial::<Rational>::zero(8);
        let mut it = coeffs.into_iter();
        for d in 0..=8u8 {
            for a in 0..=d {
                p.add_term(a, d - a, rational(it.next().unwrap(), 7));
            }
        }
        let direct = p.square().truncate(4);
        let early = p.truncate(4).square().truncate(4);
        prop_assert!(direct == early);
    }

    #[test]
    fn parameter_identities_at_every_order(pop in population(3, 4, 10)) {
        let v = v_table(&pop).unwrap();
        let pairs = [
            (EstimatorSpec::T3S { alpha: 1.0 }, EstimatorSpec::T1S),
            (EstimatorSpec::T3S { alpha: -1.0 }, EstimatorSpec::T2S),
            (EstimatorSpec::T4S { theta: 1.0 }, EstimatorSpec::T1S),
            (EstimatorSpec::T4S { theta: 0.0 }, EstimatorSpec::T2S),
        ];
        for order in [Order::First, Order::Second] {
            for (general, special) in &pairs {
                let (b1, b2) = (bias(general, &v, order).unwrap(), bias(special, &v, order).unwrap());
                let (m1, m2) = (mse(general, &v, order).unwrap(), mse(special, &v, order).unwrap());
                prop_assert!(close(b1, b2, 1e-12, 1e-15), "{} bias {:e} vs {:e}", general, b1, b2);
                prop_assert!(close(m1, m2, 1e-12, 1e-15), "{} mse {:e} vs {:e}", general, m1, m2);
            }
        }
    }

    #[test]
    fn second_order_equals_first_without_higher_moments(pop in population(3, 4, 10), p in -2.0f64..2.0) {
        let mut v = v_table(&pop).unwrap();
        for key in VKey::ALL.iter().filter(|k| k.order() > 2) {
            v = v.with_entry(*key, 0.0);
        }
        for kind in EstimatorKind::ALL {
            let spec = EstimatorSpec::with_parameter(kind, p);
            let (b1, b2) = (bias(&spec, &v, Order::First).unwrap(), bias(&spec, &v, Order::Second).unwrap());
            let (m1, m2) = (mse(&spec, &v, Order::First).unwrap(), mse(&spec, &v, Order::Second).unwrap());
            prop_assert!(close(b1, b2, 1e-14, 0.0), "{} bias {:e} vs {:e}", spec, b1, b2);
            prop_assert!(close(m1, m2, 1e-14, 0.0), "{} mse {:e} vs {:e}", spec, m1, m2);
        }
    }

    #[test]
    fn exponent_is_scale_invariant(
        ybar in 1.0f64..100.0,
        xpop in 1.0f64..100.0,
        ratio in 0.2f64..5.0,
        c in 0.01f64..100.0,
        p in -3.0f64..3.0,
    ) {
        let xs = xpop * ratio;
        for kind in EstimatorKind::ALL {
            let spec = EstimatorSpec::with_parameter(kind, p);
            let a = estimate_from_means(&spec, ybar, xs, xpop).unwrap();
            let b = estimate_from_means(&spec, ybar, xs * c, xpop * c).unwrap();
            prop_assert!(relative_difference(a, b) <= 1e-13, "{}", spec);
        }
    }

    #[test]
    fn ratio_falls_and_product_rises_in_xbar(
        ybar in 1.0f64..100.0,
        xpop in 1.0f64..100.0,
        lo in 0.1f64..10.0,
        step in 0.01f64..10.0,
    ) {
        let (x1, x2) = (xpop * lo, xpop * (lo + step));
        let t = |spec: EstimatorSpec, xs| estimate_from_means(&spec, ybar, xs, xpop).unwrap();
        prop_assert!(t(EstimatorSpec::T1S, x2) < t(EstimatorSpec::T1S, x1));
        prop_assert!(t(EstimatorSpec::T2S, x2) > t(EstimatorSpec::T2S, x1));
    }

    #[test]
    fn optimum_is_locally_minimal_and_y_scale_free(pop in population(3, 4, 10), c in 0.1f64..10.0) {
        let v = v_table(&pop).unwrap();
        prop_assume!(v.v(0, 2) > 0.0);
        let w = v_table(&scaled(&pop, 1.0, c, 0.0)).unwrap();
        for kind in [EstimatorKind::T3S, EstimatorKind::T4S] {
            for order in [Order::First, Order::Second] {
                let a = optimize(kind, &v, order).unwrap();
                let b = optimize(kind, &w, order).unwrap();
                prop_assert!((a.parameter - b.parameter).abs() <= 1e-7, "{} {:?}: {} vs {}", kind, order, a.parameter, b.parameter);
                let curve = objective(kind, &v, order).unwrap();
                let f0 = curve.eval(a.parameter);
                let slack = 1e-12 * f0.abs();
                prop_assert!(curve.eval(a.parameter - 1e-6) >= f0 - slack);
                prop_assert!(curve.eval(a.parameter + 1e-6) >= f0 - slack);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn v_table_is_exact_for_small_populations(pop in population(2, 4, 8)) {
        let analytic = v_table(&pop).unwrap();
        let exact = exact_v_table(&pop, 10_000_000).unwrap();
        for key in VKey::ALL {
            let (a, e) = (analytic.v(key.a, key.b), exact.v(key.a, key.b));
            if e.abs() > 1e-12 {
                prop_assert!(relative_difference(a, e) <= 1e-9, "{}: {:e} vs {:e}", key, a, e);
            }
        }
    }

    #[test]
    fn shifted_y_still_matches_enumeration(pop in population(2, 4, 7), shift in -4.0f64..40.0) {
        let shifted = scaled(&pop, 1.0, 1.0, shift);
        prop_assume!(shifted.grand_y_mean().abs() > 1.0);
        let analytic = v_table(&shifted).unwrap();
        let exact = exact_v_table(&shifted, 10_000_000).unwrap();
        for key in VKey::ALL {
            let (a, e) = (analytic.v(key.a, key.b), exact.v(key.a, key.b));
            if e.abs() > 1e-12 {
                prop_assert!(relative_difference(a, e) <= 1e-9, "{}: {:e} vs {:e}", key, a, e);
            }
        }
        // only the y-normalization changes
        let base = v_table(&pop).unwrap();
        let ratio = pop.grand_y_mean() / shifted.grand_y_mean();
        prop_assert!(relative_difference(analytic.v(2, 0), base.v(2, 0) * ratio * ratio) <= 1e-10);
        prop_assert!(relative_difference(analytic.v(0, 2), base.v(0, 2)) <= 1e-12);
    }
}

#[test]
fn doubling_replicates_halves_estimator_variance() {
    let pop = StratifiedPopulation::new(vec![
        StratumPopulation::from_xy(
            "A",
            &[28.0, 34.0, 33.0, 27.0, 30.0, 34.0],
            &[64.0, 70.0, 67.0, 62.0, 65.0, 77.0],
            3,
        )
        .unwrap(),
        StratumPopulation::from_xy(
            "B",
            &[34.0, 34.0, 38.0, 39.0, 39.0, 38.0, 37.0],
            &[71.0, 72.0, 79.0, 87.0, 85.0, 77.0, 76.0],
            3,
        )
        .unwrap(),
    ])
    .unwrap();
    let spread = |replicates: usize| {
        let means: Vec<f64> = (0..20u64)
            .map(|seed| {
                monte_carlo(&pop, &EstimatorSpec::T1S, replicates, 1000 + seed)
                    .unwrap()
                    .mse
                    .mean
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64
    };
    let reported = |replicates: usize| {
        (0..20u64)
            .map(|seed| {
                monte_carlo(&pop, &EstimatorSpec::T1S, replicates, 5000 + seed)
                    .unwrap()
                    .mse
                    .standard_error
                    .powi(2)
            })
            .sum::<f64>()
            / 20.0
    };
    // across-seed variance: F(19, 19) noise around a ratio of 2
    let empirical = spread(2000) / spread(4000);
    assert!((0.8..=5.0).contains(&empirical), "{empirical}");
    let nominal = reported(2000) / reported(4000);
    assert!((1.8..=2.2).contains(&nominal), "{nominal}");
}

use lme::diagnostics::{check_consistency_suite, closed_form_lambda_1d};
use lme::geometry::{generate_grid_points, random_interior_probes, Domain, Point, PointSet};
use lme::interpolation::{fit_rate, interpolate_with_gradient, ScalarField};
use lme::linalg::Vector;
use lme::maxent::{log_partition, shape_gradients, shape_values, LmeParams};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn consistency_identities_hold(seed in 0u64..1000, jitter in 0.0f64..0.4, gamma in 0.8f64..4.0, hk in 0usize..3) {
        let h = [0.2, 0.1, 0.05][hk];
        let dom = Domain::unit_box(2).unwrap();
        let set = generate_grid_points(&dom, h, jitter, seed).unwrap();
        let params = LmeParams::new(gamma, h).unwrap();
        let probes = random_interior_probes(&dom, 10, 2.0 * h, seed + 1);
        let rep = check_consistency_suite(&set, &params, &probes);
        prop_assert!(rep.pass, "{:?}", rep);
    }

    #[test]
    fn weights_are_positive_and_log_z_is_minimal(seed in 0u64..1000, x0 in 0.25f64..0.75, x1 in 0.25f64..0.75, l0 in -5.0f64..5.0, l1 in -5.0f64..5.0) {
        let dom = Domain::unit_box(2).unwrap();
        let h = 0.1;
        let set = generate_grid_points(&dom, h, 0.3, seed).unwrap();
        let params = LmeParams::new(1.8, h).unwrap();
        let x = Point::from_slice(&[x0, x1]);
        let ev = shape_values(&x, &set, &params).unwrap();
        prop_assert!(ev.weights.iter().all(|w| *w >= 0.0 && *w <= 1.0));
        let other = log_partition(&x, &Vector::from_slice(&[l0 / h, l1 / h]), &set, &params).unwrap();
        prop_assert!(ev.dual.log_z <= other.log_z + 1e-12);
    }

    #[test]
    fn affine_fields_are_reproduced(c0 in -2.0f64..2.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, seed in 0u64..100) {
        let dom = Domain::unit_box(2).unwrap();
        let h = 0.1;
        let set = generate_grid_points(&dom, h, 0.25, seed).unwrap();
        let params = LmeParams::new(1.8, h).unwrap();
        let field = ScalarField::affine(c0, Vector::from_slice(&[c1, c2]));
        let samples: Vec<f64> = set.points().iter().map(|p| field.value(p)).collect();
        let scale = c0.abs() + c1.abs() + c2.abs() + 1.0;
        for x in random_interior_probes(&dom, 5, 2.0 * h, seed) {
            let (v, g) = interpolate_with_gradient(&samples, &x, &set, &params).unwrap();
            prop_assert!((v - field.value(&x)).abs() <= 1e-12 * scale);
            prop_assert!((g[0] - c1).abs() <= 1e-10 * scale / h && (g[1] - c2).abs() <= 1e-10 * scale / h);
        }
    }

    #[test]
    fn translation_invariance(dx in -3.0f64..3.0, dy in -3.0f64..3.0, seed in 0u64..100) {
        let dom = Domain::unit_box(2).unwrap();
        let h = 0.2;
        let set = generate_grid_points(&dom, h, 0.3, seed).unwrap();
        let moved_rows: Vec<Vec<f64>> = set.points().iter().map(|p| vec![p[0] + dx, p[1] + dy]).collect();
        let moved = PointSet::from_rows(&moved_rows).unwrap();
        let params = LmeParams::new(1.8, h).unwrap();
        let x = Point::from_slice(&[0.47, 0.52]);
        let a = shape_gradients(&x, &set, &params).unwrap();
        let b = shape_gradients(&Point::from_slice(&[0.47 + dx, 0.52 + dy]), &moved, &params).unwrap();
        prop_assert_eq!(&a.node_ids, &b.node_ids);
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            prop_assert!((wa - wb).abs() <= 1e-10);
        }
    }

    #[test]
    fn closed_form_is_decreasing_in_x(a in -5.0f64..5.0, h in 0.01f64..2.0, t0 in 0.01f64..0.98, dt in 0.001f64..0.01) {
        let t1 = (t0 + dt).min(0.999);
        let l0 = closed_form_lambda_1d(a + t0 * h, a, h, 1.8).unwrap();
        let l1 = closed_form_lambda_1d(a + t1 * h, a, h, 1.8).unwrap();
        // λ* blows up at a⁺ and is odd about the midpoint
        prop_assert!(l1 <= l0 + 1e-9 * l0.abs().max(1.0) || t1 - t0 < 1e-12);
        let mid = closed_form_lambda_1d(a + (1.0 - t0) * h, a, h, 1.8).unwrap();
        prop_assert!((mid + l0).abs() <= 1e-8 * l0.abs().max(1.0 / h));
    }

    #[test]
    fn fit_rate_recovers_powers(p in 0.5f64..3.0, c in 0.01f64..100.0) {
        let pairs: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&h: &f64| (h, c * h.powf(p))).collect();
        prop_assert!((fit_rate(&pairs).unwrap() - p).abs() < 1e-10);
    }
}

//! Structural invariants over random inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use roml_core::complexity::linear_class_bounds;
use roml_core::robust::{sample_uniform_box, solve_box_robust, solve_scenario_robust};
use roml_core::validate::{theorem1_bound, theorem3_bound, theorem5_bound, theorem5_raw};
use roml_core::{BoxUncertaintySet, PortfolioProblem};

fn boxes(m: usize) -> impl Strategy<Value = BoxUncertaintySet> {
    proptest::collection::vec((0.2f64..1.5, 0.0f64..0.6), m)
        .prop_map(|v| BoxUncertaintySet::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.0 + p.1).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theorem1_monotone(miss in 0.0f64..0.5, rad in 0.0f64..0.2, n in 10usize..100_000, m in 1usize..8) {
        let b = theorem1_bound(miss, rad, n, 0.05, m).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(theorem1_bound(miss, rad, n, 0.05, m + 1).unwrap() <= b);
        prop_assert!(theorem1_bound((miss + 0.01).min(1.0), rad, n, 0.05, m).unwrap() <= b);
        prop_assert!(theorem1_bound(miss, rad + 0.01, n, 0.05, m).unwrap() <= b);
        prop_assert!(theorem1_bound(miss, rad, n * 2, 0.05, m).unwrap() >= b);
    }

    #[test]
    fn theorem5_below_product_form(delta in 0.0f64..0.2, de in 0.0f64..0.1, dp in 0.0f64..0.2, dq in 0.8f64..1.0, m in 1usize..10) {
        let raw = theorem5_raw(delta, de, de, dp, dq, m).unwrap();
        prop_assert!(raw <= theorem3_bound(delta, de, m).unwrap() + 1e-12);
        let b = theorem5_bound(delta, de, de, dp, dq, m).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(theorem3_bound(delta, de, m + 1).unwrap() <= theorem3_bound(delta, de, m).unwrap());
    }

    #[test]
    fn linear_bounds_scale(xb in 0.1f64..5.0, bb in 0.1f64..5.0, n in 1usize..10_000, kappa in 0.1f64..10.0) {
        let (r, s) = linear_class_bounds(xb, bb, n).unwrap();
        let (rk, sk) = linear_class_bounds(xb, bb * kappa, n).unwrap();
        prop_assert!((rk - kappa * r).abs() <= 1e-12 * rk.max(1.0));
        // the squared-loss bound carries (X_b B_b)², so it scales by κ²
        prop_assert!((sk - kappa * kappa * s).abs() <= 1e-12 * sk.max(1.0));
    }

    #[test]
    fn robust_objective_grows_with_box(inner in boxes(3), grow in proptest::collection::vec(0.0f64..0.3, 3), long_only in any::<bool>()) {
        let outer = BoxUncertaintySet::new(
            inner.lower().iter().zip(&grow).map(|(l, g)| l - g).collect(),
            inner.upper().to_vec(),
        ).unwrap();
        let p = PortfolioProblem::identity(3, 0.5, long_only).unwrap();
        let a = solve_box_robust(&p, &inner).unwrap();
        let b = solve_box_robust(&p, &outer).unwrap();
        if a.is_optimal() && b.is_optimal() {
            prop_assert!(b.objective >= a.objective - 1e-9);
            prop_assert!((a.objective - p.variance(&a.weights).unwrap()).abs() <= 1e-10);
        }
        if b.is_optimal() {
            prop_assert!(a.is_optimal());
        }
    }

    #[test]
    fn adding_scenarios_never_helps(bx in boxes(3), seed in 0u64..1000, c in 0.2f64..1.2) {
        let p = PortfolioProblem::identity(3, c, false).unwrap();
        let s = sample_uniform_box(&bx, 4, seed).unwrap();
        let few = solve_scenario_robust(&p, &s.rows(0, 2).into_owned()).unwrap();
        let all = solve_scenario_robust(&p, &DMatrix::from(s)).unwrap();
        if few.is_optimal() && all.is_optimal() {
            prop_assert!(all.objective >= few.objective - 1e-9);
        }
    }
}

//! Library results against independently computed references.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use roml_core::complexity::{empirical_rademacher_linear_partitioned, linear_class_bounds};
use roml_core::learners::{empirical_loss, fit_interval_function, fit_least_squares, fit_quantile, FitConfig, LossKind};
use roml_core::robust::{hit_and_run, solve_nominal, solve_scenario_robust};
use roml_core::usets::{build_gi_baseline, extremize_prediction, GoodModelSet};
use roml_core::validate::{
    monte_carlo_feasibility, oracle_best_in_class, residual_support_estimate, PipelineConfig, SynthKind, SynthSpec,
};
use roml_core::usets::Method;
use roml_core::{Dataset, LinearModel, PortfolioProblem, QueryBatch};

#[test]
fn least_squares_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<f64> = rows.iter().map(|r| 0.7 * r[0] - 1.2 * r[1] + 0.4 * r[2] + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_rows(&rows, &labels).unwrap();
    let x = data.features();
    let beta = (x.transpose() * x).cholesky().unwrap().solve(&(x.transpose() * data.labels()));
    let oracle = LinearModel::new(beta, 10.0).unwrap();
    let fit = fit_least_squares(&data, 10.0, &FitConfig::default()).unwrap();
    let a = empirical_loss(&fit, &data, LossKind::Squared).unwrap();
    let b = empirical_loss(&oracle, &data, LossKind::Squared).unwrap();
    assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
}

#[test]
fn quantile_fit_on_constant_feature() {
    let labels: Vec<f64> = (1..=100).map(f64::from).collect();
    let data = Dataset::from_rows(&vec![vec![1.0]; 100], &labels).unwrap();
    for (tau, lo, hi) in [(0.5, 49.0, 51.0), (0.9, 89.0, 91.0)] {
        let pred = fit_quantile(&data, tau, 1000.0, &FitConfig::default()).unwrap().predict(&[1.0]).unwrap();
        assert!((lo..=hi).contains(&pred), "tau {tau}: {pred}");
    }
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0 - 2.5]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
    let line = Dataset::from_rows(&rows, &ys).unwrap();
    for tau in [0.1, 0.5, 0.8] {
        let c = fit_quantile(&line, tau, 10.0, &FitConfig::default()).unwrap().coefficients()[0];
        assert!((c - 2.0).abs() < 1e-6, "tau {tau}: {c}");
    }
}

#[test]
fn interval_width_brackets_residual_percentiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2000;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random_range(-1.0..1.0)]).collect();
    let labels: Vec<f64> = rows.iter().map(|r| 1.0 + r[1] + rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_rows(&rows, &labels).unwrap();
    let fit = fit_interval_function(&data, 0.1, 10.0, &FitConfig::default()).unwrap();
    let mut abs: Vec<f64> = data.residuals(fit.function.center()).unwrap().iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let (p89, p91) = (abs[(0.89 * n as f64) as usize], abs[(0.91 * n as f64) as usize]);
    let w = fit.function.half_width();
    assert!(p89 <= w && w <= p91, "{p89} ≤ {w} ≤ {p91}");
    assert!(fit.miss_rate <= 0.1);
}

#[test]
fn rademacher_partitioning_is_deterministic() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
    let data = Dataset::from_rows(&rows, &vec![0.0; 40]).unwrap();
    let a = empirical_rademacher_linear_partitioned(&data, 1.0, 4000, 5, 4).unwrap();
    let b = empirical_rademacher_linear_partitioned(&data, 1.0, 4000, 5, 4).unwrap();
    assert_eq!(a, b);
    let (bound, _) = linear_class_bounds(data.max_row_norm(), 1.0, 40).unwrap();
    assert!(a.value <= bound + 3.0 * a.std_error);
    // doubling draws shrinks the standard error by about √2
    let c = empirical_rademacher_linear_partitioned(&data, 1.0, 16_000, 6, 4).unwrap();
    let ratio = a.std_error / c.std_error;
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn gi_box_matches_hand_ellipsoid() {
    let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![1.0, i as f64 / 5.0]).collect();
    let labels: Vec<f64> = rows.iter().enumerate().map(|(i, r)| 0.5 + r[1] + 0.1 * (i as f64 * 1.3).sin()).collect();
    let data = Dataset::from_rows(&rows, &labels).unwrap();
    let q = vec![1.0, 2.0];
    let (b, diag) = build_gi_baseline(&data, Some(0.2), 0.05, 0.9, &QueryBatch::from_rows(&[q.clone()]).unwrap()).unwrap();
    let x = data.features();
    let g_inv = (x.transpose() * x).try_inverse().unwrap();
    let beta = &g_inv * (x.transpose() * data.labels());
    let qv = DVector::from_vec(q);
    // χ²₂ quantile is −2 ln(1 − p)
    let c = -2.0 * (0.1f64).ln();
    let r = (c * 0.04 * qv.dot(&(&g_inv * &qv))).sqrt();
    let e = 0.2 * 1.959_963_984_540_054;
    assert!((diag.level - c).abs() < 1e-8);
    assert!((b.upper()[0] - (beta.dot(&qv) + r + e)).abs() < 1e-8);
    assert!((b.lower()[0] - (beta.dot(&qv) - r - e)).abs() < 1e-8);
}

#[test]
fn squared_extremization_grows_with_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![1.0, rng.random_range(-1.0..1.0)]).collect();
    let labels: Vec<f64> = rows.iter().map(|r| r[1] + rng.random_range(-0.3..0.3)).collect();
    let data = Dataset::from_rows(&rows, &labels).unwrap();
    let ls = fit_least_squares(&data, 10.0, &FitConfig::default()).unwrap();
    let base = empirical_loss(&ls, &data, LossKind::Squared).unwrap();
    let mut prev = 0.0;
    for slack in [0.0, 0.01, 0.1, 1.0] {
        let g = GoodModelSet::new(&data, ls.clone(), LossKind::Squared, base + slack).unwrap();
        let r = extremize_prediction(&g, &[1.0, 0.5]).unwrap();
        assert!(r.sup - r.inf >= prev);
        prev = r.sup - r.inf;
    }
}

#[test]
fn min_variance_portfolio_closed_form() {
    let cov = DMatrix::from_row_slice(3, 3, &[0.09, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.16]);
    let p = PortfolioProblem::new(cov.clone(), 0.0, true).unwrap();
    let s = solve_nominal(&p, &[0.1, 0.1, 0.1]).unwrap();
    let w = cov.try_inverse().unwrap() * DVector::from_element(3, 1.0);
    let w = &w / w.sum();
    for j in 0..3 {
        assert!((s.weights[j] - w[j]).abs() < 1e-9);
    }
    // adding a binding scenario cannot lower the variance
    let two = DMatrix::from_row_slice(2, 3, &[0.1, 0.1, 0.1, 0.3, -0.1, 0.0]);
    let p = p.with_min_return(0.08);
    let t = solve_scenario_robust(&p, &two).unwrap();
    assert!(t.objective >= s.objective - 1e-12);
}

#[test]
fn hit_and_run_unit_disc_moments() {
    // uniform on the unit disc: E‖z‖² = ∫₀¹ r²·2r dr = 1/2
    let s = hit_and_run(|p: &[f64]| p[0] * p[0] + p[1] * p[1] <= 1.0, &[0.0, 0.0], 50_000, 500, 3, 4).unwrap();
    let mean_sq = s.row_iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / 50_000.0;
    let mx = s.column(0).mean();
    let my = s.column(1).mean();
    assert!((mean_sq - 0.5).abs() < 0.01, "{mean_sq}");
    assert!(mx.abs() < 0.02 && my.abs() < 0.02);
}

fn spec(kind: SynthKind, sigma: f64, seed: u64) -> SynthSpec {
    SynthSpec::new(kind, vec![0.8, -0.4, 1.5], sigma, true, seed).unwrap()
}

#[test]
fn best_in_class_oracles() {
    let noiseless = oracle_best_in_class(&spec(SynthKind::LinearGaussian, 0.0, 1), LossKind::Squared, 10.0, 20_000).unwrap();
    for (a, b) in noiseless.coefficients().iter().zip([0.8, -0.4, 1.5]) {
        assert!((a - b).abs() < 1e-3);
    }
    let a = oracle_best_in_class(&spec(SynthKind::LinearGaussian, 1.0, 2), LossKind::Squared, 10.0, 200_000).unwrap();
    let b = oracle_best_in_class(&spec(SynthKind::LinearGaussian, 1.0, 3), LossKind::Squared, 10.0, 200_000).unwrap();
    assert!((a.coefficients() - b.coefficients()).amax() < 1e-2);
    let med = oracle_best_in_class(&spec(SynthKind::LinearGaussian, 1.0, 2), LossKind::Pinball { tau: 0.5 }, 10.0, 200_000).unwrap();
    assert!((med.coefficients() - a.coefficients()).amax() < 1e-2);
}

#[test]
fn residual_support_gaussian_quantile() {
    let s = spec(SynthKind::LinearGaussian, 1.0, 9);
    let truth = s.true_model(10.0).unwrap();
    let e = residual_support_estimate(&s, &truth, 0.05, 200_000).unwrap().half_width();
    assert!((e - 1.96).abs() < 0.02, "{e}");
}

#[test]
fn noiseless_method2_is_always_feasible() {
    let mut cfg = PipelineConfig::new(Method::M2, spec(SynthKind::LinearGaussian, 0.0, 10));
    cfg.n = 200;
    cfg.outer = 10;
    cfg.inner = 50;
    cfg.min_return = -100.0;
    let r = monte_carlo_feasibility(&cfg).unwrap();
    assert_eq!(r.empirical, 1.0);
    assert!(r.pass);
    let again = monte_carlo_feasibility(&cfg).unwrap();
    assert_eq!(r, again);
}

#[test]
fn joint_feasibility_below_single_coordinate() {
    let mut cfg = PipelineConfig::new(Method::M1, spec(SynthKind::Heteroscedastic, 0.5, 11));
    cfg.n = 500;
    cfg.outer = 20;
    cfg.inner = 200;
    cfg.min_return = 1.0;
    cfg.m = 1;
    let single = monte_carlo_feasibility(&cfg).unwrap();
    cfg.m = 3;
    let joint = monte_carlo_feasibility(&cfg).unwrap();
    assert!(joint.coverage <= single.coverage + 0.02, "{} vs {}", joint.coverage, single.coverage);
    assert!(joint.bound <= single.bound);
}

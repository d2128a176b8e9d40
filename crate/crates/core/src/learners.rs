//! Empirical risk minimization over the norm-bounded linear class.
//!
//! Least squares is solved exactly (ridge multiplier on the norm ball). The
//! pinball-loss fit runs projected subgradient descent with suffix averaging
//! from several starts, then polishes the best start with majorize–minimize
//! steps: each step replaces `|r|` by the quadratic upper bound
//! `r²/(2e) + e/2` with `e = max(|r₀|, η)`, which turns the update into a
//! norm-constrained weighted least-squares problem.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob_open, Error, Result};
use crate::linalg::min_quadratic_in_ball;
use crate::model::{project_ball, Dataset, IntervalFunction, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed,
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub init_step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Subgradient starts; the first starts from the least-squares fit.
    pub restarts: usize,
    /// Cap on majorize–minimize polishing iterations.
    pub polish_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            step_rule: StepRule::InvSqrt,
            init_step: 0.5,
            tolerance: 1e-10,
            seed: 0,
            restarts: 2,
            polish_iters: 200,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("{} must be positive", self.tolerance),
            });
        }
        if !(self.init_step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "init_step",
                reason: format!("{} must be positive", self.init_step),
            });
        }
        Ok(())
    }
}

/// Per-example loss applied to a linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Pinball { tau: f64 },
    /// `1[|y − β(x)| > half_width]`, the miss indicator of the interval `β(x) ± w`.
    Miss { half_width: f64 },
    /// `min((y − β(x))², cap)`: squared loss with range bounded by `cap`.
    TruncatedSquared { cap: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Squared => Ok(()),
            LossKind::Pinball { tau } => check_prob_open("tau", tau),
            LossKind::Miss { half_width } if half_width >= 0.0 => Ok(()),
            LossKind::Miss { half_width } => Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("{half_width} is negative"),
            }),
            LossKind::TruncatedSquared { cap } if cap > 0.0 => Ok(()),
            LossKind::TruncatedSquared { cap } => Err(Error::InvalidParameter {
                name: "cap",
                reason: format!("{cap} must be positive"),
            }),
        }
    }

    /// Loss of residual `y − β(x)`; parameters are assumed valid.
    #[inline]
    pub fn eval(&self, residual: f64) -> f64 {
        match *self {
            LossKind::Squared => residual * residual,
            LossKind::Pinball { tau } => pinball_unchecked(residual, tau),
            LossKind::Miss { half_width } => f64::from(residual.abs() > half_width),
            LossKind::TruncatedSquared { cap } => (residual * residual).min(cap),
        }
    }
}

#[inline]
fn pinball_unchecked(residual: f64, tau: f64) -> f64 {
    if residual >= 0.0 {
        tau * residual
    } else {
        (tau - 1.0) * residual
    }
}

/// `τ·r` for `r ≥ 0`, `(τ − 1)·r` otherwise.
pub fn pinball_loss(residual: f64, tau: f64) -> Result<f64> {
    check_prob_open("tau", tau)?;
    Ok(pinball_unchecked(residual, tau))
}

/// Arithmetic mean of per-example losses `(1/n) Σ l(β(xⁱ), yⁱ)`.
pub fn empirical_loss(model: &LinearModel, data: &Dataset, loss: LossKind) -> Result<f64> {
    loss.validate()?;
    let residuals = data.residuals(model)?;
    Ok(residuals.iter().map(|&r| loss.eval(r)).sum::<f64>() / data.n() as f64)
}

/// Empirical miss rate `(1/n) Σ 1[yⁱ ∉ I(xⁱ)]`.
pub fn interval_miss_rate(ifun: &IntervalFunction, data: &Dataset) -> Result<f64> {
    empirical_loss(
        ifun.center(),
        data,
        LossKind::Miss {
            half_width: ifun.half_width(),
        },
    )
}

/// Squared-loss ERM over `{β : ‖β‖₂ ≤ norm_bound}`.
pub fn fit_least_squares(data: &Dataset, norm_bound: f64, cfg: &FitConfig) -> Result<LinearModel> {
    cfg.validate()?;
    let n = data.n() as f64;
    let x = data.features();
    let h = (x.transpose() * x) * (2.0 / n);
    let g = (x.transpose() * data.labels()) * (2.0 / n);
    LinearModel::projected(min_quadratic_in_ball(&h, &g, norm_bound), norm_bound)
}

fn mean_pinball(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    let pred = x * beta;
    y.iter()
        .zip(pred.iter())
        .map(|(yi, pi)| pinball_unchecked(yi - pi, tau))
        .sum::<f64>()
        / y.len() as f64
}

/// Pinball-loss ERM (linear quantile regression) over `{β : ‖β‖₂ ≤ norm_bound}`.
pub fn fit_quantile(data: &Dataset, tau: f64, norm_bound: f64, cfg: &FitConfig) -> Result<LinearModel> {
    check_prob_open("tau", tau)?;
    cfg.validate()?;
    let x = data.features();
    let y = data.labels();
    let n = data.n();
    let d = data.d();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let label_scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let start_ls = fit_least_squares(data, norm_bound, cfg)?.coefficients().clone();

    let mut best = start_ls.clone();
    let mut best_loss = mean_pinball(x, y, &best, tau);

    for restart in 0..cfg.restarts.max(1) {
        let mut beta = if restart == 0 {
            start_ls.clone()
        } else {
            let mut b: DVector<f64> = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let target = rng.random::<f64>() * norm_bound;
            let nb = b.norm().max(1e-300);
            b *= target / nb;
            b
        };
        let mut avg = DVector::zeros(d);
        let mut avg_count = 0usize;
        let tail_start = cfg.max_iters / 2;
        let step0 = cfg.init_step * norm_bound.min(label_scale.max(1.0));
        let mut grad = DVector::zeros(d);
        for t in 0..cfg.max_iters {
            let pred = x * &beta;
            grad.fill(0.0);
            for i in 0..n {
                let r = y[i] - pred[i];
                let psi = if r > 0.0 {
                    tau
                } else if r < 0.0 {
                    tau - 1.0
                } else {
                    tau - 0.5
                };
                if psi != 0.0 {
                    for (k, xk) in x.row(i).iter().enumerate() {
                        grad[k] -= psi * xk;
                    }
                }
            }
            grad /= n as f64;
            let gnorm = grad.norm();
            if gnorm == 0.0 {
                break;
            }
            let step = match cfg.step_rule {
                StepRule::Fixed => step0,
                StepRule::InvSqrt => step0 / ((t + 1) as f64).sqrt(),
            };
            beta -= &grad * (step / gnorm);
            project_ball(&mut beta, norm_bound);
            if t >= tail_start {
                avg += &beta;
                avg_count += 1;
            }
        }
        if avg_count > 0 {
            avg /= avg_count as f64;
            project_ball(&mut avg, norm_bound);
            for cand in [avg, beta] {
                let l = mean_pinball(x, y, &cand, tau);
                if l < best_loss {
                    best_loss = l;
                    best = cand;
                }
            }
        }
    }

    let (polished, polished_loss) = polish_quantile(x, y, tau, norm_bound, best.clone(), cfg);
    if polished_loss <= best_loss {
        best = polished;
    }
    LinearModel::projected(best, norm_bound)
}

fn polish_quantile(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    norm_bound: f64,
    start: DVector<f64>,
    cfg: &FitConfig,
) -> (DVector<f64>, f64) {
    let n = y.len() as f64;
    let d = x.ncols();
    let mut beta = start;
    let mut best = beta.clone();
    let mut best_loss = mean_pinball(x, y, &beta, tau);
    let resid_scale = best_loss.max(1e-300) / tau.min(1.0 - tau);
    let mut eta = 1e-2 * resid_scale;
    let eta_floor = (cfg.tolerance * resid_scale).max(1e-14 * resid_scale);
    let mut stall = 0;

    let mut colsum = DVector::zeros(d);
    for row in x.row_iter() {
        colsum += row.transpose();
    }

    for _ in 0..cfg.polish_iters {
        let pred = x * &beta;
        let mut h = DMatrix::zeros(d, d);
        let mut g = &colsum * (tau - 0.5);
        for (i, row) in x.row_iter().enumerate() {
            let r = y[i] - pred[i];
            let w = 1.0 / (2.0 * r.abs().max(eta));
            let xi = row.transpose();
            h.ger(w, &xi, &xi, 1.0);
            g.axpy(w * y[i], &xi, 1.0);
        }
        h /= n;
        g /= n;
        beta = min_quadratic_in_ball(&h, &g, norm_bound);
        let loss = mean_pinball(x, y, &beta, tau);
        if loss < best_loss - cfg.tolerance * best_loss.max(1e-300) {
            best_loss = loss;
            best = beta.clone();
            stall = 0;
        } else {
            if loss < best_loss {
                best_loss = loss;
                best = beta.clone();
            }
            stall += 1;
            if eta <= eta_floor && stall >= 3 {
                break;
            }
        }
        eta = (eta * 0.3).max(eta_floor);
    }
    (best, best_loss)
}

/// Output of the interval set-function ERM.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFit {
    pub function: IntervalFunction,
    /// Achieved empirical miss rate `(1/n) Σ 1[|yⁱ − c(xⁱ)| > w]`.
    pub miss_rate: f64,
}

/// Median model plus the smallest symmetric half-width whose training
/// miss rate does not exceed `target_miss`.
pub fn fit_interval_function(
    data: &Dataset,
    target_miss: f64,
    norm_bound: f64,
    cfg: &FitConfig,
) -> Result<IntervalFit> {
    if !(0.0..1.0).contains(&target_miss) {
        return Err(Error::InvalidParameter {
            name: "target_miss",
            reason: format!("{target_miss} is not in [0, 1)"),
        });
    }
    let center = fit_quantile(data, 0.5, norm_bound, cfg)?;
    let mut abs_res: Vec<f64> = data.residuals(&center)?.iter().map(|r| r.abs()).collect();
    abs_res.sort_by(f64::total_cmp);
    let n = abs_res.len();
    let allowed = ((target_miss * n as f64) + 1e-9).floor() as usize;
    let half_width = abs_res[n - 1 - allowed.min(n - 1)];
    let function = IntervalFunction::new(center, half_width)?;
    let miss_rate = interval_miss_rate(&function, data)?;
    Ok(IntervalFit {
        function,
        miss_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(n: usize, slope: f64) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 - 0.5]).collect();
        let labels: Vec<f64> = rows.iter().map(|r| slope * r[0]).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn pinball_examples() {
        assert_relative_eq!(pinball_loss(1.0, 0.9).unwrap(), 0.9);
        assert_eq!(pinball_loss(0.0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(pinball_loss(-2.0, 0.25).unwrap(), 1.5);
        assert!(pinball_loss(1.0, 0.0).is_err());
        assert!(pinball_loss(1.0, 1.0).is_err());
    }

    #[test]
    fn least_squares_interpolates() {
        let data = line(20, 1.0);
        let m = fit_least_squares(&data, 10.0, &FitConfig::default()).unwrap();
        assert_relative_eq!(m.coefficients()[0], 1.0, epsilon = 1e-10);
        assert!(empirical_loss(&m, &data, LossKind::Squared).unwrap() < 1e-20);
    }

    #[test]
    fn least_squares_zero_labels() {
        let data = line(20, 0.0);
        let m = fit_least_squares(&data, 10.0, &FitConfig::default()).unwrap();
        assert!(m.coefficients().norm() < 1e-14);
    }

    #[test]
    fn least_squares_respects_norm_bound() {
        let data = line(20, 5.0);
        let m = fit_least_squares(&data, 1.0, &FitConfig::default()).unwrap();
        assert_relative_eq!(m.coefficients()[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn quantile_noiseless_line() {
        let data = line(50, 2.0);
        for tau in [0.1, 0.5, 0.9] {
            let m = fit_quantile(&data, tau, 10.0, &FitConfig::default()).unwrap();
            assert_relative_eq!(m.coefficients()[0], 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn empirical_loss_examples() {
        let data = Dataset::from_rows(&[vec![1.0], vec![1.0]], &[1.0, -1.0]).unwrap();
        let zero = LinearModel::new(DVector::from_vec(vec![0.0]), 1.0).unwrap();
        assert_relative_eq!(
            empirical_loss(&zero, &data, LossKind::Pinball { tau: 0.5 }).unwrap(),
            0.5
        );
        assert_eq!(
            empirical_loss(&zero, &data, LossKind::Miss { half_width: 1.0 }).unwrap(),
            0.0
        );
        let exact = line(5, 1.0);
        let one = LinearModel::new(DVector::from_vec(vec![1.0]), 1.0).unwrap();
        assert_eq!(empirical_loss(&one, &exact, LossKind::Squared).unwrap(), 0.0);
    }

    #[test]
    fn interval_zero_target_covers_everything() {
        let rows: Vec<Vec<f64>> = (0..9).map(|_| vec![1.0]).collect();
        let labels: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let data = Dataset::from_rows(&rows, &labels).unwrap();
        let fit = fit_interval_function(&data, 0.0, 100.0, &FitConfig::default()).unwrap();
        assert_eq!(fit.miss_rate, 0.0);
        let c = fit.function.center().coefficients()[0];
        let max_abs = labels.iter().map(|y| (y - c).abs()).fold(0.0, f64::max);
        assert_relative_eq!(fit.function.half_width(), max_abs);
        assert!(fit_interval_function(&data, 1.0, 100.0, &FitConfig::default()).is_err());
    }

    #[test]
    fn interval_noiseless_zero_width() {
        let data = line(30, 1.0);
        let fit = fit_interval_function(&data, 0.1, 10.0, &FitConfig::default()).unwrap();
        assert!(fit.function.half_width() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pinball_convex_and_nonnegative(
            a in -10.0f64..10.0, b in -10.0f64..10.0, t in 0.0f64..1.0, tau in 0.01f64..0.99
        ) {
            let mix = t * a + (1.0 - t) * b;
            let lhs = pinball_loss(mix, tau).unwrap();
            let rhs = t * pinball_loss(a, tau).unwrap() + (1.0 - t) * pinball_loss(b, tau).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
            prop_assert!(lhs >= 0.0);
            if a > 0.0 {
                prop_assert!((pinball_loss(a, tau).unwrap() - tau * a).abs() < 1e-12);
            }
        }

        #[test]
        fn pinball_subgradient_at_zero(z in -1e-3f64..1e-3, tau in 0.01f64..0.99) {
            // l(z) ≥ l(0) + s z for every s in [τ − 1, τ]
            for s in [tau - 1.0, tau, tau - 0.5] {
                prop_assert!(pinball_loss(z, tau).unwrap() >= s * z - 1e-15);
            }
        }

        #[test]
        fn half_width_nonincreasing_in_target(seed in 0u64..50, a in 0.0f64..0.9, b in 0.0f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![1.0, rng.random_range(-1.0..1.0)]).collect();
            let labels: Vec<f64> = rows.iter().map(|r| r[1] + rng.random_range(-1.0..1.0)).collect();
            let data = Dataset::from_rows(&rows, &labels).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cfg = FitConfig { seed, ..FitConfig::default() };
            let w_lo = fit_interval_function(&data, lo, 10.0, &cfg).unwrap();
            let w_hi = fit_interval_function(&data, hi, 10.0, &cfg).unwrap();
            prop_assert!(w_hi.function.half_width() <= w_lo.function.half_width());
            prop_assert!(w_lo.miss_rate <= lo + 1e-12);
        }
    }
}

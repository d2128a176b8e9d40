//! Synthetic data processes with known structure, plus large-sample oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_least_squares, fit_quantile, FitConfig, LossKind};
use crate::model::{Dataset, LinearModel};
use crate::usets::ResidualSupport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    LinearGaussian,
    /// Noise scale `σ(1 + ‖x‖)`.
    Heteroscedastic,
    /// Noise `±offset + σ·g`, sign chosen with equal probability.
    Bimodal { offset: f64 },
}

/// `y = βᵀx + noise` with `x` uniform on `[−1, 1]^d`.
///
/// With `intercept` a constant 1 is appended to every feature vector, and
/// `true_coefficients` then has `d + 1` entries (the last one is the intercept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub d: usize,
    pub true_coefficients: Vec<f64>,
    pub noise_scale: f64,
    pub intercept: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, true_coefficients: Vec<f64>, noise_scale: f64, intercept: bool, seed: u64) -> Result<Self> {
        let d = true_coefficients.len() - usize::from(intercept && !true_coefficients.is_empty());
        let spec = Self {
            kind,
            d,
            true_coefficients,
            noise_scale,
            intercept,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: "must be at least 1".into(),
            });
        }
        if self.true_coefficients.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                what: "true coefficients vs feature dimension",
                expected: self.feature_dim(),
                got: self.true_coefficients.len(),
            });
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                reason: format!("{} must be finite and nonnegative", self.noise_scale),
            });
        }
        if let SynthKind::Bimodal { offset } = self.kind {
            if !offset.is_finite() {
                return Err(Error::NonFinite("bimodal offset"));
            }
        }
        Ok(())
    }

    /// Columns of the feature matrix, counting the intercept.
    pub fn feature_dim(&self) -> usize {
        self.d + usize::from(self.intercept)
    }

    /// Largest possible feature norm `X_b`.
    pub fn feature_norm_bound(&self) -> f64 {
        (self.feature_dim() as f64).sqrt()
    }

    pub fn true_model(&self, norm_bound: f64) -> Result<LinearModel> {
        LinearModel::new(DVector::from_column_slice(&self.true_coefficients), norm_bound)
    }

    pub fn sample_features<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.feature_dim();
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            for k in 0..self.d {
                x[(i, k)] = rng.random_range(-1.0..=1.0);
            }
            if self.intercept {
                x[(i, self.d)] = 1.0;
            }
        }
        x
    }

    /// One label per feature row.
    pub fn sample_labels<R: Rng>(&self, features: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_column_slice(&self.true_coefficients);
        DVector::from_iterator(
            features.nrows(),
            (0..features.nrows()).map(|i| {
                let row = features.row(i);
                let mean = row.dot(&beta.transpose());
                let g: f64 = rng.sample(StandardNormal);
                let noise = match self.kind {
                    SynthKind::LinearGaussian => self.noise_scale * g,
                    SynthKind::Heteroscedastic => {
                        let norm = row.columns(0, self.d).norm();
                        self.noise_scale * (1.0 + norm) * g
                    }
                    SynthKind::Bimodal { offset } => {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * offset + self.noise_scale * g
                    }
                };
                mean + noise
            }),
        )
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Empty("sample"));
        }
        let x = self.sample_features(n, rng);
        let y = self.sample_labels(&x, rng);
        Dataset::new(x, y)
    }
}

/// `n` examples drawn from `spec.seed`.
pub fn generate(spec: &SynthSpec, n: usize) -> Result<Dataset> {
    spec.validate()?;
    spec.sample(n, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// `count` models drawn uniformly from the `ℓ2` ball of radius `norm_bound` in `ℝ^dim`.
pub fn random_ball_models(dim: usize, count: usize, norm_bound: f64, seed: u64) -> Result<Vec<LinearModel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let radius = norm_bound * rng.random::<f64>().powf(1.0 / dim as f64);
            LinearModel::projected(dir.normalize() * radius, norm_bound)
        })
        .collect()
}

/// Seed stream reserved for oracle samples so they never overlap experiment draws.
const ORACLE_STREAM: u64 = u64::MAX;

fn oracle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ORACLE_STREAM);
    rng
}

/// Approximate best-in-class model: ERM on a fresh sample of size `big_n`.
pub fn oracle_best_in_class(spec: &SynthSpec, loss: LossKind, norm_bound: f64, big_n: usize) -> Result<LinearModel> {
    spec.validate()?;
    let data = spec.sample(big_n, &mut oracle_rng(spec.seed))?;
    let cfg = FitConfig {
        seed: spec.seed,
        ..FitConfig::default()
    };
    match loss {
        LossKind::Squared => fit_least_squares(&data, norm_bound, &cfg),
        LossKind::Pinball { tau } => fit_quantile(&data, tau, norm_bound, &cfg),
        _ => Err(Error::Unsupported("oracle for this loss")),
    }
}

/// `e` = empirical `(1 − δe)` quantile of `|y − β*(x)|` over `big_n` fresh draws.
pub fn residual_support_estimate(
    spec: &SynthSpec,
    oracle: &LinearModel,
    delta_e: f64,
    big_n: usize,
) -> Result<ResidualSupport> {
    crate::error::check_prob_open("delta_e", delta_e)?;
    let mut rng = oracle_rng(spec.seed);
    // Skip past the oracle fitting sample's stream position.
    rng.set_word_pos(1 << 40);
    let data = spec.sample(big_n, &mut rng)?;
    let mut abs: Vec<f64> = data.residuals(oracle)?.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let k = ((1.0 - delta_e) * big_n as f64).ceil() as usize;
    ResidualSupport::new(abs[k.clamp(1, big_n) - 1], delta_e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SynthKind, sigma: f64) -> SynthSpec {
        SynthSpec::new(kind, vec![1.0, -0.5, 2.0], sigma, true, 7).unwrap()
    }

    #[test]
    fn noiseless_labels_are_linear() {
        let s = spec(SynthKind::LinearGaussian, 0.0);
        let data = generate(&s, 50).unwrap();
        let r = data.residuals(&s.true_model(10.0).unwrap()).unwrap();
        assert!(r.amax() < 1e-12);
        assert!(data.features().column(2).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(SynthKind::Bimodal { offset: 2.0 }, 0.3);
        assert_eq!(generate(&s, 30).unwrap(), generate(&s, 30).unwrap());
    }

    #[test]
    fn label_variance_matches_moments() {
        // Var(y) = ‖β_x‖²/3 + σ² for x uniform on [−1, 1]
        let s = spec(SynthKind::LinearGaussian, 0.7);
        let y = generate(&s, 200_000).unwrap().labels().clone();
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        let expect = (1.0 + 0.25) / 3.0 + 0.49;
        assert!((var - expect).abs() < 0.01, "var {var} vs {expect}");
    }

    #[test]
    fn residual_support_zero_noise_and_monotone() {
        let s = spec(SynthKind::LinearGaussian, 0.0);
        let m = s.true_model(10.0).unwrap();
        assert!(residual_support_estimate(&s, &m, 0.05, 1000).unwrap().half_width() < 1e-12);
        let g = spec(SynthKind::LinearGaussian, 1.0);
        let e1 = residual_support_estimate(&g, &m, 0.01, 20_000).unwrap().half_width();
        let e5 = residual_support_estimate(&g, &m, 0.05, 20_000).unwrap().half_width();
        assert!(e5 <= e1);
    }
}

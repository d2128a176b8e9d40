//! Gaussian-noise baseline: the classical confidence ellipsoid for OLS
//! coefficients, padded by a Gaussian residual quantile.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dist::{chi2_quantile, f_quantile, normal_quantile};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{BoxUncertaintySet, Dataset, QueryBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiDiagnostics {
    /// Ellipsoid level `c`.
    pub level: f64,
    /// Noise scale used: the given σ or the estimate `s`.
    pub sigma: f64,
    pub sigma_estimated: bool,
    /// Residual half-width `e = σ·z_{1−δe/2}`.
    pub half_width: f64,
    pub coefficients: Vec<f64>,
}

/// Box from `{β : (β̂ − β)ᵀXᵀX(β̂ − β)/σ² ≤ c}` plus `±σ·z_{1−δe/2}`.
///
/// With `sigma = None` the noise scale is estimated by `s² = RSS/(n − d)` and
/// `c = d·F_{d,n−d}(confidence)`; otherwise `c = χ²_d(confidence)`.
pub fn build_gi_baseline(
    data: &Dataset,
    sigma: Option<f64>,
    delta_e: f64,
    confidence: f64,
    queries: &QueryBatch,
) -> Result<(BoxUncertaintySet, GiDiagnostics)> {
    let (n, d) = (data.n(), data.d());
    if queries.d() != d {
        return Err(Error::DimensionMismatch {
            what: "query features vs training features",
            expected: d,
            got: queries.d(),
        });
    }
    if !(delta_e > 0.0 && delta_e <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta_e",
            reason: format!("{delta_e} is not in (0, 1]"),
        });
    }
    let x = data.features();
    let gram = x.transpose() * x;
    let gram_inv = spd_inverse(&gram).map_err(|min_eigenvalue| Error::SingularGram { min_eigenvalue })?;
    let beta: DVector<f64> = &gram_inv * (x.transpose() * data.labels());
    let (sigma, estimated, level) = match sigma {
        Some(s) => {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: format!("{s} must be finite and nonnegative"),
                });
            }
            (s, false, chi2_quantile(confidence, d as f64)?)
        }
        None => {
            if n <= d {
                return Err(Error::InvalidParameter {
                    name: "n",
                    reason: format!("estimating sigma needs n > d (n = {n}, d = {d})"),
                });
            }
            let rss = (x * &beta - data.labels()).norm_squared();
            let s = (rss / (n - d) as f64).sqrt();
            (s, true, d as f64 * f_quantile(confidence, d as f64, (n - d) as f64)?)
        }
    };
    let half_width = sigma * normal_quantile(1.0 - delta_e / 2.0)?;
    let mut lower = Vec::with_capacity(queries.m());
    let mut upper = Vec::with_capacity(queries.m());
    for j in 0..queries.m() {
        let q = queries.row(j);
        let mid = beta.dot(&q);
        let spread = q.dot(&(&gram_inv * &q)).max(0.0);
        let r = (level * sigma * sigma * spread).sqrt();
        lower.push(mid - r - half_width);
        upper.push(mid + r + half_width);
    }
    let diag = GiDiagnostics {
        level,
        sigma,
        sigma_estimated: estimated,
        half_width,
        coefficients: beta.iter().copied().collect(),
    };
    Ok((BoxUncertaintySet::new(lower, upper)?, diag))
}

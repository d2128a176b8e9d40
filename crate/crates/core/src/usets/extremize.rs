//! `inf/sup {βᵀx̃ : β ∈ B}` over a good-model set.
//!
//! Squared loss: `{β : ‖Xβ − Y‖²/n ≤ t}` is the ellipsoid
//! `(β − β̂)ᵀXᵀX(β − β̂) ≤ n·t − ‖Xβ̂ − Y‖²` around the OLS fit `β̂`, so both
//! extremes are closed-form. Pinball loss: two LPs in epigraph form over the
//! box `‖β‖∞ ≤ B_b`. Neither path clips to the `ℓ2` ball; the returned
//! range flags when an extremizer lies outside it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::good_set::GoodModelSet;
use crate::error::{Error, Result};
use crate::learners::LossKind;
use crate::linalg::spd_inverse;
use crate::lp::{self, Constraint, Relation};
use crate::model::{Dataset, NORM_SLACK};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtremizeOptions {
    /// Use `(XᵀX + ridge·I)⁻¹` when `XᵀX` is singular.
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRange {
    pub inf: f64,
    pub sup: f64,
    /// An extremizer has `‖β‖₂ > B_b`.
    pub norm_ball_active: bool,
    /// The ridge fallback was used.
    pub ridge_used: bool,
}

pub fn extremize_prediction(gset: &GoodModelSet<'_>, query: &[f64]) -> Result<PredictionRange> {
    extremize_prediction_with(gset, query, &ExtremizeOptions::default())
}

pub fn extremize_prediction_with(
    gset: &GoodModelSet<'_>,
    query: &[f64],
    opts: &ExtremizeOptions,
) -> Result<PredictionRange> {
    let data = gset.data();
    if query.len() != data.d() {
        return Err(Error::DimensionMismatch {
            what: "query vs training features",
            expected: data.d(),
            got: query.len(),
        });
    }
    match gset.loss() {
        LossKind::Squared => {
            let ell = SquaredEllipsoid::new(data, gset.threshold(), opts)?;
            Ok(ell.range(query, gset.norm_bound()))
        }
        LossKind::Pinball { tau } => pinball_range(data, tau, gset.threshold(), gset.norm_bound(), query),
        _ => Err(Error::Unsupported("prediction extremization")),
    }
}

/// Extremizes every query row; coordinates are independent and solved in parallel.
pub fn prediction_ranges(gset: &GoodModelSet<'_>, queries: &crate::model::QueryBatch) -> Result<Vec<PredictionRange>> {
    use rayon::prelude::*;
    if queries.d() != gset.data().d() {
        return Err(Error::DimensionMismatch {
            what: "query vs training features",
            expected: gset.data().d(),
            got: queries.d(),
        });
    }
    if let LossKind::Squared = gset.loss() {
        let ell = SquaredEllipsoid::new(gset.data(), gset.threshold(), &ExtremizeOptions::default())?;
        return Ok((0..queries.m())
            .map(|j| ell.range(queries.row(j).as_slice(), gset.norm_bound()))
            .collect());
    }
    (0..queries.m())
        .into_par_iter()
        .map(|j| extremize_prediction(gset, queries.row(j).as_slice()))
        .collect()
}

/// `{β : (β − β̂)ᵀ G (β − β̂) ≤ r}` with `G = XᵀX`.
pub(crate) struct SquaredEllipsoid {
    center: DVector<f64>,
    gram_inv: DMatrix<f64>,
    radius_sq: f64,
    ridge_used: bool,
}

impl SquaredEllipsoid {
    fn new(data: &Dataset, threshold: f64, opts: &ExtremizeOptions) -> Result<Self> {
        let x = data.features();
        let y = data.labels();
        let gram = x.transpose() * x;
        let (gram_inv, ridge_used) = match spd_inverse(&gram) {
            Ok(inv) => (inv, false),
            Err(min_eigenvalue) => match opts.ridge {
                Some(r) if r > 0.0 => {
                    let reg = &gram + DMatrix::identity(gram.nrows(), gram.nrows()) * r;
                    (spd_inverse(&reg).map_err(|min_eigenvalue| Error::SingularGram { min_eigenvalue })?, true)
                }
                _ => return Err(Error::SingularGram { min_eigenvalue }),
            },
        };
        let center = &gram_inv * (x.transpose() * y);
        let rss = (x * &center - y).norm_squared();
        let n = data.n() as f64;
        let radius_sq = n * threshold - rss;
        let tol = 1e-9 * (1.0 + rss);
        if radius_sq < -tol {
            return Err(Error::ThresholdBelowAttainable {
                threshold,
                attainable: rss / n,
            });
        }
        Ok(Self {
            center,
            gram_inv,
            radius_sq: radius_sq.max(0.0),
            ridge_used,
        })
    }

    pub(crate) fn range(&self, query: &[f64], norm_bound: f64) -> PredictionRange {
        let q = DVector::from_column_slice(query);
        let gq = &self.gram_inv * &q;
        let spread = q.dot(&gq).max(0.0);
        let mid = self.center.dot(&q);
        let half = (self.radius_sq * spread).sqrt();
        let norm_ball_active = if spread > 0.0 {
            let step = &gq * (self.radius_sq / spread).sqrt();
            (&self.center + &step).norm() > norm_bound + NORM_SLACK
                || (&self.center - &step).norm() > norm_bound + NORM_SLACK
        } else {
            self.center.norm() > norm_bound + NORM_SLACK
        };
        PredictionRange {
            inf: mid - half,
            sup: mid + half,
            norm_ball_active,
            ridge_used: self.ridge_used,
        }
    }
}

/// Extremes of `x̃ᵀβ` over `{β : ‖β‖∞ ≤ B, (1/n) Σ ρ_τ(yᵢ − xᵢᵀβ) ≤ t}`.
///
/// Variables `[b (d) | p (n) | q (n)]` with `β = b − B`, `b ∈ [0, 2B]`, and
/// `yᵢ − xᵢᵀβ = pᵢ − qᵢ`, `τΣp + (1 − τ)Σq ≤ n·t`.
fn pinball_range(data: &Dataset, tau: f64, threshold: f64, bound: f64, query: &[f64]) -> Result<PredictionRange> {
    let n = data.n();
    let d = data.d();
    let x = data.features();
    let y = data.labels();
    let nv = d + 2 * n;
    let mut rows = Vec::with_capacity(n + d + 1);
    for i in 0..n {
        let mut a = vec![0.0; nv];
        let mut shift = 0.0;
        for k in 0..d {
            a[k] = x[(i, k)];
            shift += x[(i, k)];
        }
        a[d + i] = 1.0;
        a[d + n + i] = -1.0;
        rows.push(Constraint::new(a, Relation::Eq, y[i] + bound * shift));
    }
    for k in 0..d {
        let mut a = vec![0.0; nv];
        a[k] = 1.0;
        rows.push(Constraint::new(a, Relation::Le, 2.0 * bound));
    }
    let mut budget = vec![0.0; nv];
    for i in 0..n {
        budget[d + i] = tau;
        budget[d + n + i] = 1.0 - tau;
    }
    rows.push(Constraint::new(budget, Relation::Le, n as f64 * threshold));

    let mut c = vec![0.0; nv];
    c[..d].copy_from_slice(query);
    let offset: f64 = bound * query.iter().sum::<f64>();

    let solve = |maximize: bool| -> Result<(f64, f64)> {
        let sol = if maximize {
            lp::maximize(&c, &rows)
        } else {
            lp::minimize(&c, &rows)
        }
        .map_err(|e| match e {
            Error::Lp("infeasible") => Error::ThresholdBelowAttainable {
                threshold,
                attainable: f64::NAN,
            },
            other => other,
        })?;
        if !sol.certified() {
            return Err(Error::Lp("not certified: duality gap above tolerance"));
        }
        let beta_norm = sol.x[..d]
            .iter()
            .map(|b| (b - bound).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok((sol.objective - offset, beta_norm))
    };
    let (sup, norm_sup) = solve(true)?;
    let (inf, norm_inf) = solve(false)?;
    Ok(PredictionRange {
        inf: inf.min(sup),
        sup: sup.max(inf),
        norm_ball_active: norm_sup.max(norm_inf) > bound + NORM_SLACK,
        ridge_used: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{empirical_loss, fit_least_squares, fit_quantile, FitConfig};
    use crate::model::LinearModel;
    use approx::assert_relative_eq;

    fn sample() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0, (i as f64 * 0.7).sin()]).collect();
        let labels: Vec<f64> = rows.iter().enumerate().map(|(i, r)| 0.5 + 2.0 * r[1] + 0.1 * (i as f64).cos()).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn zero_radius_collapses_to_reference() {
        let data = sample();
        let ols = fit_least_squares(&data, 100.0, &FitConfig::default()).unwrap();
        let t = empirical_loss(&ols, &data, LossKind::Squared).unwrap();
        let g = GoodModelSet::new(&data, ols.clone(), LossKind::Squared, t).unwrap();
        let r = extremize_prediction(&g, &[1.0, 0.3]).unwrap();
        let p = ols.predict(&[1.0, 0.3]).unwrap();
        assert!((r.sup - p).abs() < 1e-6 && (r.inf - p).abs() < 1e-6);
    }

    #[test]
    fn constant_design_width() {
        // X = 1ⁿ: G = n, so sup − inf = 2√(r/n)
        let n = 10;
        let rows = vec![vec![1.0]; n];
        let labels: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let data = Dataset::from_rows(&rows, &labels).unwrap();
        let ols = fit_least_squares(&data, 100.0, &FitConfig::default()).unwrap();
        let l = empirical_loss(&ols, &data, LossKind::Squared).unwrap();
        let t = l + 0.4;
        let g = GoodModelSet::new(&data, ols, LossKind::Squared, t).unwrap();
        let r = extremize_prediction(&g, &[1.0]).unwrap();
        let radius = n as f64 * t - n as f64 * l;
        assert_relative_eq!(r.sup - r.inf, 2.0 * (radius / n as f64).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn singular_gram_is_reported() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        let data = Dataset::from_rows(&rows, &[1.0, 2.0, 3.0]).unwrap();
        let model = LinearModel::new(DVector::from_vec(vec![0.2, 0.4]), 10.0).unwrap();
        let g = GoodModelSet::new(&data, model, LossKind::Squared, 1.0).unwrap();
        assert!(matches!(extremize_prediction(&g, &[1.0, 0.0]), Err(Error::SingularGram { .. })));
        let r = extremize_prediction_with(&g, &[1.0, 2.0], &ExtremizeOptions { ridge: Some(1e-6) }).unwrap();
        assert!(r.ridge_used && r.inf <= r.sup);
    }

    #[test]
    fn pinball_range_contains_reference_and_grows() {
        let data = sample();
        let cfg = FitConfig::default();
        let q = fit_quantile(&data, 0.8, 10.0, &cfg).unwrap();
        let base = empirical_loss(&q, &data, LossKind::Pinball { tau: 0.8 }).unwrap();
        let query = [1.0, -0.4];
        let p = q.predict(&query).unwrap();
        let tight = GoodModelSet::new(&data, q.clone(), LossKind::Pinball { tau: 0.8 }, base + 0.01).unwrap();
        let loose = tight.with_threshold(base + 0.1).unwrap();
        let a = extremize_prediction(&tight, &query).unwrap();
        let b = extremize_prediction(&loose, &query).unwrap();
        assert!(a.inf <= p + 1e-9 && p <= a.sup + 1e-9);
        assert!(b.inf <= a.inf + 1e-9 && a.sup <= b.sup + 1e-9);
        assert!(b.sup - b.inf > a.sup - a.inf);
    }
}

//! Data containers and the prediction/uncertainty primitives built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking `‖β‖₂ ≤ B_b`.
pub const NORM_SLACK: f64 = 1e-9;

/// A labeled training sample: `n` feature rows paired with `n` scalar labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if features.ncols() == 0 {
            return Err(Error::Empty("feature dimension"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels vs feature rows",
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        Ok(Self { features, labels })
    }

    /// Builds a dataset from row-major feature rows.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::Empty("dataset"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "feature row length",
                expected: d,
                got: bad.len(),
            });
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(features, DVector::from_column_slice(labels))
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// `X_b`: the largest Euclidean norm of any feature row.
    pub fn max_row_norm(&self) -> f64 {
        self.features
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    /// Residuals `y_i − β(x_i)`.
    pub fn residuals(&self, model: &LinearModel) -> Result<DVector<f64>> {
        Ok(&self.labels - model.predict_all(&self.features)?)
    }
}

/// Feature vectors of the `m` labels that feed the decision problem.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBatch {
    features: DMatrix<f64>,
}

impl QueryBatch {
    pub fn new(features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("query batch"));
        }
        if features.ncols() == 0 {
            return Err(Error::Empty("feature dimension"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query features"));
        }
        Ok(Self { features })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::Empty("query batch"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "query row length",
                expected: d,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn m(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn row(&self, j: usize) -> DVector<f64> {
        self.features.row(j).transpose()
    }
}

/// A linear predictor `x ↦ βᵀx` from the norm-bounded class `{β : ‖β‖₂ ≤ B_b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    coefficients: DVector<f64>,
    norm_bound: f64,
}

impl LinearModel {
    pub fn new(coefficients: DVector<f64>, norm_bound: f64) -> Result<Self> {
        if !(norm_bound > 0.0) {
            return Err(Error::InvalidParameter {
                name: "norm_bound",
                reason: format!("{norm_bound} must be positive"),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        let norm = coefficients.norm();
        if norm > norm_bound + NORM_SLACK {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                reason: format!("norm {norm} exceeds bound {norm_bound}"),
            });
        }
        Ok(Self {
            coefficients,
            norm_bound,
        })
    }

    /// Projects `coefficients` onto the ball of radius `norm_bound` first.
    pub fn projected(mut coefficients: DVector<f64>, norm_bound: f64) -> Result<Self> {
        project_ball(&mut coefficients, norm_bound);
        Self::new(coefficients, norm_bound)
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum())
    }

    pub fn predict_all(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "feature matrix columns",
                expected: self.dim(),
                got: features.ncols(),
            });
        }
        Ok(features * &self.coefficients)
    }
}

pub(crate) fn project_ball(v: &mut DVector<f64>, radius: f64) {
    let norm = v.norm();
    if norm > radius {
        *v *= radius / norm;
    }
}

/// Symmetric interval-valued predictor `x ↦ [c(x) − w, c(x) + w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFunction {
    center: LinearModel,
    half_width: f64,
}

impl IntervalFunction {
    pub fn new(center: LinearModel, half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("{half_width} must be finite and nonnegative"),
            });
        }
        Ok(Self { center, half_width })
    }

    pub fn center(&self) -> &LinearModel {
        &self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn eval(&self, x: &[f64]) -> Result<(f64, f64)> {
        let c = self.center.predict(x)?;
        Ok((c - self.half_width, c + self.half_width))
    }

    pub fn contains(&self, x: &[f64], y: f64) -> Result<bool> {
        let (lo, hi) = self.eval(x)?;
        Ok(lo <= y && y <= hi)
    }
}

/// Product of `m` closed intervals `Π_j [lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxUncertaintySet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxUncertaintySet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Empty("box"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "box upper vs lower",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if let Some(j) = (0..lower.len()).find(|&j| lower[j] > upper[j]) {
            return Err(Error::InvalidParameter {
                name: "box",
                reason: format!(
                    "coordinate {j} has lower {} > upper {}",
                    lower[j], upper[j]
                ),
            });
        }
        Ok(Self { lower, upper })
    }

    /// A box collapsed to a single point.
    pub fn point(p: Vec<f64>) -> Result<Self> {
        Self::new(p.clone(), p)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// `true` when `other ⊆ self` up to `tol` on every face.
    pub fn contains_box(&self, other: &BoxUncertaintySet, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|j| {
                self.lower[j] <= other.lower[j] + tol && other.upper[j] <= self.upper[j] + tol
            })
    }

    /// All `2^m` vertices, for small `m`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|mask| {
                (0..m)
                    .map(|j| {
                        if mask >> j & 1 == 1 {
                            self.upper[j]
                        } else {
                            self.lower[j]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_mismatch_and_nan() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            Dataset::new(x.clone(), DVector::from_vec(vec![1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::new(x, DVector::from_vec(vec![1.0, f64::NAN])),
            Err(Error::NonFinite(_))
        ));
        assert!(Dataset::from_rows(&[], &[]).is_err());
    }

    #[test]
    fn model_norm_invariant() {
        let c = DVector::from_vec(vec![3.0, 4.0]);
        assert!(LinearModel::new(c.clone(), 5.0).is_ok());
        assert!(LinearModel::new(c.clone(), 4.9).is_err());
        let p = LinearModel::projected(c, 1.0).unwrap();
        assert!((p.coefficients().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_eval() {
        let m = LinearModel::new(DVector::from_vec(vec![2.0]), 10.0).unwrap();
        let f = IntervalFunction::new(m, 0.5).unwrap();
        assert_eq!(f.eval(&[1.5]).unwrap(), (2.5, 3.5));
        assert!(f.contains(&[1.5], 3.5).unwrap());
        assert!(!f.contains(&[1.5], 3.6).unwrap());
        assert!(IntervalFunction::new(f.center().clone(), -1.0).is_err());
    }

    #[test]
    fn box_checks() {
        assert!(BoxUncertaintySet::new(vec![1.0], vec![0.0]).is_err());
        let b = BoxUncertaintySet::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(b.center(), vec![0.5, 2.0]);
        assert_eq!(b.vertices().len(), 4);
        assert!(b.contains(&[0.5, 3.0]));
        let inner = BoxUncertaintySet::new(vec![0.2, 1.5], vec![0.8, 2.0]).unwrap();
        assert!(b.contains_box(&inner, 0.0));
        assert!(!inner.contains_box(&b, 0.0));
    }
}

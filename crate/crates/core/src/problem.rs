//! The decision problem `min f(π, u) s.t. F(π, u) ∈ K` and its portfolio instance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default slack for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// A decision problem parameterized by an uncertain vector `u`.
///
/// Implementations must be deterministic: the same `(decision, u, tol)`
/// always yields the same answer.
pub trait DecisionProblem {
    /// Length of the decision vector `π`.
    fn decision_dim(&self) -> usize;

    /// Length of the uncertain parameter `u`.
    fn uncertain_dim(&self) -> usize;

    fn objective(&self, decision: &[f64], u: &[f64]) -> Result<f64>;

    /// `F(π, u) ∈ K`, checked with slack `tol`.
    fn is_feasible(&self, decision: &[f64], u: &[f64], tol: f64) -> Result<bool>;
}

/// Minimum-variance allocation: `min πᵀΣπ s.t. 1ᵀπ = 1, yᵀπ ≥ c` (optionally `π ≥ 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    covariance: DMatrix<f64>,
    min_return: f64,
    long_only: bool,
}

impl PortfolioProblem {
    pub fn new(covariance: DMatrix<f64>, min_return: f64, long_only: bool) -> Result<Self> {
        let m = covariance.nrows();
        if m == 0 {
            return Err(Error::Empty("covariance"));
        }
        if covariance.ncols() != m {
            return Err(Error::DimensionMismatch {
                what: "covariance must be square",
                expected: m,
                got: covariance.ncols(),
            });
        }
        if covariance.iter().any(|v| !v.is_finite()) || !min_return.is_finite() {
            return Err(Error::NonFinite("portfolio problem"));
        }
        for i in 0..m {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParameter {
                        name: "covariance",
                        reason: format!("not symmetric at ({i}, {j})"),
                    });
                }
            }
        }
        let min_eig = covariance
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidParameter {
                name: "covariance",
                reason: format!("not positive semidefinite (eigenvalue {min_eig:e})"),
            });
        }
        Ok(Self {
            covariance,
            min_return,
            long_only,
        })
    }

    pub fn identity(m: usize, min_return: f64, long_only: bool) -> Result<Self> {
        Self::new(DMatrix::identity(m, m), min_return, long_only)
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn min_return(&self) -> f64 {
        self.min_return
    }

    pub fn long_only(&self) -> bool {
        self.long_only
    }

    pub fn m(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn with_min_return(&self, min_return: f64) -> Self {
        Self {
            min_return,
            ..self.clone()
        }
    }

    /// `πᵀΣπ`.
    pub fn variance(&self, weights: &[f64]) -> Result<f64> {
        self.check_dim("weights", weights.len())?;
        let w = DVector::from_column_slice(weights);
        Ok(w.dot(&(&self.covariance * &w)))
    }

    fn check_dim(&self, what: &'static str, got: usize) -> Result<()> {
        if got == self.m() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected: self.m(),
                got,
            })
        }
    }
}

impl DecisionProblem for PortfolioProblem {
    fn decision_dim(&self) -> usize {
        self.m()
    }

    fn uncertain_dim(&self) -> usize {
        self.m()
    }

    fn objective(&self, decision: &[f64], u: &[f64]) -> Result<f64> {
        self.check_dim("returns", u.len())?;
        self.variance(decision)
    }

    fn is_feasible(&self, decision: &[f64], u: &[f64], tol: f64) -> Result<bool> {
        portfolio_feasible(self, decision, u, tol)
    }
}

/// `|1ᵀπ − 1| ≤ tol`, `yᵀπ ≥ c − tol` and, when long-only, `π ≥ −tol`.
pub fn portfolio_feasible(
    problem: &PortfolioProblem,
    weights: &[f64],
    returns: &[f64],
    tol: f64,
) -> Result<bool> {
    problem.check_dim("weights", weights.len())?;
    problem.check_dim("returns", returns.len())?;
    let budget: f64 = weights.iter().sum();
    let ret: f64 = weights.iter().zip(returns).map(|(w, y)| w * y).sum();
    let signs_ok = !problem.long_only || weights.iter().all(|&w| w >= -tol);
    Ok((budget - 1.0).abs() <= tol && ret >= problem.min_return - tol && signs_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_asset(c: f64) -> PortfolioProblem {
        PortfolioProblem::identity(2, c, false).unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let p = two_asset(0.9);
        assert!(portfolio_feasible(&p, &[0.5, 0.5], &[1.0, 1.0], 1e-9).unwrap());
        assert!(!portfolio_feasible(&p, &[0.5, 0.5], &[0.5, 0.5], 1e-9).unwrap());
        assert!(!portfolio_feasible(&p, &[0.6, 0.5], &[10.0, 10.0], 1e-9).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = two_asset(0.0);
        assert!(portfolio_feasible(&p, &[1.0], &[1.0, 1.0], 1e-9).is_err());
        assert!(portfolio_feasible(&p, &[0.5, 0.5], &[1.0], 1e-9).is_err());
    }

    #[test]
    fn long_only_rejects_shorts() {
        let p = PortfolioProblem::identity(2, 0.0, true).unwrap();
        assert!(!portfolio_feasible(&p, &[1.5, -0.5], &[1.0, 1.0], 1e-9).unwrap());
        assert!(portfolio_feasible(&two_asset(0.0), &[1.5, -0.5], &[1.0, 1.0], 1e-9).unwrap());
    }

    #[test]
    fn rejects_bad_covariance() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(PortfolioProblem::new(asym, 0.0, false).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(PortfolioProblem::new(indefinite, 0.0, false).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_min_return(
            w in prop::collection::vec(-2.0f64..2.0, 3),
            y in prop::collection::vec(-2.0f64..2.0, 3),
            c in -3.0f64..3.0,
            drop in 0.0f64..2.0,
        ) {
            let p = PortfolioProblem::identity(3, c, false).unwrap();
            let looser = p.with_min_return(c - drop);
            if portfolio_feasible(&p, &w, &y, 1e-9).unwrap() {
                prop_assert!(portfolio_feasible(&looser, &w, &y, 1e-9).unwrap());
            }
        }

        #[test]
        fn tightening_tol_never_admits(
            w in prop::collection::vec(-2.0f64..2.0, 3),
            y in prop::collection::vec(-2.0f64..2.0, 3),
            c in -3.0f64..3.0,
            tol in 0.0f64..0.5,
            shrink in 0.0f64..1.0,
        ) {
            let p = PortfolioProblem::identity(3, c, true).unwrap();
            let tight = portfolio_feasible(&p, &w, &y, tol * shrink).unwrap();
            let loose = portfolio_feasible(&p, &w, &y, tol).unwrap();
            prop_assert!(!tight || loose);
        }
    }
}

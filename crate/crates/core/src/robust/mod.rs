//! Robust minimum-variance portfolios against a learned uncertainty set.
//!
//! Boxes are handled exactly through the split `π = π⁺ − π⁻` (worst case
//! return `lᵀπ⁺ − uᵀπ⁻`), or `lᵀπ` when weights are long-only. Scenario
//! sets impose one return constraint per sampled row.

mod qp;
mod sampling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BoxUncertaintySet;
use crate::problem::PortfolioProblem;
use qp::{QpProblem, QpStatus};

pub use sampling::{hit_and_run, sample_uniform_box};

/// KKT residual an optimal exit must certify.
pub const KKT_TOL: f64 = 1e-6;

const MAX_ITERS_PER_VAR: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolution {
    pub weights: Vec<f64>,
    /// `πᵀΣπ` of the returned weights.
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    /// Why no solution exists, when `status` is infeasible.
    pub certificate: Option<String>,
}

impl RobustSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// `min πᵀΣπ` s.t. `1ᵀπ = 1` and `yᵀπ ≥ c` for every `y` in the box.
pub fn solve_box_robust(problem: &PortfolioProblem, bx: &BoxUncertaintySet) -> Result<RobustSolution> {
    let m = problem.m();
    if bx.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "box dimension vs portfolio size",
            expected: m,
            got: bx.dim(),
        });
    }
    let lower = DVector::from_column_slice(bx.lower());
    if problem.long_only() {
        let rows = DMatrix::from_row_slice(1, m, bx.lower());
        let mut sol = solve_long_only(problem, &rows)?;
        if sol.status == SolveStatus::Infeasible {
            sol.certificate = Some(format!(
                "largest worst-case return of a long-only portfolio is max(lower) = {} < c = {}",
                lower.max(),
                problem.min_return()
            ));
        }
        return Ok(sol);
    }
    let mut row = DMatrix::zeros(1, 2 * m);
    for j in 0..m {
        row[(0, j)] = bx.lower()[j];
        row[(0, m + j)] = -bx.upper()[j];
    }
    solve_split(problem, row)
}

/// `min πᵀΣπ` s.t. `1ᵀπ = 1` and `Yπ ≥ c` row by row.
pub fn solve_scenario_robust(problem: &PortfolioProblem, scenarios: &DMatrix<f64>) -> Result<RobustSolution> {
    let m = problem.m();
    if scenarios.nrows() == 0 {
        return Err(Error::Empty("scenarios"));
    }
    if scenarios.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "scenario columns vs portfolio size",
            expected: m,
            got: scenarios.ncols(),
        });
    }
    if scenarios.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scenarios"));
    }
    if problem.long_only() {
        return solve_long_only(problem, scenarios);
    }
    let mut rows = DMatrix::zeros(scenarios.nrows(), 2 * m);
    rows.view_mut((0, 0), (scenarios.nrows(), m)).copy_from(scenarios);
    rows.view_mut((0, m), (scenarios.nrows(), m)).copy_from(&(-scenarios));
    solve_split(problem, rows)
}

/// Non-robust problem with a single return vector.
pub fn solve_nominal(problem: &PortfolioProblem, returns: &[f64]) -> Result<RobustSolution> {
    solve_scenario_robust(problem, &DMatrix::from_row_slice(1, returns.len(), returns))
}

fn solve_long_only(problem: &PortfolioProblem, rows: &DMatrix<f64>) -> Result<RobustSolution> {
    let m = problem.m();
    let qp = QpProblem {
        h: problem.covariance() * 2.0,
        eq: DMatrix::from_element(1, m, 1.0),
        eq_rhs: DVector::from_element(1, 1.0),
        ineq: rows.clone(),
        ineq_rhs: DVector::from_element(rows.nrows(), problem.min_return()),
    };
    let out = qp.solve(MAX_ITERS_PER_VAR * (m + rows.nrows()))?;
    finish(problem, out.x.iter().copied().collect(), out.status, out.kkt_residual)
}

fn solve_split(problem: &PortfolioProblem, rows: DMatrix<f64>) -> Result<RobustSolution> {
    let m = problem.m();
    let s = problem.covariance();
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(&(s * 2.0));
    h.view_mut((m, m), (m, m)).copy_from(&(s * 2.0));
    h.view_mut((0, m), (m, m)).copy_from(&(s * -2.0));
    h.view_mut((m, 0), (m, m)).copy_from(&(s * -2.0));
    let mut eq = DMatrix::from_element(1, 2 * m, 1.0);
    eq.view_mut((0, m), (1, m)).fill(-1.0);
    let nrows = rows.nrows();
    let qp = QpProblem {
        h,
        eq,
        eq_rhs: DVector::from_element(1, 1.0),
        ineq: rows,
        ineq_rhs: DVector::from_element(nrows, problem.min_return()),
    };
    let out = qp.solve(MAX_ITERS_PER_VAR * (2 * m + nrows))?;
    let weights = (0..m).map(|j| out.x[j] - out.x[m + j]).collect();
    finish(problem, weights, out.status, out.kkt_residual)
}

fn finish(problem: &PortfolioProblem, weights: Vec<f64>, status: QpStatus, kkt: f64) -> Result<RobustSolution> {
    let status = match status {
        QpStatus::Optimal if kkt <= KKT_TOL => SolveStatus::Optimal,
        QpStatus::Infeasible => SolveStatus::Infeasible,
        _ => SolveStatus::MaxIter,
    };
    if status == SolveStatus::Infeasible {
        return Ok(RobustSolution {
            weights: vec![0.0; problem.m()],
            objective: f64::NAN,
            status,
            kkt_residual: f64::INFINITY,
            certificate: Some(format!(
                "no fully invested portfolio meets return {} under every scenario",
                problem.min_return()
            )),
        });
    }
    Ok(RobustSolution {
        objective: problem.variance(&weights)?,
        weights,
        status,
        kkt_residual: kkt,
        certificate: None,
    })
}

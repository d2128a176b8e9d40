//! Primal active-set method for `min ½ xᵀHx` subject to `Ex = f`, `Gx ≥ h`,
//! `x ≥ 0`, with `H` symmetric PSD (possibly singular).
//!
//! A feasible vertex comes from the simplex phase 1. Each iteration
//! minimizes over the null space of the working set with a pseudo-inverse
//! of the reduced Hessian. Since the objective has no linear term, the
//! gradient `Hx` lies in range(H), so directions of zero curvature never
//! decrease the objective and the pseudo-inverse step is exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::psd_pinv;
use crate::lp::{self, Constraint, Relation};

const ACTIVE_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-13;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

pub(crate) struct QpProblem {
    pub h: DMatrix<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

pub(crate) struct QpOutcome {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
}

impl QpProblem {
    fn n(&self) -> usize {
        self.h.nrows()
    }

    /// Inequality rows including the bounds `x ≥ 0` (appended last).
    fn all_ineq(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n();
        let p = self.ineq.nrows();
        let mut g = DMatrix::zeros(p + n, n);
        g.rows_mut(0, p).copy_from(&self.ineq);
        g.view_mut((p, 0), (n, n)).fill_with_identity();
        let mut h = DVector::zeros(p + n);
        h.rows_mut(0, p).copy_from(&self.ineq_rhs);
        (g, h)
    }

    fn phase_one(&self) -> Result<Option<DVector<f64>>> {
        let n = self.n();
        let mut rows = Vec::with_capacity(self.eq.nrows() + self.ineq.nrows());
        for i in 0..self.eq.nrows() {
            rows.push(Constraint::new(self.eq.row(i).iter().copied().collect(), Relation::Eq, self.eq_rhs[i]));
        }
        for i in 0..self.ineq.nrows() {
            rows.push(Constraint::new(self.ineq.row(i).iter().copied().collect(), Relation::Ge, self.ineq_rhs[i]));
        }
        // Pushing toward small x keeps the start near the bounded part of the region.
        match lp::minimize(&vec![1.0; n], &rows) {
            Ok(sol) => Ok(Some(DVector::from_vec(sol.x))),
            Err(Error::Lp("infeasible")) => Ok(None),
            Err(Error::Lp("unbounded")) => match lp::maximize(&vec![0.0; n], &rows) {
                Ok(sol) => Ok(Some(DVector::from_vec(sol.x))),
                Err(Error::Lp("infeasible")) => Ok(None),
                Err(e) => Err(e),
            },
            Err(e) => Err(e),
        }
    }

    pub(crate) fn solve(&self, max_iters: usize) -> Result<QpOutcome> {
        let n = self.n();
        let Some(mut x) = self.phase_one()? else {
            return Ok(QpOutcome {
                x: DVector::zeros(n),
                status: QpStatus::Infeasible,
                kkt_residual: f64::INFINITY,
            });
        };
        let (g, gh) = self.all_ineq();
        let scale = 1.0 + x.amax();

        // Initial working set: the active inequalities that are independent of the rest.
        let mut working: Vec<usize> = Vec::new();
        for i in 0..g.nrows() {
            let slack = g.row(i).dot(&x.transpose()) - gh[i];
            if slack.abs() <= ACTIVE_TOL * scale && self.independent(&g, &working, i) {
                working.push(i);
            }
        }

        let mut status = QpStatus::MaxIter;
        for _ in 0..max_iters {
            let a = self.working_matrix(&g, &working);
            let grad = &self.h * &x;
            let z = null_space(&a, n);
            let p = if z.ncols() == 0 {
                DVector::zeros(n)
            } else {
                let reduced = z.transpose() * &self.h * &z;
                -(&z * (psd_pinv(&reduced) * (z.transpose() * &grad)))
            };
            if p.amax() <= STEP_TOL * (1.0 + x.amax()) {
                let lambda = multipliers(&a, &grad);
                let k = self.eq.nrows();
                let worst = working
                    .iter()
                    .enumerate()
                    .map(|(w, &row)| (row, lambda[k + w]))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((row, l)) if l < -1e-12 * (1.0 + grad.amax()) => working.retain(|&r| r != row),
                    _ => {
                        status = QpStatus::Optimal;
                        break;
                    }
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for i in 0..g.nrows() {
                if working.contains(&i) {
                    continue;
                }
                let gp = g.row(i).dot(&p.transpose());
                if gp < -1e-14 * p.amax() {
                    let slack = (g.row(i).dot(&x.transpose()) - gh[i]).max(0.0);
                    let step = slack / -gp;
                    if step < alpha {
                        alpha = step;
                        blocking = Some(i);
                    }
                }
            }
            x += &p * alpha;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        // Clean tiny bound violations left by rounding.
        x.iter_mut().for_each(|v| {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        });
        let kkt_residual = self.kkt_residual(&x, &g, &gh);
        Ok(QpOutcome { x, status, kkt_residual })
    }

    fn working_matrix(&self, g: &DMatrix<f64>, working: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let k = self.eq.nrows();
        let mut a = DMatrix::zeros(k + working.len(), n);
        a.rows_mut(0, k).copy_from(&self.eq);
        for (w, &i) in working.iter().enumerate() {
            a.row_mut(k + w).copy_from(&g.row(i));
        }
        a
    }

    fn independent(&self, g: &DMatrix<f64>, working: &[usize], candidate: usize) -> bool {
        let a = self.working_matrix(g, working);
        let row = g.row(candidate).transpose();
        if a.nrows() == 0 {
            return row.norm() > RANK_TOL;
        }
        let coeffs = multipliers(&a, &row);
        (row - a.transpose() * coeffs).norm() > RANK_TOL * (1.0 + g.row(candidate).norm())
    }

    /// Max of stationarity, primal infeasibility, dual infeasibility and complementarity.
    fn kkt_residual(&self, x: &DVector<f64>, g: &DMatrix<f64>, gh: &DVector<f64>) -> f64 {
        let n = self.n();
        let scale = 1.0 + x.amax();
        let slacks = g * x - gh;
        let active: Vec<usize> = (0..g.nrows()).filter(|&i| slacks[i].abs() <= 1e-8 * scale).collect();
        let k = self.eq.nrows();
        let mut a = DMatrix::zeros(k + active.len(), n);
        a.rows_mut(0, k).copy_from(&self.eq);
        for (w, &i) in active.iter().enumerate() {
            a.row_mut(k + w).copy_from(&g.row(i));
        }
        let grad = &self.h * x;
        // Nonnegative least squares over the active inequalities, by dropping negatives.
        let mut keep: Vec<usize> = (0..active.len()).collect();
        let mut lambda;
        loop {
            let mut sub = DMatrix::zeros(k + keep.len(), n);
            sub.rows_mut(0, k).copy_from(&self.eq);
            for (w, &i) in keep.iter().enumerate() {
                sub.row_mut(k + w).copy_from(&a.row(k + i));
            }
            lambda = multipliers(&sub, &grad);
            let neg = (0..keep.len()).filter(|&w| lambda[k + w] < 0.0).min_by(|&a, &b| lambda[k + a].total_cmp(&lambda[k + b]));
            match neg {
                Some(w) if lambda[k + w] < -1e-12 => {
                    keep.remove(w);
                }
                _ => {
                    let stationarity = (&grad - sub.transpose() * &lambda).amax();
                    let dual = (0..keep.len()).map(|w| (-lambda[k + w]).max(0.0)).fold(0.0, f64::max);
                    let comp = keep
                        .iter()
                        .enumerate()
                        .map(|(w, &i)| (lambda[k + w] * slacks[active[i]]).abs())
                        .fold(0.0, f64::max);
                    let eq_viol = (&self.eq * x - &self.eq_rhs).amax();
                    let in_viol = slacks.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max);
                    return stationarity.max(dual).max(comp).max(eq_viol).max(in_viol);
                }
            }
        }
    }
}

/// Orthonormal basis of `{p : Ap = 0}`.
fn null_space(a: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let eig = (a.transpose() * a).symmetric_eigen();
    let max = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= RANK_TOL * max).collect();
    let mut z = DMatrix::zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        z.set_column(j, &eig.eigenvectors.column(i));
    }
    z
}

/// Least-squares solution of `Aᵀλ = v`.
fn multipliers(a: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    psd_pinv(&(a * a.transpose())) * (a * v)
}

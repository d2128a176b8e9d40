//! Dense two-phase simplex for small linear programs `max cᵀx s.t. Ax {≤,=,≥} b, x ≥ 0`.
//!
//! Every row carries an artificial column, so the final tableau exposes
//! `B⁻¹` and hence the dual vector; solutions report their duality gap.

use crate::error::{Error, Result};

/// Gap below which a solution counts as certified optimal.
pub const GAP_TOL: f64 = 1e-7;

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coefficients,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, sign-conventional for a maximization.
    pub duals: Vec<f64>,
    pub duality_gap: f64,
    pub dual_infeasibility: f64,
}

impl LpSolution {
    pub fn certified(&self) -> bool {
        let scale = 1.0 + self.objective.abs();
        self.duality_gap <= GAP_TOL * scale && self.dual_infeasibility <= GAP_TOL * scale
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (v, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        let f = cost[pc];
        if f != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on reduced-cost row `cost` (maximization:
    /// enter on positive reduced cost). Columns with `allowed[c] == false` never enter.
    fn optimize(&mut self, cost: &mut [f64], allowed: &[bool]) -> Result<()> {
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = PIVOT_TOL;
            for c in 0..self.cols {
                if allowed[c] && cost[c] > best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = cost[c];
                }
            }
            let Some(pc) = enter else {
                return Ok(());
            };
            let mut leave = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12
                            && leave.is_some_and(|l: usize| self.basis[r] < self.basis[l]));
                    if better {
                        best_ratio = ratio;
                        leave = Some(r);
                    }
                }
            }
            let Some(pr) = leave else {
                return Err(Error::Lp("unbounded"));
            };
            if best_ratio.abs() < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc, cost);
        }
        Err(Error::Lp("not solved within the iteration limit"))
    }
}

/// Maximizes `cᵀx` subject to `constraints` and `x ≥ 0`.
pub fn maximize(objective: &[f64], constraints: &[Constraint]) -> Result<LpSolution> {
    let n = objective.len();
    let m = constraints.len();
    if n == 0 {
        return Err(Error::Empty("objective"));
    }
    for c in constraints {
        if c.coefficients.len() != n {
            return Err(Error::DimensionMismatch {
                what: "constraint length",
                expected: n,
                got: c.coefficients.len(),
            });
        }
    }

    // columns: [x (n) | slacks (n_slack) | artificials (m)]
    let n_slack = constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let art0 = n + n_slack;
    let cols = art0 + m;
    let w = cols + 1;
    let mut data = vec![0.0; m * w];
    let mut flip = vec![1.0; m];
    let mut slack = 0;
    for (r, c) in constraints.iter().enumerate() {
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        flip[r] = sign;
        for (j, a) in c.coefficients.iter().enumerate() {
            data[r * w + j] = sign * a;
        }
        match c.relation {
            Relation::Le => {
                data[r * w + n + slack] = sign;
                slack += 1;
            }
            Relation::Ge => {
                data[r * w + n + slack] = -sign;
                slack += 1;
            }
            Relation::Eq => {}
        }
        data[r * w + art0 + r] = 1.0;
        data[r * w + cols] = sign * c.rhs;
    }
    let mut t = Tableau {
        rows: m,
        cols,
        data,
        basis: (art0..art0 + m).collect(),
    };

    // phase 1: maximize −Σ artificials
    let mut cost1 = vec![0.0; w];
    for r in 0..m {
        for c in 0..w {
            cost1[c] += t.at(r, c);
        }
    }
    for c in art0..cols {
        cost1[c] = 0.0;
    }
    let all = vec![true; cols];
    t.optimize(&mut cost1, &all)?;
    let infeas: f64 = (0..m)
        .filter(|&r| t.basis[r] >= art0)
        .map(|r| t.rhs(r))
        .sum();
    let b_scale = 1.0 + constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
    if infeas > FEAS_TOL * b_scale {
        return Err(Error::Lp("infeasible"));
    }
    for r in 0..m {
        if t.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                let mut dummy = vec![0.0; w];
                t.pivot(r, c, &mut dummy);
            }
        }
    }

    // phase 2 reduced costs: c_j − c_Bᵀ B⁻¹ A_j
    let full_cost = |c: usize| if c < n { objective[c] } else { 0.0 };
    let mut cost2 = vec![0.0; w];
    for c in 0..cols {
        cost2[c] = full_cost(c);
    }
    for r in 0..m {
        let cb = full_cost(t.basis[r]);
        if cb != 0.0 {
            for c in 0..w {
                cost2[c] -= cb * t.at(r, c);
            }
        }
    }
    let mut allowed = vec![true; cols];
    for a in allowed.iter_mut().skip(art0) {
        *a = false;
    }
    t.optimize(&mut cost2, &allowed)?;

    let mut x = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let obj: f64 = x.iter().zip(objective).map(|(a, b)| a * b).sum();
    // artificial column r has cost 0, so its reduced cost is −(c_B B⁻¹)_r
    let duals: Vec<f64> = (0..m).map(|r| -cost2[art0 + r] * flip[r]).collect();
    let dual_obj: f64 = duals.iter().zip(constraints).map(|(y, c)| y * c.rhs).sum();
    let mut dual_infeas: f64 = 0.0;
    for j in 0..n {
        let aty: f64 = constraints
            .iter()
            .zip(&duals)
            .map(|(c, y)| c.coefficients[j] * y)
            .sum();
        dual_infeas = dual_infeas.max(objective[j] - aty);
    }
    for (c, y) in constraints.iter().zip(&duals) {
        let wrong_sign = match c.relation {
            Relation::Le => -y,
            Relation::Ge => *y,
            Relation::Eq => 0.0,
        };
        dual_infeas = dual_infeas.max(wrong_sign);
    }
    Ok(LpSolution {
        x,
        objective: obj,
        duals,
        duality_gap: (obj - dual_obj).abs(),
        dual_infeasibility: dual_infeas.max(0.0),
    })
}

/// Minimizes `cᵀx`; the reported objective is the minimum.
pub fn minimize(objective: &[f64], constraints: &[Constraint]) -> Result<LpSolution> {
    let neg: Vec<f64> = objective.iter().map(|v| -v).collect();
    let mut sol = maximize(&neg, constraints)?;
    sol.objective = -sol.objective;
    for y in &mut sol.duals {
        *y = -*y;
    }
    Ok(sol)
}

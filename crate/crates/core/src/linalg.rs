use nalgebra::{DMatrix, DVector};

/// Minimizes `½ βᵀHβ − gᵀβ` over `‖β‖₂ ≤ radius` for symmetric PSD `H`.
///
/// Works in the eigenbasis of `H`; the boundary multiplier is found by
/// bisection on the secular equation `‖(H + λI)⁻¹g‖ = radius`.
pub(crate) fn min_quadratic_in_ball(h: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> DVector<f64> {
    let eig = h.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let s: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let gp = eig.eigenvectors.transpose() * g;
    let null_tol = 1e-12 * scale;

    let solve = |lambda: f64| -> DVector<f64> {
        let coeffs = DVector::from_iterator(
            s.len(),
            s.iter().zip(gp.iter()).map(|(&si, &gi)| {
                let denom = si + lambda;
                if denom <= null_tol {
                    0.0
                } else {
                    gi / denom
                }
            }),
        );
        &eig.eigenvectors * coeffs
    };

    let gnorm = g.norm();
    let null_mass: f64 = s
        .iter()
        .zip(gp.iter())
        .filter(|(&si, _)| si <= null_tol)
        .map(|(_, gi)| gi * gi)
        .sum::<f64>()
        .sqrt();
    if null_mass <= 1e-12 * gnorm.max(1.0) {
        let free = solve(0.0);
        if free.norm() <= radius {
            return free;
        }
    }

    let mut lo = 0.0;
    let mut hi = gnorm / radius + null_tol;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if solve(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut beta = solve(hi);
    crate::model::project_ball(&mut beta, radius);
    beta
}

/// Inverse of a symmetric positive definite matrix, or its smallest eigenvalue on failure.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, f64> {
    let eig = a.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if !(min > 1e-12 * max) {
        return Err(min);
    }
    let inv_s = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    Ok(&eig.eigenvectors * inv_s * eig.eigenvectors.transpose())
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix.
pub(crate) fn psd_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let inv_s = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| {
        if v > 1e-12 * max {
            1.0 / v
        } else {
            0.0
        }
    }));
    &eig.eigenvectors * inv_s * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_solution_matches_linear_solve() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let beta = min_quadratic_in_ball(&h, &g, 100.0);
        let residual = &h * &beta - &g;
        assert!(residual.norm() < 1e-10);
    }

    #[test]
    fn boundary_solution_satisfies_kkt() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let g = DVector::from_vec(vec![4.0, 4.0]);
        let beta = min_quadratic_in_ball(&h, &g, 1.0);
        assert!((beta.norm() - 1.0).abs() < 1e-9);
        // gradient points inward along β: g − Hβ = λβ with λ ≥ 0
        let r = &g - &h * &beta;
        let lambda = r.dot(&beta);
        assert!(lambda > 0.0);
        assert!((r - &beta * lambda).norm() < 1e-8);
    }

    #[test]
    fn singular_hessian_unbounded_direction() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let g = DVector::from_vec(vec![0.0, 1.0]);
        let beta = min_quadratic_in_ball(&h, &g, 2.0);
        assert!((beta[1] - 2.0).abs() < 1e-8);
    }
}

//! Empirical Rademacher averages and closed-form complexity bounds.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_prob_open, Error, Result};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    MonteCarlo,
    AnalyticLinear,
    AnalyticKernel,
    AnalyticVc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
    pub method: EstimateMethod,
}

impl RademacherEstimate {
    pub fn analytic(value: f64, method: EstimateMethod) -> Self {
        Self {
            value,
            std_error: 0.0,
            draws: 1,
            method,
        }
    }
}

/// Monte Carlo estimate of `R_S(B₀)` for `B₀ = {x ↦ βᵀx : ‖β‖₂ ≤ B_b}`.
///
/// For each sign draw the supremum is exact: `sup_β |Σ σⁱ βᵀxⁱ| = B_b ‖Σ σⁱ xⁱ‖₂`.
pub fn empirical_rademacher_linear(
    data: &Dataset,
    norm_bound: f64,
    draws: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    empirical_rademacher_linear_partitioned(data, norm_bound, draws, seed, 1)
}

/// Same estimator with draws split into `partitions` independent streams.
///
/// Partition `p` draws from ChaCha stream `p` of `seed`; partial sums are merged
/// in partition order, so the result depends only on `(seed, draws, partitions)`.
pub fn empirical_rademacher_linear_partitioned(
    data: &Dataset,
    norm_bound: f64,
    draws: usize,
    seed: u64,
    partitions: usize,
) -> Result<RademacherEstimate> {
    if draws == 0 {
        return Err(Error::InvalidParameter {
            name: "draws",
            reason: "must be at least 1".into(),
        });
    }
    check_positive("norm_bound", norm_bound)?;
    let partitions = partitions.clamp(1, draws);
    let n = data.n();
    let x = data.features();
    let scale = norm_bound / n as f64;

    let partial: Vec<(f64, f64)> = (0..partitions)
        .into_par_iter()
        .map(|p| {
            let count = draws / partitions + usize::from(p < draws % partitions);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut acc = DVector::zeros(data.d());
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..count {
                acc.fill(0.0);
                for i in 0..n {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    for (k, v) in x.row(i).iter().enumerate() {
                        acc[k] += s * v;
                    }
                }
                let v = scale * acc.norm();
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();

    let (sum, sumsq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let k = draws as f64;
    let mean = sum / k;
    let var = if draws > 1 {
        ((sumsq - k * mean * mean) / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        value: mean,
        std_error: (var / k).sqrt(),
        draws,
        method: EstimateMethod::MonteCarlo,
    })
}

/// Ledoux–Talagrand contraction: `R(l ∘ F) ≤ 2L·R(F)` for `L`-Lipschitz `l`.
pub fn contraction_bound(lipschitz: f64, base: RademacherEstimate) -> Result<RademacherEstimate> {
    check_positive("lipschitz", lipschitz)?;
    Ok(RademacherEstimate {
        value: 2.0 * lipschitz * base.value,
        std_error: 2.0 * lipschitz * base.std_error,
        ..base
    })
}

/// Bounds for the `ℓ2`-bounded linear class:
/// `R(B₀) ≤ X_b B_b/√n` and, for squared loss, `R(l∘B₀) ≤ 8 (X_b B_b)²/√n`.
pub fn linear_class_bounds(x_bound: f64, norm_bound: f64, n: usize) -> Result<(f64, f64)> {
    check_positive("x_bound", x_bound)?;
    check_positive("norm_bound", norm_bound)?;
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    let xb = x_bound * norm_bound;
    let root_n = (n as f64).sqrt();
    Ok((xb / root_n, 8.0 * xb * xb / root_n))
}

/// `2L (B_b/n) √(Σᵢ k(xⁱ, xⁱ))` for an RKHS ball and an `L`-Lipschitz loss.
pub fn kernel_class_bound(gram_diagonal: &[f64], norm_bound: f64, lipschitz: f64, n: usize) -> Result<f64> {
    if let Some(bad) = gram_diagonal.iter().find(|&&k| !(k >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "gram_diagonal",
            reason: format!("entry {bad} is negative"),
        });
    }
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    let trace: f64 = gram_diagonal.iter().sum();
    Ok(2.0 * lipschitz * (norm_bound / n as f64) * trace.sqrt())
}

/// Upper bound on the population average from the empirical one:
/// `R ≤ R_S + M √(log(1/δ₃) / (2n))`.
pub fn population_from_empirical(empirical: f64, loss_range: f64, delta: f64, n: usize) -> Result<f64> {
    check_prob_open("delta", delta)?;
    check_positive("loss_range", loss_range)?;
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    Ok(empirical + loss_range * ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Massart/Sauer bound for a `{0,1}`-valued class of VC dimension `vc`:
/// `R ≤ √(2·vc·ln(e·n/vc) / n)` for `n ≥ vc`, else 1.
pub fn vc_class_bound(vc: usize, n: usize) -> Result<f64> {
    if vc == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            name: "vc",
            reason: "vc dimension and n must be positive".into(),
        });
    }
    if n <= vc {
        return Ok(1.0);
    }
    let (v, nf) = (vc as f64, n as f64);
    Ok((2.0 * v * (std::f64::consts::E * nf / v).ln() / nf).sqrt().min(1.0))
}

/// VC dimension bound for miss indicators of symmetric slabs `|y − βᵀx| > w`
/// with `β ∈ ℝᵈ`: complements of intersections of two half-spaces in
/// `ℝ^{d+1}`, bounded by `2·v·k·log₂(3k)` with `v = d + 2`, `k = 2`.
pub fn slab_vc_dimension(d: usize) -> usize {
    let v = (d + 2) as f64;
    (2.0 * v * 2.0 * 6f64.log2()).ceil() as usize
}

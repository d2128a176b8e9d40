//! Theorem bounds, synthetic data and the Monte Carlo validation harness.

mod bounds;
mod harness;
mod synth;

pub use bounds::{
    r_minus_eps, r_plus_eps, theorem1_bound, theorem1_raw, theorem2_bound, theorem2_empirical_term, theorem2_raw,
    theorem3_bound, theorem5_bound, theorem5_raw,
};
pub use harness::{
    finite_class_check, monte_carlo_feasibility, EpsPoint, FiniteClassConfig, FiniteClassReport, GuaranteeReport,
    PipelineConfig, RadPlugIn, TheoremId, EPS_SWEEP, INNER_TOL,
};
pub use synth::{generate, oracle_best_in_class, random_ball_models, residual_support_estimate, SynthKind, SynthSpec};

use crate::error::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% confidence.
pub fn wilson_ci(successes: usize, trials: usize) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Empty("trials"));
    }
    if successes > trials {
        return Err(Error::InvalidParameter {
            name: "successes",
            reason: format!("{successes} exceeds {trials} trials"),
        });
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

use crate::error::{check_positive, Error, Result};
use crate::learners::{empirical_loss, LossKind};
use crate::model::{Dataset, LinearModel};

const PRIOR_SUM_TOL: f64 = 1e-9;
const BOUNDARY_SLACK: f64 = 1e-12;

/// `(ln P(β) − α) / (nC)`; `−∞` for zero prior mass.
pub fn pacbayes_threshold(prior_mass: f64, n: usize, c: f64, alpha: f64) -> f64 {
    (prior_mass.ln() - alpha) / (n as f64 * c)
}

/// Members of a finite class with `l_S(β) ≤ (ln P(β) − α)/(nC)`.
/// The result is frequently empty, which is not an error.
pub fn build_pacbayes_set(
    data: &Dataset,
    models: &[LinearModel],
    prior: &[f64],
    loss: LossKind,
    c: f64,
    alpha: f64,
) -> Result<Vec<usize>> {
    if prior.len() != models.len() {
        return Err(Error::DimensionMismatch {
            what: "prior length vs class size",
            expected: models.len(),
            got: prior.len(),
        });
    }
    check_positive("C", c)?;
    check_positive("alpha", alpha)?;
    if prior.iter().any(|p| !(0.0..=1.0).contains(p)) || (prior.iter().sum::<f64>() - 1.0).abs() > PRIOR_SUM_TOL {
        return Err(Error::InvalidParameter {
            name: "prior",
            reason: "must be a probability vector".into(),
        });
    }
    let mut members = Vec::new();
    for (i, (model, &p)) in models.iter().zip(prior).enumerate() {
        let t = pacbayes_threshold(p, data.n(), c, alpha);
        if empirical_loss(model, data, loss)? <= t + BOUNDARY_SLACK {
            members.push(i);
        }
    }
    Ok(members)
}

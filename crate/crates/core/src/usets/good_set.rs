use serde::{Deserialize, Serialize};

use crate::complexity::RademacherEstimate;
use crate::error::{check_positive, check_prob_open, Error, Result};
use crate::learners::{empirical_loss, LossKind};
use crate::model::{Dataset, LinearModel};

/// Slack for the membership check of the reference model.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;

/// Sublevel set `{β : ‖β‖ ≤ B_b, l_S(β) ≤ threshold}` around a reference model.
#[derive(Debug, Clone)]
pub struct GoodModelSet<'a> {
    reference: LinearModel,
    loss: LossKind,
    threshold: f64,
    data: &'a Dataset,
    reference_loss: f64,
}

impl<'a> GoodModelSet<'a> {
    pub fn new(data: &'a Dataset, reference: LinearModel, loss: LossKind, threshold: f64) -> Result<Self> {
        let reference_loss = empirical_loss(&reference, data, loss)?;
        if !(threshold >= reference_loss - MEMBERSHIP_SLACK) {
            return Err(Error::ThresholdBelowAttainable {
                threshold,
                attainable: reference_loss,
            });
        }
        Ok(Self {
            reference,
            loss,
            threshold,
            data,
            reference_loss,
        })
    }

    pub fn reference(&self) -> &LinearModel {
        &self.reference
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn norm_bound(&self) -> f64 {
        self.reference.norm_bound()
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    /// `l_S(reference)`.
    pub fn reference_loss(&self) -> f64 {
        self.reference_loss
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        Self::new(self.data, self.reference.clone(), self.loss, threshold)
    }

    pub fn contains(&self, model: &LinearModel) -> Result<bool> {
        Ok(model.coefficients().norm() <= self.norm_bound() + crate::model::NORM_SLACK
            && empirical_loss(model, self.data, self.loss)? <= self.threshold)
    }
}

/// Residual support `(e, δ_e)`: `P(|y − β*(x)| ≤ e) ≥ 1 − δ_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSupport {
    half_width: f64,
    miss_prob: f64,
}

impl ResidualSupport {
    pub fn new(half_width: f64, miss_prob: f64) -> Result<Self> {
        if !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("{half_width} must be finite and nonnegative"),
            });
        }
        if !(0.0..=1.0).contains(&miss_prob) {
            return Err(Error::InvalidParameter {
                name: "miss_prob",
                reason: format!("{miss_prob} is not in [0, 1]"),
            });
        }
        Ok(Self {
            half_width,
            miss_prob,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn miss_prob(&self) -> f64 {
        self.miss_prob
    }
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::Empty("sample"))
    } else {
        Ok(n as f64)
    }
}

/// `2 R_S(l∘B₀) + 4M √(log(3/δ) / (2n))`.
pub fn rademacher_slack(n: usize, loss_range: f64, delta: f64, rad: f64) -> Result<f64> {
    check_prob_open("delta", delta)?;
    check_positive("loss_range", loss_range)?;
    let n = check_n(n)?;
    Ok(2.0 * rad + 4.0 * loss_range * ((3.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// `2 R(l∘B₀) + 3M √(log(2/δ) / (2n))` for a population-level complexity.
pub fn population_rademacher_slack(n: usize, loss_range: f64, delta: f64, rad: f64) -> Result<f64> {
    check_prob_open("delta", delta)?;
    check_positive("loss_range", loss_range)?;
    let n = check_n(n)?;
    Ok(2.0 * rad + 3.0 * loss_range * ((2.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// `M √((log|B₀| + log(2/δ)) / (2n)) + M √(log(2/δ) / (2n))`.
pub fn finite_class_slack(n: usize, loss_range: f64, delta: f64, class_size: usize) -> Result<f64> {
    check_prob_open("delta", delta)?;
    check_positive("loss_range", loss_range)?;
    if class_size == 0 {
        return Err(Error::InvalidParameter {
            name: "class_size",
            reason: "must be at least 1".into(),
        });
    }
    let n = check_n(n)?;
    let log2d = (2.0 / delta).ln();
    Ok(loss_range * (((class_size as f64).ln() + log2d) / (2.0 * n)).sqrt()
        + loss_range * (log2d / (2.0 * n)).sqrt())
}

/// Good-set threshold from the empirical Rademacher average of `l∘B₀`.
/// With a pinball loss this gives the per-quantile sets `B^τ`.
pub fn good_set_threshold_rademacher(
    data: &Dataset,
    reference: &LinearModel,
    loss: LossKind,
    loss_range: f64,
    delta: f64,
    rad: &RademacherEstimate,
) -> Result<f64> {
    Ok(empirical_loss(reference, data, loss)? + rademacher_slack(data.n(), loss_range, delta, rad.value)?)
}

/// Threshold variant built on the population Rademacher average.
pub fn good_set_threshold_population(
    data: &Dataset,
    reference: &LinearModel,
    loss: LossKind,
    loss_range: f64,
    delta: f64,
    rad: f64,
) -> Result<f64> {
    Ok(empirical_loss(reference, data, loss)?
        + population_rademacher_slack(data.n(), loss_range, delta, rad)?)
}

/// Good-set threshold for a finite hypothesis class of `class_size` models.
pub fn good_set_threshold_finite(
    data: &Dataset,
    reference: &LinearModel,
    loss: LossKind,
    loss_range: f64,
    delta: f64,
    class_size: usize,
) -> Result<f64> {
    Ok(empirical_loss(reference, data, loss)? + finite_class_slack(data.n(), loss_range, delta, class_size)?)
}

/// Indices of the models in a finite class whose empirical loss is within `threshold`.
pub fn finite_good_set(data: &Dataset, class: &[LinearModel], loss: LossKind, threshold: f64) -> Result<Vec<usize>> {
    let mut members = Vec::new();
    for (i, model) in class.iter().enumerate() {
        if empirical_loss(model, data, loss)? <= threshold {
            members.push(i);
        }
    }
    Ok(members)
}

/// Empirical risk minimizer over a finite class (first index on ties).
pub fn finite_erm(data: &Dataset, class: &[LinearModel], loss: LossKind) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, model) in class.iter().enumerate() {
        let l = empirical_loss(model, data, loss)?;
        if best.is_none_or(|(_, b)| l < b) {
            best = Some((i, l));
        }
    }
    best.ok_or(Error::Empty("hypothesis class"))
}

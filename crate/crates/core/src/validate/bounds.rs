//! Closed-form feasibility guarantees. Each `*_raw` function returns the
//! expression before clamping, which goes negative when the bound is vacuous.

use crate::error::{check_positive, check_prob_open, Error, Result};
use crate::model::{Dataset, LinearModel};

/// `min(1, max(0, −z/ε))`.
pub fn r_minus_eps(z: f64, eps: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    Ok((-z / eps).clamp(0.0, 1.0))
}

/// `min(1, max(0, 1 − z/ε))`.
pub fn r_plus_eps(z: f64, eps: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    Ok((1.0 - z / eps).clamp(0.0, 1.0))
}

fn check_m(m: usize) -> Result<i32> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must be at least 1".into(),
        });
    }
    i32::try_from(m).map_err(|_| Error::InvalidParameter {
        name: "m",
        reason: "too large".into(),
    })
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} is not in [0, 1]"),
        })
    }
}

fn concentration(delta_num: f64, delta: f64, n: usize) -> Result<f64> {
    check_prob_open("delta", delta)?;
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    Ok(((delta_num / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Per-coordinate term `1 − miss − 2R − √(log(1/δ)/(2n))`.
pub fn theorem1_raw(miss_rate: f64, rad: f64, n: usize, delta: f64) -> Result<f64> {
    check_unit("miss_rate", miss_rate)?;
    Ok(1.0 - miss_rate - 2.0 * rad - concentration(1.0, delta, n)?)
}

/// `([1 − miss − 2R(l∘I) − √(log(1/δ)/(2n))]₊)ᵐ`.
pub fn theorem1_bound(miss_rate: f64, rad: f64, n: usize, delta: f64, m: usize) -> Result<f64> {
    let m = check_m(m)?;
    Ok(theorem1_raw(miss_rate, rad, n, delta)?.max(0.0).powi(m).min(1.0))
}

/// Mean of `r⁻_ε(y − hi(x)) − r⁺_ε(y − lo(x))` over the sample.
pub fn theorem2_empirical_term(data: &Dataset, lo: &LinearModel, hi: &LinearModel, eps: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    let rl = data.residuals(lo)?;
    let rh = data.residuals(hi)?;
    let mut sum = 0.0;
    for (zl, zh) in rl.iter().zip(rh.iter()) {
        sum += r_minus_eps(*zh, eps)? - r_plus_eps(*zl, eps)?;
    }
    Ok(sum / data.n() as f64)
}

/// Per-coordinate term `empirical − (8/ε)R(B₀) − 2√(log(2/δ)/(2n))`.
pub fn theorem2_raw(data: &Dataset, lo: &LinearModel, hi: &LinearModel, eps: f64, rad_base: f64, delta: f64) -> Result<f64> {
    let emp = theorem2_empirical_term(data, lo, hi, eps)?;
    Ok(emp - 8.0 / eps * rad_base - 2.0 * concentration(2.0, delta, data.n())?)
}

pub fn theorem2_bound(
    data: &Dataset,
    lo: &LinearModel,
    hi: &LinearModel,
    eps: f64,
    rad_base: f64,
    delta: f64,
    m: usize,
) -> Result<f64> {
    let m = check_m(m)?;
    Ok(theorem2_raw(data, lo, hi, eps, rad_base, delta)?.max(0.0).powi(m).min(1.0))
}

/// `(1 − δ)(1 − δe)ᵐ`.
pub fn theorem3_bound(delta: f64, delta_e: f64, m: usize) -> Result<f64> {
    check_unit("delta", delta)?;
    check_unit("delta_e", delta_e)?;
    let m = check_m(m)?;
    Ok(((1.0 - delta) * (1.0 - delta_e).powi(m)).clamp(0.0, 1.0))
}

/// `(1 − δ)[(1 − δe_p)ᵐ + (1 − δe_q)ᵐ] + (δq − δp)ᵐ − 2`, unclamped.
pub fn theorem5_raw(delta: f64, de_p: f64, de_q: f64, dp: f64, dq: f64, m: usize) -> Result<f64> {
    for (name, v) in [("delta", delta), ("delta_e_p", de_p), ("delta_e_q", de_q), ("delta_p", dp), ("delta_q", dq)] {
        check_unit(name, v)?;
    }
    if dp > dq {
        return Err(Error::InvalidParameter {
            name: "delta_p",
            reason: format!("delta_p = {dp} exceeds delta_q = {dq}"),
        });
    }
    let m = check_m(m)?;
    Ok((1.0 - delta) * ((1.0 - de_p).powi(m) + (1.0 - de_q).powi(m)) + (dq - dp).powi(m) - 2.0)
}

pub fn theorem5_bound(delta: f64, de_p: f64, de_q: f64, dp: f64, dq: f64, m: usize) -> Result<f64> {
    Ok(theorem5_raw(delta, de_p, de_q, dp, dq, m)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn surrogates() {
        assert_eq!(r_minus_eps(-0.5, 1.0).unwrap(), 0.5);
        assert_eq!(r_minus_eps(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(r_minus_eps(-2.0, 1.0).unwrap(), 1.0);
        assert_eq!(r_plus_eps(0.0, 0.3).unwrap(), 1.0);
        assert_eq!(r_plus_eps(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(r_plus_eps(-1.0, 1.0).unwrap(), 1.0);
        assert!(r_plus_eps(0.0, 0.0).is_err());
    }

    #[test]
    fn theorem1_values() {
        assert_eq!(theorem1_bound(1.0, 0.0, 100, 0.05, 2).unwrap(), 0.0);
        assert!(theorem1_bound(0.0, 0.0, 1 << 40, 0.05, 3).unwrap() > 0.999);
        // frozen: ([1 − 0.05 − 0.02 − √(ln 20 / 4000)]₊)³
        let v = theorem1_bound(0.05, 0.01, 2000, 0.05, 3).unwrap();
        assert_relative_eq!(v, 0.735_417_802_711_624_3, epsilon = 1e-12);
    }

    #[test]
    fn theorem3_and_5_values() {
        assert_eq!(theorem3_bound(0.0, 0.0, 4).unwrap(), 1.0);
        assert_relative_eq!(theorem3_bound(0.05, 0.01, 10).unwrap(), 0.95 * 0.99f64.powi(10), epsilon = 1e-15);
        assert_relative_eq!(theorem5_bound(0.0, 0.0, 0.0, 0.0, 1.0, 3).unwrap(), 1.0);
        // frozen: 0.95·2·0.99⁵ + 0.9⁵ − 2
        let raw = theorem5_raw(0.05, 0.01, 0.01, 0.05, 0.95, 5).unwrap();
        assert_relative_eq!(raw, 0.397_371_094_81, epsilon = 1e-12);
        assert!(theorem5_raw(0.05, 0.01, 0.01, 0.05, 0.95, 30).unwrap() < 0.0);
        assert_eq!(theorem5_bound(0.05, 0.01, 0.01, 0.05, 0.95, 30).unwrap(), 0.0);
    }

    #[test]
    fn theorem2_identical_models_vacuous() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let labels: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let data = Dataset::from_rows(&rows, &labels).unwrap();
        let model = LinearModel::new(DVector::from_vec(vec![0.1, 0.0]), 5.0).unwrap();
        assert!(theorem2_empirical_term(&data, &model, &model, 0.1).unwrap() <= 0.0);
        assert_eq!(theorem2_bound(&data, &model, &model, 0.1, 0.0, 0.05, 2).unwrap(), 0.0);
    }

    #[test]
    fn theorem2_saturated_margins() {
        let rows = vec![vec![1.0]; 4];
        let data = Dataset::from_rows(&rows, &[0.0, 0.1, -0.1, 0.05]).unwrap();
        let lo = LinearModel::new(DVector::from_vec(vec![-1.0]), 5.0).unwrap();
        let hi = LinearModel::new(DVector::from_vec(vec![1.0]), 5.0).unwrap();
        let eps = 0.5;
        assert_eq!(theorem2_empirical_term(&data, &lo, &hi, eps).unwrap(), 1.0);
        let (rad, delta, m) = (0.001, 0.05, 2);
        let expect = (1.0 - 8.0 / eps * rad - 2.0 * ((2.0f64 / delta).ln() / 8.0).sqrt()).max(0.0).powi(2);
        assert_relative_eq!(theorem2_bound(&data, &lo, &hi, eps, rad, delta, m).unwrap(), expect, epsilon = 1e-14);
    }
}

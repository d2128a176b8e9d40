use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::extremize::prediction_ranges;
use super::good_set::{GoodModelSet, ResidualSupport};
use crate::error::{Error, Result};
use crate::model::{BoxUncertaintySet, IntervalFunction, LinearModel, QueryBatch};

/// Construction method names as used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    M1,
    M2,
    M3,
    M4,
    Finite,
    Pacbayes,
    Gi,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::M1 => "m1",
            Method::M2 => "m2",
            Method::M3 => "m3",
            Method::M4 => "m4",
            Method::Finite => "finite",
            Method::Pacbayes => "pacbayes",
            Method::Gi => "gi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "m1" => Method::M1,
            "m2" => Method::M2,
            "m3" => Method::M3,
            "m4" => Method::M4,
            "finite" => Method::Finite,
            "pacbayes" => Method::Pacbayes,
            "gi" => Method::Gi,
            other => {
                return Err(Error::InvalidParameter {
                    name: "method",
                    reason: format!("unknown method `{other}` (expected m1, m2, m3, m4, finite, pacbayes or gi)"),
                })
            }
        })
    }
}

/// Quantities that went into a box, for reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetDiagnostics {
    pub thresholds: Vec<f64>,
    pub rademacher: Option<f64>,
    pub miss_rate: Option<f64>,
    pub half_widths: Vec<f64>,
    pub norm_ball_active: bool,
}

fn check_dim(model_dim: usize, queries: &QueryBatch) -> Result<()> {
    if model_dim != queries.d() {
        return Err(Error::DimensionMismatch {
            what: "query features vs model",
            expected: model_dim,
            got: queries.d(),
        });
    }
    Ok(())
}

/// `[c(x̃ʲ) − w, c(x̃ʲ) + w]` per query.
pub fn build_method1(ifun: &IntervalFunction, queries: &QueryBatch) -> Result<BoxUncertaintySet> {
    check_dim(ifun.center().dim(), queries)?;
    let c = ifun.center().predict_all(queries.features())?;
    let w = ifun.half_width();
    BoxUncertaintySet::new(c.iter().map(|v| v - w).collect(), c.iter().map(|v| v + w).collect())
}

/// Per-coordinate min/max of two quantile model predictions.
pub fn build_method2(lo: &LinearModel, hi: &LinearModel, queries: &QueryBatch) -> Result<BoxUncertaintySet> {
    if lo.dim() != hi.dim() {
        return Err(Error::DimensionMismatch {
            what: "quantile model dimensions",
            expected: lo.dim(),
            got: hi.dim(),
        });
    }
    check_dim(lo.dim(), queries)?;
    let a = lo.predict_all(queries.features())?;
    let b = hi.predict_all(queries.features())?;
    BoxUncertaintySet::new(
        a.iter().zip(b.iter()).map(|(x, y)| x.min(*y)).collect(),
        a.iter().zip(b.iter()).map(|(x, y)| x.max(*y)).collect(),
    )
}

/// `[inf_B β(x̃ʲ) − e, sup_B β(x̃ʲ) + e]`.
pub fn build_method3(
    gset: &GoodModelSet<'_>,
    queries: &QueryBatch,
    resid: &ResidualSupport,
) -> Result<(BoxUncertaintySet, SetDiagnostics)> {
    let ranges = prediction_ranges(gset, queries)?;
    let e = resid.half_width();
    let bx = BoxUncertaintySet::new(
        ranges.iter().map(|r| r.inf - e).collect(),
        ranges.iter().map(|r| r.sup + e).collect(),
    )?;
    let diag = SetDiagnostics {
        thresholds: vec![gset.threshold()],
        half_widths: vec![e],
        norm_ball_active: ranges.iter().any(|r| r.norm_ball_active),
        ..Default::default()
    };
    Ok((bx, diag))
}

/// Union of the two quantile good sets, padded by `max(e_p, e_q)`.
pub fn build_method4(
    gset_p: &GoodModelSet<'_>,
    gset_q: &GoodModelSet<'_>,
    queries: &QueryBatch,
    resid_p: &ResidualSupport,
    resid_q: &ResidualSupport,
) -> Result<(BoxUncertaintySet, SetDiagnostics)> {
    if gset_p.data().d() != gset_q.data().d() {
        return Err(Error::DimensionMismatch {
            what: "good-set feature dimensions",
            expected: gset_p.data().d(),
            got: gset_q.data().d(),
        });
    }
    let rp = prediction_ranges(gset_p, queries)?;
    let rq = prediction_ranges(gset_q, queries)?;
    let e = resid_p.half_width().max(resid_q.half_width());
    let bx = BoxUncertaintySet::new(
        rp.iter().zip(&rq).map(|(a, b)| a.inf.min(b.inf) - e).collect(),
        rp.iter().zip(&rq).map(|(a, b)| a.sup.max(b.sup) + e).collect(),
    )?;
    let diag = SetDiagnostics {
        thresholds: vec![gset_p.threshold(), gset_q.threshold()],
        half_widths: vec![resid_p.half_width(), resid_q.half_width()],
        norm_ball_active: rp.iter().chain(&rq).any(|r| r.norm_ball_active),
        ..Default::default()
    };
    Ok((bx, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{empirical_loss, fit_quantile, FitConfig, LossKind};
    use crate::model::Dataset;
    use nalgebra::DVector;

    fn model(c: &[f64]) -> LinearModel {
        LinearModel::new(DVector::from_column_slice(c), 100.0).unwrap()
    }

    #[test]
    fn method1_shifts_by_width() {
        let f = IntervalFunction::new(model(&[3.0]), 1.0).unwrap();
        let q = QueryBatch::from_rows(&[vec![1.0]]).unwrap();
        let b = build_method1(&f, &q).unwrap();
        assert_eq!((b.lower()[0], b.upper()[0]), (2.0, 4.0));
    }

    #[test]
    fn method2_orders_crossing_fits() {
        let q = QueryBatch::from_rows(&[vec![1.0]]).unwrap();
        let b = build_method2(&model(&[1.0]), &model(&[-1.0]), &q).unwrap();
        assert_eq!((b.lower()[0], b.upper()[0]), (-1.0, 1.0));
        let same = build_method2(&model(&[0.5]), &model(&[0.5]), &q).unwrap();
        assert_eq!(same.widths(), vec![0.0]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::M1, Method::M2, Method::M3, Method::M4, Method::Finite, Method::Pacbayes, Method::Gi] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("m5".parse::<Method>().is_err());
    }

    #[test]
    fn method4_reduces_to_method2_and_method3() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, (i as f64 * 0.37).sin()]).collect();
        let labels: Vec<f64> = rows.iter().enumerate().map(|(i, r)| r[1] + 0.3 * (i as f64 * 1.7).cos()).collect();
        let data = Dataset::from_rows(&rows, &labels).unwrap();
        let cfg = FitConfig::default();
        let (tp, tq) = (0.2, 0.8);
        let qp = fit_quantile(&data, tp, 10.0, &cfg).unwrap();
        let qq = fit_quantile(&data, tq, 10.0, &cfg).unwrap();
        let lp = empirical_loss(&qp, &data, LossKind::Pinball { tau: tp }).unwrap();
        let lq = empirical_loss(&qq, &data, LossKind::Pinball { tau: tq }).unwrap();
        let gp = GoodModelSet::new(&data, qp.clone(), LossKind::Pinball { tau: tp }, lp).unwrap();
        let gq = GoodModelSet::new(&data, qq.clone(), LossKind::Pinball { tau: tq }, lq).unwrap();
        let queries = QueryBatch::from_rows(&[vec![1.0, 0.2], vec![1.0, -0.7]]).unwrap();
        let zero = ResidualSupport::new(0.0, 0.0).unwrap();
        let (b4, _) = build_method4(&gp, &gq, &queries, &zero, &zero).unwrap();
        let b2 = build_method2(&qp, &qq, &queries).unwrap();
        assert!(b4.contains_box(&b2, 1e-7));
        let e = ResidualSupport::new(0.4, 0.1).unwrap();
        let (same, _) = build_method4(&gp, &gp, &queries, &e, &e).unwrap();
        let (m3, _) = build_method3(&gp, &queries, &e).unwrap();
        assert_eq!(same, m3);
    }
}

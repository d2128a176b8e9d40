use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use roml_core::complexity::{
    contraction_bound, empirical_rademacher_linear, linear_class_bounds, population_from_empirical, slab_vc_dimension,
    vc_class_bound, EstimateMethod, RademacherEstimate,
};
use roml_core::learners::{empirical_loss, fit_interval_function, fit_least_squares, fit_quantile};
use roml_core::robust::{hit_and_run, sample_uniform_box, solve_box_robust, solve_scenario_robust, RobustSolution};
use roml_core::usets::{
    build_gi_baseline, build_method1, build_method2, build_method3, build_method4, build_pacbayes_set,
    finite_class_slack, finite_erm, finite_good_set, rademacher_slack, GoodModelSet, Method, ResidualSupport,
    SetDiagnostics,
};
use roml_core::validate::{
    finite_class_check, generate, monte_carlo_feasibility, random_ball_models, FiniteClassConfig, GuaranteeReport,
    PipelineConfig, RadPlugIn, SynthKind, SynthSpec,
};
use roml_core::{BoxUncertaintySet, DMatrix, Dataset, FitConfig, LinearModel, LossKind, PortfolioProblem, QueryBatch};

use crate::config::Config;
use crate::io::{read_json, read_matrix, read_table, write_dataset, write_json, Table};

/// A bad method name or similar: reported together with the usage text.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// What a command reports back to `main`.
pub enum Outcome {
    Ok,
    GuaranteeFailed,
}

fn method(cfg: &Config) -> Result<Method> {
    let name = cfg.str_or("method", "");
    if name.is_empty() {
        return Err(UsageError("missing key `method`".into()).into());
    }
    name.parse::<Method>().map_err(|e| UsageError(e.to_string()).into())
}

fn synth_spec(cfg: &Config, seed: u64) -> Result<SynthSpec> {
    let kind = match cfg.str_or("kind", "linear_gaussian") {
        "linear_gaussian" => SynthKind::LinearGaussian,
        "heteroscedastic" => SynthKind::Heteroscedastic,
        "bimodal" => SynthKind::Bimodal {
            offset: cfg.or("offset", 2.0)?,
        },
        other => bail!("key `kind`: unknown data process `{other}` (expected linear_gaussian, heteroscedastic or bimodal)"),
    };
    let mut coefs = match cfg.list("coefficients")? {
        Some(c) => c,
        None => vec![1.0; cfg.or("d", 2usize)?],
    };
    if let Some(d) = cfg.get::<usize>("d")? {
        if d != coefs.len() {
            bail!("key `d` = {d} but `coefficients` has {} entries", coefs.len());
        }
    }
    let intercept = cfg.get::<f64>("intercept")?;
    if let Some(b) = intercept {
        coefs.push(b);
    }
    Ok(SynthSpec::new(kind, coefs, cfg.or("noise_scale", 1.0)?, intercept.is_some(), seed)?)
}

pub fn gen_data(cfg: &Config, seed: u64, out: &Path) -> Result<Outcome> {
    let spec = synth_spec(cfg, seed)?;
    let n: usize = cfg.or("n", 100)?;
    let data = generate(&spec, n)?;
    write_dataset(out, &data, spec.d)?;
    println!("gen-data: wrote {n} rows with {} features to {}", spec.d, out.display());
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoxFile {
    pub method: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub empty: bool,
    #[serde(default)]
    pub diagnostics: serde_json::Value,
}

/// `(1 − δe)` empirical quantile of the absolute training residuals.
fn residual_quantile(data: &Dataset, model: &LinearModel, delta_e: f64) -> Result<f64> {
    let mut abs: Vec<f64> = data.residuals(model)?.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let k = ((1.0 - delta_e) * abs.len() as f64).ceil() as usize;
    Ok(abs[k.clamp(1, abs.len()) - 1])
}

fn support(cfg: &Config, key: &str, data: &Dataset, model: &LinearModel, delta_e: f64) -> Result<ResidualSupport> {
    let e = match cfg.get::<f64>(key)? {
        Some(e) => e,
        None => residual_quantile(data, model, delta_e)?,
    };
    Ok(ResidualSupport::new(e, delta_e)?)
}

/// Shared inputs of the data-driven constructions.
struct SetContext<'a> {
    cfg: &'a Config,
    data: Dataset,
    queries: QueryBatch,
    fit: FitConfig,
    seed: u64,
    norm_bound: f64,
    delta: f64,
    delta_e: f64,
    /// Largest prediction-plus-label magnitude over the class: `max|y| + X_b·B_b`.
    reach: f64,
}

impl SetContext<'_> {
    /// `R(B₀)`, analytic or from Rademacher draws.
    fn base_rademacher(&self) -> Result<f64> {
        let x_b = self.data.max_row_norm();
        let n = self.data.n();
        match self.cfg.str_or("rademacher", "analytic") {
            "analytic" => Ok(linear_class_bounds(x_b, self.norm_bound, n)?.0),
            "monte_carlo" => {
                let draws = self.cfg.or("rademacher_draws", 200usize)?;
                let emp = empirical_rademacher_linear(&self.data, self.norm_bound, draws, self.seed)?;
                Ok(population_from_empirical(
                    emp.value + 3.0 * emp.std_error,
                    2.0 * x_b * self.norm_bound,
                    self.delta,
                    n,
                )?)
            }
            other => bail!("key `rademacher`: `{other}` (expected analytic or monte_carlo)"),
        }
    }

    /// Good set around `reference` for an `L`-Lipschitz loss with range `M`.
    fn good_set(&self, reference: LinearModel, loss: LossKind, lipschitz: f64, range: f64) -> Result<(GoodModelSet<'_>, f64)> {
        let base = RademacherEstimate::analytic(self.base_rademacher()?, EstimateMethod::AnalyticLinear);
        let rad = contraction_bound(lipschitz, base)?.value;
        let slack = match self.cfg.get::<f64>("threshold_slack")? {
            Some(s) => s,
            None => rademacher_slack(self.data.n(), range, self.delta, rad)?,
        };
        let t = empirical_loss(&reference, &self.data, loss)? + slack;
        Ok((GoodModelSet::new(&self.data, reference, loss, t)?, rad))
    }

    /// Random models in the ball plus the least-squares fit, under truncated squared loss.
    fn finite_class(&self, range: f64) -> Result<(Vec<LinearModel>, LossKind)> {
        let size = self.cfg.or("class_size", 50usize)?;
        let mut class = random_ball_models(self.data.d(), size, self.norm_bound, self.seed)?;
        class.push(fit_least_squares(&self.data, self.norm_bound, &self.fit)?);
        Ok((class, LossKind::TruncatedSquared { cap: range }))
    }

    /// Box spanned by the predictions of `members`, padded by `e`.
    fn member_box(&self, members: &[&LinearModel], e: f64) -> Result<BoxUncertaintySet> {
        let m = self.queries.m();
        let mut lower = vec![f64::INFINITY; m];
        let mut upper = vec![f64::NEG_INFINITY; m];
        for model in members {
            let p = model.predict_all(self.queries.features())?;
            for j in 0..m {
                lower[j] = lower[j].min(p[j] - e);
                upper[j] = upper[j].max(p[j] + e);
            }
        }
        Ok(BoxUncertaintySet::new(lower, upper)?)
    }
}

fn load_inputs(train: &Path, queries: &Path, intercept: bool) -> Result<(Dataset, QueryBatch)> {
    let t = read_table(train)?;
    let Some(labels) = t.labels.as_deref() else {
        bail!("{}: training data needs a `y` column", train.display());
    };
    let q: Table = read_table(queries)?;
    if q.d() != t.d() {
        bail!(
            "dimension mismatch: {} has {} features but {} has {}",
            train.display(),
            t.d(),
            queries.display(),
            q.d()
        );
    }
    let data = Dataset::from_rows(&t.design(intercept), labels)?;
    let queries = QueryBatch::from_rows(&q.design(intercept))?;
    Ok((data, queries))
}

pub fn build_set(cfg: &Config, seed: u64, train: &Path, queries: &Path, out: &Path) -> Result<Outcome> {
    let method = method(cfg)?;
    let (data, queries) = load_inputs(train, queries, cfg.or("fit_intercept", false)?)?;
    let norm_bound: f64 = cfg.or("norm_bound", 10.0)?;
    let max_y = data.labels().iter().fold(0.0f64, |a, y| a.max(y.abs()));
    let ctx = SetContext {
        cfg,
        reach: max_y + data.max_row_norm() * norm_bound,
        data,
        queries,
        fit: FitConfig {
            seed,
            ..FitConfig::default()
        },
        seed,
        norm_bound,
        delta: cfg.prob("delta", 0.05)?,
        delta_e: cfg.prob("delta_e", 0.01)?,
    };
    let (data, queries) = (&ctx.data, &ctx.queries);
    let mut empty = false;
    let (bx, diagnostics): (Option<BoxUncertaintySet>, serde_json::Value) = match method {
        Method::M1 => {
            let ifit = fit_interval_function(data, cfg.or("target_miss", 0.05)?, norm_bound, &ctx.fit)?;
            let diag = SetDiagnostics {
                rademacher: Some(vc_class_bound(slab_vc_dimension(data.d()), data.n())?),
                miss_rate: Some(ifit.miss_rate),
                half_widths: vec![ifit.function.half_width()],
                ..Default::default()
            };
            (Some(build_method1(&ifit.function, queries)?), serde_json::to_value(diag)?)
        }
        Method::M2 => {
            let (dp, dq) = (cfg.prob("delta_p", 0.05)?, cfg.prob("delta_q", 0.95)?);
            if dp >= dq {
                bail!("need delta_p < delta_q, got {dp} and {dq}");
            }
            let lo = fit_quantile(data, dp, norm_bound, &ctx.fit)?;
            let hi = fit_quantile(data, dq, norm_bound, &ctx.fit)?;
            let diag = SetDiagnostics {
                rademacher: Some(ctx.base_rademacher()?),
                ..Default::default()
            };
            (Some(build_method2(&lo, &hi, queries)?), serde_json::to_value(diag)?)
        }
        Method::M3 => {
            let beta = fit_least_squares(data, norm_bound, &ctx.fit)?;
            let resid = support(cfg, "e", data, &beta, ctx.delta_e)?;
            let range = cfg.or("loss_range", ctx.reach * ctx.reach)?;
            let (gset, rad) = ctx.good_set(beta, LossKind::Squared, 2.0 * ctx.reach, range)?;
            let (bx, mut diag) = build_method3(&gset, queries, &resid)?;
            diag.rademacher = Some(rad);
            (Some(bx), serde_json::to_value(diag)?)
        }
        Method::M4 => {
            let (dp, dq) = (cfg.prob("delta_p", 0.05)?, cfg.prob("delta_q", 0.95)?);
            if dp >= dq {
                bail!("need delta_p < delta_q, got {dp} and {dq}");
            }
            let mut parts = Vec::with_capacity(2);
            for (tau, key) in [(dp, "e_p"), (dq, "e_q")] {
                let model = fit_quantile(data, tau, norm_bound, &ctx.fit)?;
                let resid = support(cfg, key, data, &model, ctx.delta_e)?;
                let lip = tau.max(1.0 - tau);
                let range = cfg.or("loss_range", lip * ctx.reach)?;
                let (gset, rad) = ctx.good_set(model, LossKind::Pinball { tau }, lip, range)?;
                parts.push((gset, resid, rad));
            }
            let (bx, mut diag) = build_method4(&parts[0].0, &parts[1].0, queries, &parts[0].1, &parts[1].1)?;
            diag.rademacher = Some(parts[0].2.max(parts[1].2));
            (Some(bx), serde_json::to_value(diag)?)
        }
        Method::Finite => {
            let range = cfg.or("loss_range", ctx.reach * ctx.reach)?;
            let (class, loss) = ctx.finite_class(range)?;
            let (best, best_loss) = finite_erm(data, &class, loss)?;
            let slack = match cfg.get::<f64>("threshold_slack")? {
                Some(s) => s,
                None => finite_class_slack(data.n(), range, ctx.delta, class.len())?,
            };
            let members = finite_good_set(data, &class, loss, best_loss + slack)?;
            let resid = support(cfg, "e", data, &class[best], ctx.delta_e)?;
            let chosen: Vec<&LinearModel> = members.iter().map(|&i| &class[i]).collect();
            let diag = serde_json::json!({
                "thresholds": [best_loss + slack],
                "class_size": class.len(),
                "members": members,
                "half_widths": [resid.half_width()],
            });
            (Some(ctx.member_box(&chosen, resid.half_width())?), diag)
        }
        Method::Pacbayes => {
            let range = cfg.or("loss_range", ctx.reach * ctx.reach)?;
            let (class, loss) = ctx.finite_class(range)?;
            let prior = vec![1.0 / class.len() as f64; class.len()];
            let c: f64 = cfg.or("pac_c", 1.0)?;
            let alpha: f64 = cfg.or("pac_alpha", 1.0)?;
            let members = build_pacbayes_set(data, &class, &prior, loss, c, alpha)?;
            let (best, _) = finite_erm(data, &class, loss)?;
            let resid = support(cfg, "e", data, &class[best], ctx.delta_e)?;
            let diag = serde_json::json!({
                "class_size": class.len(),
                "members": members,
                "half_widths": [resid.half_width()],
            });
            if members.is_empty() {
                empty = true;
                (None, diag)
            } else {
                let chosen: Vec<&LinearModel> = members.iter().map(|&i| &class[i]).collect();
                (Some(ctx.member_box(&chosen, resid.half_width())?), diag)
            }
        }
        Method::Gi => {
            let sigma = cfg.get::<f64>("sigma")?;
            let (bx, diag) = build_gi_baseline(data, sigma, ctx.delta_e, cfg.prob("confidence", 0.95)?, queries)?;
            (Some(bx), serde_json::to_value(diag)?)
        }
    };
    let file = BoxFile {
        method: method.to_string(),
        lower: bx.as_ref().map_or_else(Vec::new, |b| b.lower().to_vec()),
        upper: bx.as_ref().map_or_else(Vec::new, |b| b.upper().to_vec()),
        empty,
        diagnostics,
    };
    write_json(out, &file)?;
    match &bx {
        Some(b) => println!(
            "build-set: method {method}, {} queries, mean width {:.6}, wrote {}",
            b.dim(),
            b.widths().iter().sum::<f64>() / b.dim() as f64,
            out.display()
        ),
        None => println!("build-set: method {method} produced an empty set, wrote {}", out.display()),
    }
    Ok(Outcome::Ok)
}

pub fn solve(cfg: &Config, seed: u64, box_path: &Path, cov: Option<&Path>, out: &Path) -> Result<Outcome> {
    let file: BoxFile = read_json(box_path)?;
    if file.empty {
        bail!("{}: the uncertainty set is empty, nothing to solve", box_path.display());
    }
    let bx = BoxUncertaintySet::new(file.lower, file.upper).with_context(|| format!("{}", box_path.display()))?;
    let m = bx.dim();
    let covariance = match cov {
        Some(p) => read_matrix(p)?,
        None => DMatrix::identity(m, m),
    };
    let problem = PortfolioProblem::new(covariance, cfg.or("min_return", 0.0)?, cfg.or("long_only", true)?)?;
    let scenarios: usize = cfg.or("scenarios", 0)?;
    let sol: RobustSolution = if scenarios == 0 {
        solve_box_robust(&problem, &bx)?
    } else {
        let draws = match cfg.str_or("sampler", "uniform") {
            "uniform" => sample_uniform_box(&bx, scenarios, seed)?,
            "hit_and_run" => hit_and_run(
                |p: &[f64]| bx.contains(p),
                &bx.center(),
                scenarios,
                cfg.or("burn_in", 100)?,
                cfg.or("thin", 5)?,
                seed,
            )?,
            other => bail!("key `sampler`: `{other}` (expected uniform or hit_and_run)"),
        };
        solve_scenario_robust(&problem, &draws)?
    };
    write_json(out, &sol)?;
    let status = serde_json::to_value(sol.status)?;
    println!(
        "solve: status {}, objective {:.6e}, kkt residual {:.2e}, wrote {}",
        status.as_str().unwrap_or("?"),
        sol.objective,
        sol.kkt_residual,
        out.display()
    );
    Ok(Outcome::Ok)
}

fn pipeline_config(cfg: &Config, method: Method, seed: u64) -> Result<PipelineConfig> {
    let mut p = PipelineConfig::new(method, synth_spec(cfg, seed)?);
    p.seed = seed;
    p.n = cfg.or("n", p.n)?;
    p.m = cfg.or("m", p.m)?;
    p.delta = cfg.prob("delta", p.delta)?;
    p.delta_e = cfg.prob("delta_e", p.delta_e)?;
    p.delta_p = cfg.prob("delta_p", p.delta_p)?;
    p.delta_q = cfg.prob("delta_q", p.delta_q)?;
    p.eps = cfg.or("eps", p.eps)?;
    p.target_miss = cfg.or("target_miss", p.target_miss)?;
    p.norm_bound = cfg.or("norm_bound", p.norm_bound)?;
    p.loss_range = cfg.get("loss_range")?;
    p.min_return = cfg.or("min_return", p.min_return)?;
    p.long_only = cfg.or("long_only", p.long_only)?;
    p.outer = cfg.or("outer", p.outer)?;
    p.inner = cfg.or("inner", p.inner)?;
    p.oracle_n = cfg.or("oracle_n", p.oracle_n)?;
    p.fit.seed = seed;
    p.rademacher = match cfg.str_or("rademacher", "analytic") {
        "analytic" => RadPlugIn::Analytic,
        "monte_carlo" => RadPlugIn::MonteCarlo {
            draws: cfg.or("rademacher_draws", 200)?,
        },
        other => bail!("key `rademacher`: `{other}` (expected analytic or monte_carlo)"),
    };
    p.validate()?;
    Ok(p)
}

const CSV_HEADER: &str = "sweep_var,value,bound,raw_bound,empirical,ci_lo,ci_hi,vacuous,pass\n";

pub fn validate(cfg: &Config, seed: u64, out: &Path, csv_out: &Path) -> Result<Outcome> {
    let method = method(cfg)?;
    let sweep = cfg.str_or("sweep", "none").to_string();
    let values: Vec<Option<usize>> = match (sweep.as_str(), cfg.list("sweep_values")?) {
        ("none", _) => vec![None],
        ("n" | "m", Some(v)) => v
            .iter()
            .map(|x| {
                if *x < 1.0 || x.fract() != 0.0 {
                    bail!("key `sweep_values`: {x} is not a positive integer");
                }
                Ok(Some(*x as usize))
            })
            .collect::<Result<_>>()?,
        ("n" | "m", None) => bail!("sweep over `{sweep}` needs `sweep_values`"),
        (other, _) => bail!("key `sweep`: `{other}` (expected n, m or none)"),
    };

    let mut csv = String::from(CSV_HEADER);
    let mut any_failed = false;
    if method == Method::Finite {
        let mut reports = Vec::new();
        for v in &values {
            let mut fc = FiniteClassConfig {
                synth: synth_spec(cfg, seed)?,
                n: cfg.or("n", 1000)?,
                random_models: cfg.or("class_size", 50)?,
                delta: cfg.prob("delta", 0.1)?,
                norm_bound: cfg.or("norm_bound", 5.0)?,
                loss_cap: cfg.or("loss_range", 9.0)?,
                trials: cfg.or("outer", 500)?,
                oracle_n: cfg.or("oracle_n", 200_000)?,
                seed,
            };
            if let Some(v) = v {
                match sweep.as_str() {
                    "n" => fc.n = *v,
                    _ => bail!("the finite-class check has no `m`; sweep over n instead"),
                }
            }
            let r = finite_class_check(&fc)?;
            any_failed |= !r.pass;
            csv.push_str(&format!(
                "{sweep},{},{},{},{},,,false,{}\n",
                v.map_or(String::new(), |v| v.to_string()),
                r.required,
                r.required,
                r.fraction,
                r.pass
            ));
            println!(
                "validate: finite class of {}, best model kept in {:.4} of {} trials (need {:.4}): {}",
                r.class_size,
                r.fraction,
                r.trials,
                r.required,
                if r.pass { "pass" } else { "FAIL" }
            );
            reports.push(r);
        }
        write_json(out, &reports)?;
    } else {
        let mut reports: Vec<GuaranteeReport> = Vec::new();
        for v in &values {
            let mut p = pipeline_config(cfg, method, seed)?;
            match (sweep.as_str(), v) {
                ("n", Some(v)) => p.n = *v,
                ("m", Some(v)) => p.m = *v,
                _ => {}
            }
            p.validate()?;
            let r = monte_carlo_feasibility(&p)?;
            let failed = !r.vacuous && !r.pass;
            any_failed |= failed;
            csv.push_str(&format!(
                "{sweep},{},{},{},{},{},{},{},{}\n",
                v.map_or(String::new(), |v| v.to_string()),
                r.bound,
                r.raw_bound,
                r.empirical,
                r.ci.0,
                r.ci.1,
                r.vacuous,
                r.pass
            ));
            println!(
                "validate: {method} n={} m={} bound {:.4} empirical {:.4} [{:.4}, {:.4}]{}: {}",
                p.n,
                p.m,
                r.bound,
                r.empirical,
                r.ci.0,
                r.ci.1,
                if r.vacuous { " vacuous" } else { "" },
                if failed { "FAIL" } else { "pass" }
            );
            reports.push(r);
        }
        write_json(out, &reports)?;
    }
    std::fs::write(csv_out, csv).with_context(|| format!("writing {}", csv_out.display()))?;
    Ok(if any_failed { Outcome::GuaranteeFailed } else { Outcome::Ok })
}

//! Monte Carlo estimation of joint feasibility against the theorem bounds.
//!
//! Each outer trial draws a training sample `S` and `m` query points, builds
//! `U`, and solves for `π*`. Inner trials then draw fresh labels at the same
//! query points and check the portfolio constraints. The reported bound is
//! the mean over outer trials of the bound computed from that trial's `S`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{theorem1_bound, theorem1_raw, theorem2_bound, theorem2_raw, theorem3_bound, theorem5_bound, theorem5_raw};
use super::synth::{oracle_best_in_class, random_ball_models, residual_support_estimate, SynthSpec};
use super::wilson_ci;
use crate::complexity::{
    contraction_bound, empirical_rademacher_linear, linear_class_bounds, population_from_empirical, slab_vc_dimension,
    vc_class_bound, RademacherEstimate,
};
use crate::error::{check_positive, check_prob_open, Error, Result};
use crate::learners::{empirical_loss, fit_interval_function, fit_least_squares, fit_quantile, FitConfig, LossKind};
use crate::model::{BoxUncertaintySet, Dataset, LinearModel, QueryBatch};
use crate::problem::{portfolio_feasible, PortfolioProblem};
use crate::robust::solve_box_robust;
use crate::usets::{
    build_method1, build_method2, build_method3, build_method4, finite_class_slack, finite_erm, rademacher_slack,
    GoodModelSet, Method, ResidualSupport,
};

/// Tolerance of the inner feasibility checks.
pub const INNER_TOL: f64 = 1e-8;

/// Values of ε reported alongside a method-2 run.
pub const EPS_SWEEP: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T5,
}

impl TheoremId {
    pub fn for_method(method: Method) -> Result<Self> {
        match method {
            Method::M1 => Ok(TheoremId::T1),
            Method::M2 => Ok(TheoremId::T2),
            Method::M3 => Ok(TheoremId::T3),
            Method::M4 => Ok(TheoremId::T5),
            other => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("no feasibility guarantee is validated for `{other}`"),
            }),
        }
    }
}

/// How the Rademacher averages in the bounds are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadPlugIn {
    /// Closed-form class bounds (`X_b B_b/√n`, VC bound for interval misses).
    Analytic,
    /// Monte Carlo `R_S(B₀)` lifted to the population level.
    MonteCarlo { draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub synth: SynthSpec,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub delta_e: f64,
    pub delta_p: f64,
    pub delta_q: f64,
    pub eps: f64,
    /// Training miss rate targeted by the method-1 interval fit.
    pub target_miss: f64,
    pub norm_bound: f64,
    /// Loss range `M`; defaults to the range implied by `|y| ≤ X_b B_b`.
    pub loss_range: Option<f64>,
    pub min_return: f64,
    pub long_only: bool,
    pub outer: usize,
    pub inner: usize,
    pub seed: u64,
    /// Sample size for best-in-class oracles and residual supports.
    pub oracle_n: usize,
    pub rademacher: RadPlugIn,
    pub fit: FitConfig,
}

impl PipelineConfig {
    /// Linear-Gaussian data with 3 features plus intercept and the usual defaults.
    pub fn new(method: Method, synth: SynthSpec) -> Self {
        Self {
            method,
            synth,
            n: 2000,
            m: 3,
            delta: 0.05,
            delta_e: 0.01,
            delta_p: 0.05,
            delta_q: 0.95,
            eps: 0.1,
            target_miss: 0.05,
            norm_bound: 10.0,
            loss_range: None,
            min_return: 0.0,
            long_only: true,
            outer: 200,
            inner: 500,
            seed: 0,
            oracle_n: 200_000,
            rademacher: RadPlugIn::Analytic,
            fit: FitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        TheoremId::for_method(self.method)?;
        for (name, p) in [
            ("delta", self.delta),
            ("delta_e", self.delta_e),
            ("delta_p", self.delta_p),
            ("delta_q", self.delta_q),
        ] {
            check_prob_open(name, p)?;
        }
        if self.delta_p >= self.delta_q {
            return Err(Error::InvalidParameter {
                name: "delta_p",
                reason: format!("delta_p = {} must be below delta_q = {}", self.delta_p, self.delta_q),
            });
        }
        if !(0.0..1.0).contains(&self.target_miss) {
            return Err(Error::InvalidParameter {
                name: "target_miss",
                reason: format!("{} is not in [0, 1)", self.target_miss),
            });
        }
        check_positive("eps", self.eps)?;
        check_positive("norm_bound", self.norm_bound)?;
        if let Some(m) = self.loss_range {
            check_positive("loss_range", m)?;
        }
        for (name, v) in [("n", self.n), ("m", self.m), ("outer", self.outer), ("inner", self.inner), ("oracle_n", self.oracle_n)] {
            if v == 0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        if let RadPlugIn::MonteCarlo { draws: 0 } = self.rademacher {
            return Err(Error::InvalidParameter {
                name: "rademacher draws",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.synth.feature_norm_bound() * self.norm_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsPoint {
    pub eps: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub theorem_id: TheoremId,
    pub method: Method,
    /// Mean over outer trials of the clamped bound.
    pub bound: f64,
    /// Mean over outer trials of the unclamped expression.
    pub raw_bound: f64,
    pub empirical: f64,
    pub ci: (f64, f64),
    pub outer_trials: usize,
    pub inner_trials: usize,
    pub vacuous: bool,
    pub pass: bool,
    /// Outer trials whose robust problem had no optimal solution.
    pub infeasible_solves: usize,
    /// Fraction of inner draws with every label inside `U`.
    pub coverage: f64,
    pub plug_ins: BTreeMap<String, f64>,
    pub eps_sweep: Option<Vec<EpsPoint>>,
    pub config: PipelineConfig,
}

/// Quantities fixed across outer trials.
struct Shared {
    resid: Option<ResidualSupport>,
    resid_pq: Option<(ResidualSupport, ResidualSupport)>,
}

struct OuterResult {
    bound: f64,
    raw: f64,
    successes: usize,
    covered: usize,
    optimal: bool,
    plug_ins: Vec<(&'static str, f64)>,
    eps_bounds: Vec<f64>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs the pipeline `outer × inner` times; outer trials run on the current rayon pool.
pub fn monte_carlo_feasibility(cfg: &PipelineConfig) -> Result<GuaranteeReport> {
    cfg.validate()?;
    let theorem_id = TheoremId::for_method(cfg.method)?;
    let shared = prepare_shared(cfg)?;
    let results: Vec<OuterResult> = (0..cfg.outer)
        .into_par_iter()
        .map(|t| run_outer(cfg, &shared, t))
        .collect::<Result<_>>()?;

    let total = cfg.outer * cfg.inner;
    let successes: usize = results.iter().map(|r| r.successes).sum();
    let covered: usize = results.iter().map(|r| r.covered).sum();
    let k = cfg.outer as f64;
    let bound = results.iter().map(|r| r.bound).sum::<f64>() / k;
    let raw_bound = results.iter().map(|r| r.raw).sum::<f64>() / k;
    let ci = wilson_ci(successes, total)?;
    let vacuous = bound <= 0.0;
    let mut plug_ins = BTreeMap::new();
    for r in &results {
        for (name, v) in &r.plug_ins {
            *plug_ins.entry(name.to_string()).or_insert(0.0) += v / k;
        }
    }
    let eps_sweep = (cfg.method == Method::M2).then(|| {
        EPS_SWEEP
            .iter()
            .enumerate()
            .map(|(i, &eps)| EpsPoint {
                eps,
                bound: results.iter().map(|r| r.eps_bounds[i]).sum::<f64>() / k,
            })
            .collect()
    });
    Ok(GuaranteeReport {
        theorem_id,
        method: cfg.method,
        bound,
        raw_bound,
        empirical: successes as f64 / total as f64,
        ci,
        outer_trials: cfg.outer,
        inner_trials: cfg.inner,
        vacuous,
        pass: vacuous || bound <= ci.1,
        infeasible_solves: results.iter().filter(|r| !r.optimal).count(),
        coverage: covered as f64 / total as f64,
        plug_ins,
        eps_sweep,
        config: cfg.clone(),
    })
}

fn prepare_shared(cfg: &PipelineConfig) -> Result<Shared> {
    let mut shared = Shared {
        resid: None,
        resid_pq: None,
    };
    match cfg.method {
        Method::M3 => {
            let oracle = oracle_best_in_class(&cfg.synth, LossKind::Squared, cfg.norm_bound, cfg.oracle_n)?;
            shared.resid = Some(residual_support_estimate(&cfg.synth, &oracle, cfg.delta_e, cfg.oracle_n)?);
        }
        Method::M4 => {
            let op = oracle_best_in_class(&cfg.synth, LossKind::Pinball { tau: cfg.delta_p }, cfg.norm_bound, cfg.oracle_n)?;
            let oq = oracle_best_in_class(&cfg.synth, LossKind::Pinball { tau: cfg.delta_q }, cfg.norm_bound, cfg.oracle_n)?;
            shared.resid_pq = Some((
                residual_support_estimate(&cfg.synth, &op, cfg.delta_e, cfg.oracle_n)?,
                residual_support_estimate(&cfg.synth, &oq, cfg.delta_e, cfg.oracle_n)?,
            ));
        }
        _ => {}
    }
    Ok(shared)
}

/// `R(B₀)` plug-in for a training sample.
fn base_rademacher(cfg: &PipelineConfig, data: &Dataset, seed: u64) -> Result<f64> {
    match cfg.rademacher {
        RadPlugIn::Analytic => Ok(linear_class_bounds(cfg.synth.feature_norm_bound(), cfg.norm_bound, data.n())?.0),
        RadPlugIn::MonteCarlo { draws } => {
            let emp = empirical_rademacher_linear(data, cfg.norm_bound, draws, seed)?;
            population_from_empirical(emp.value + 3.0 * emp.std_error, 2.0 * cfg.scale(), cfg.delta, data.n())
        }
    }
}

/// Good-set threshold with `R(l∘B₀) ≤ 2L·R(B₀)` for an `L`-Lipschitz loss.
fn lipschitz_threshold(
    cfg: &PipelineConfig,
    data: &Dataset,
    reference: &LinearModel,
    loss: LossKind,
    lipschitz: f64,
    loss_range: f64,
    base: f64,
) -> Result<(f64, f64)> {
    let rad = contraction_bound(lipschitz, RademacherEstimate::analytic(base, crate::complexity::EstimateMethod::AnalyticLinear))?.value;
    let t = empirical_loss(reference, data, loss)? + rademacher_slack(data.n(), loss_range, cfg.delta, rad)?;
    Ok((t, rad))
}

fn run_outer(cfg: &PipelineConfig, shared: &Shared, trial: usize) -> Result<OuterResult> {
    let mut rng = trial_rng(cfg.seed, trial);
    let data = cfg.synth.sample(cfg.n, &mut rng)?;
    let x_query = cfg.synth.sample_features(cfg.m, &mut rng);
    let queries = QueryBatch::new(x_query.clone())?;
    let fit = FitConfig {
        seed: cfg.fit.seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ..cfg.fit.clone()
    };
    let n = cfg.n;
    let mut plug_ins = Vec::new();
    let mut eps_bounds = Vec::new();
    let (bx, bound, raw): (BoxUncertaintySet, f64, f64) = match cfg.method {
        Method::M1 => {
            let ifit = fit_interval_function(&data, cfg.target_miss, cfg.norm_bound, &fit)?;
            let rad = vc_class_bound(slab_vc_dimension(cfg.synth.feature_dim()), n)?;
            plug_ins.push(("miss_rate", ifit.miss_rate));
            plug_ins.push(("rademacher_miss_class", rad));
            plug_ins.push(("half_width", ifit.function.half_width()));
            (
                build_method1(&ifit.function, &queries)?,
                theorem1_bound(ifit.miss_rate, rad, n, cfg.delta, cfg.m)?,
                theorem1_raw(ifit.miss_rate, rad, n, cfg.delta)?,
            )
        }
        Method::M2 => {
            let lo = fit_quantile(&data, cfg.delta_p, cfg.norm_bound, &fit)?;
            let hi = fit_quantile(&data, cfg.delta_q, cfg.norm_bound, &fit)?;
            let rad = base_rademacher(cfg, &data, fit.seed)?;
            plug_ins.push(("rademacher_base", rad));
            plug_ins.push(("empirical_surrogate", super::bounds::theorem2_empirical_term(&data, &lo, &hi, cfg.eps)?));
            for eps in EPS_SWEEP {
                eps_bounds.push(theorem2_bound(&data, &lo, &hi, eps, rad, cfg.delta, cfg.m)?);
            }
            (
                build_method2(&lo, &hi, &queries)?,
                theorem2_bound(&data, &lo, &hi, cfg.eps, rad, cfg.delta, cfg.m)?,
                theorem2_raw(&data, &lo, &hi, cfg.eps, rad, cfg.delta)?,
            )
        }
        Method::M3 => {
            let resid = shared.resid.expect("prepared for m3");
            let beta = fit_least_squares(&data, cfg.norm_bound, &fit)?;
            // Squared loss is 4·X_b·B_b-Lipschitz on predictions and labels bounded by X_b·B_b.
            let s = cfg.scale();
            let range = cfg.loss_range.unwrap_or(4.0 * s * s);
            let base = base_rademacher(cfg, &data, fit.seed)?;
            let (t, rad) = lipschitz_threshold(cfg, &data, &beta, LossKind::Squared, 4.0 * s, range, base)?;
            let gset = GoodModelSet::new(&data, beta, LossKind::Squared, t)?;
            let (bx, _) = build_method3(&gset, &queries, &resid)?;
            plug_ins.push(("threshold", t));
            plug_ins.push(("rademacher_loss_class", rad));
            plug_ins.push(("half_width", resid.half_width()));
            let b = theorem3_bound(cfg.delta, cfg.delta_e, cfg.m)?;
            (bx, b, b)
        }
        Method::M4 => {
            let (rp, rq) = shared.resid_pq.expect("prepared for m4");
            let base = base_rademacher(cfg, &data, fit.seed)?;
            let s = cfg.scale();
            let mut sets = Vec::with_capacity(2);
            for tau in [cfg.delta_p, cfg.delta_q] {
                let model = fit_quantile(&data, tau, cfg.norm_bound, &fit)?;
                let lip = tau.max(1.0 - tau);
                let range = cfg.loss_range.unwrap_or(2.0 * s * lip);
                let loss = LossKind::Pinball { tau };
                let (t, _) = lipschitz_threshold(cfg, &data, &model, loss, lip, range, base)?;
                sets.push((model, loss, t));
            }
            let gp = GoodModelSet::new(&data, sets[0].0.clone(), sets[0].1, sets[0].2)?;
            let gq = GoodModelSet::new(&data, sets[1].0.clone(), sets[1].1, sets[1].2)?;
            let (bx, _) = build_method4(&gp, &gq, &queries, &rp, &rq)?;
            plug_ins.push(("threshold_p", sets[0].2));
            plug_ins.push(("threshold_q", sets[1].2));
            plug_ins.push(("half_width_p", rp.half_width()));
            plug_ins.push(("half_width_q", rq.half_width()));
            (
                bx,
                theorem5_bound(cfg.delta, cfg.delta_e, cfg.delta_e, cfg.delta_p, cfg.delta_q, cfg.m)?,
                theorem5_raw(cfg.delta, cfg.delta_e, cfg.delta_e, cfg.delta_p, cfg.delta_q, cfg.m)?,
            )
        }
        other => return Err(Error::Unsupported(method_name(other))),
    };
    plug_ins.push(("mean_box_width", bx.widths().iter().sum::<f64>() / cfg.m as f64));

    let problem = PortfolioProblem::identity(cfg.m, cfg.min_return, cfg.long_only)?;
    let sol = solve_box_robust(&problem, &bx)?;
    let mut successes = 0;
    let mut covered = 0;
    for _ in 0..cfg.inner {
        let y = cfg.synth.sample_labels(&x_query, &mut rng);
        if bx.contains(y.as_slice()) {
            covered += 1;
        }
        if sol.is_optimal() && portfolio_feasible(&problem, &sol.weights, y.as_slice(), INNER_TOL)? {
            successes += 1;
        }
    }
    Ok(OuterResult {
        bound,
        raw,
        successes,
        covered,
        optimal: sol.is_optimal(),
        plug_ins,
        eps_bounds,
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Finite => "Monte Carlo run for the finite-class method (use finite_class_check)",
        Method::Pacbayes => "Monte Carlo run for the PAC-Bayes method",
        Method::Gi => "Monte Carlo run for the Gaussian baseline",
        _ => "Monte Carlo run",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClassConfig {
    pub synth: SynthSpec,
    pub n: usize,
    /// Random models drawn in the `ℓ2` ball, before the oracle model is added.
    pub random_models: usize,
    pub delta: f64,
    pub norm_bound: f64,
    /// Cap `M` of the truncated squared loss.
    pub loss_cap: f64,
    pub trials: usize,
    pub oracle_n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClassReport {
    pub class_size: usize,
    /// Index of the best-in-class model by population loss.
    pub best_index: usize,
    /// Fraction of trials whose threshold admits the best-in-class model.
    pub fraction: f64,
    pub required: f64,
    pub trials: usize,
    pub pass: bool,
    pub mean_threshold_slack: f64,
}

/// Checks `P(l_S(β*) ≤ l_S(β^Alg) + slack) ≥ 1 − δ` for a finite class.
pub fn finite_class_check(cfg: &FiniteClassConfig) -> Result<FiniteClassReport> {
    cfg.synth.validate()?;
    check_prob_open("delta", cfg.delta)?;
    check_positive("loss_cap", cfg.loss_cap)?;
    if cfg.trials == 0 || cfg.n == 0 {
        return Err(Error::InvalidParameter {
            name: "trials/n",
            reason: "must be at least 1".into(),
        });
    }
    let loss = LossKind::TruncatedSquared { cap: cfg.loss_cap };
    let p = cfg.synth.feature_dim();
    let mut class = random_ball_models(p, cfg.random_models, cfg.norm_bound, cfg.seed)?;
    class.push(oracle_best_in_class(&cfg.synth, LossKind::Squared, cfg.norm_bound, cfg.oracle_n)?);

    let big = cfg.synth.sample(cfg.oracle_n, &mut trial_rng(cfg.seed, usize::MAX - 1))?;
    let pop = class.iter().map(|b| empirical_loss(b, &big, loss)).collect::<Result<Vec<_>>>()?;
    let best_index = (0..class.len()).min_by(|&a, &b| pop[a].total_cmp(&pop[b])).unwrap_or(0);
    let slack = finite_class_slack(cfg.n, cfg.loss_cap, cfg.delta, class.len())?;

    let hits: Vec<bool> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let data = cfg.synth.sample(cfg.n, &mut trial_rng(cfg.seed, t))?;
            let (_, erm_loss) = finite_erm(&data, &class, loss)?;
            Ok(empirical_loss(&class[best_index], &data, loss)? <= erm_loss + slack)
        })
        .collect::<Result<_>>()?;
    let fraction = hits.iter().filter(|&&h| h).count() as f64 / cfg.trials as f64;
    let required = 1.0 - cfg.delta - 3.0 * (cfg.delta * (1.0 - cfg.delta) / cfg.trials as f64).sqrt();
    Ok(FiniteClassReport {
        class_size: class.len(),
        best_index,
        fraction,
        required,
        trials: cfg.trials,
        pass: fraction >= required,
        mean_threshold_slack: slack,
    })
}

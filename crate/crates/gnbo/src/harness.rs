//! The BO loop, multi-seed suite driver, and per-problem defaults.
//!
//! One iteration: fit the objective surrogate, fit gradient surrogates when
//! the acquisition needs them, maximize the acquisition over the search box,
//! evaluate the objective and its gradient at the winner, append. The final
//! recommendation is the best observed value.
//!
//! Every random component draws from its own substream of the run seed (init
//! design, objective fit, gradient fits, acquisition optimization, Thompson
//! draws), so toggling one never perturbs another; with `alpha = 0` and no
//! rescaling, an `ei_gn` run reproduces an `ei` run query-for-query.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::acqopt::{optimize_acquisition, OptSpec};
use crate::acquisition::{
    ei, ei_gn, ei_s_bar, log_ei, select_incumbent, thompson_sample_values, AcquisitionConfig,
    IncumbentRule, PoolStats, RescaleMode,
};
use crate::data::Dataset;
use crate::error::{GnboError, Result};
use crate::gp::{fit, FitConfig, GPModel};
use crate::gradient::{posterior_gradient, GradientSurrogate};
use crate::kernel::KernelSpec;
use crate::objectives::{by_name, parse_gp_sample_name, surrogate_config_for, Problem};
use crate::rng::{substream_seed, substream_seed32, Component};
use crate::sobol;

/// Iterations between full multi-start hyperparameter refreshes; in between,
/// fits warm-start from the previous optimum plus one fresh draw.
const FRESH_FIT_EVERY: usize = 25;
const WARM_RESTARTS: usize = 2;
/// LogEI needs sigma > 0; posterior variances at observed points clamp to 0.
const LOGEI_SIGMA_FLOOR: f64 = 1e-12;

/// Thompson sampling candidate-set size; the joint posterior draw costs a
/// cubic factorization in this count.
pub fn ts_candidate_count(dim: usize) -> usize {
    (256 * dim).min(1024)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    EiGn,
    Ei,
    LogEi,
    Ts,
    Sobol,
}

impl AcquisitionKind {
    pub fn label(&self) -> &'static str {
        match self {
            AcquisitionKind::EiGn => "ei_gn",
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::LogEi => "log_ei",
            AcquisitionKind::Ts => "ts",
            AcquisitionKind::Sobol => "sobol",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ei_gn" | "eign" => Ok(AcquisitionKind::EiGn),
            "ei" => Ok(AcquisitionKind::Ei),
            "log_ei" | "logei" => Ok(AcquisitionKind::LogEi),
            "ts" => Ok(AcquisitionKind::Ts),
            "sobol" => Ok(AcquisitionKind::Sobol),
            other => Err(GnboError::InvalidConfig(format!("unknown acquisition `{other}`"))),
        }
    }
}

fn default_alpha() -> f64 {
    0.6
}
fn default_rescale() -> RescaleMode {
    RescaleMode::PoolZscore
}
fn default_incumbent() -> IncumbentRule {
    IncumbentRule::GIncumbent
}

/// Full description of one run. Optional fields fall back to the
/// per-problem defaults from the benchmark tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub acquisition: AcquisitionKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub n_init: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub raw_samples: Option<usize>,
    #[serde(default)]
    pub num_restarts: Option<usize>,
    /// Honor the benchmark tables' raw/restart column order literally
    /// instead of the swapped (raw = larger) reading.
    #[serde(default)]
    pub table1_literal: bool,
    #[serde(default = "default_incumbent")]
    pub incumbent_rule: IncumbentRule,
    #[serde(default = "default_rescale")]
    pub rescale: RescaleMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(problem: &str, acquisition: AcquisitionKind, seed: u64) -> Self {
        RunConfig {
            problem: problem.to_string(),
            acquisition,
            alpha: default_alpha(),
            budget: None,
            n_init: None,
            seed,
            raw_samples: None,
            num_restarts: None,
            table1_literal: false,
            incumbent_rule: default_incumbent(),
            rescale: default_rescale(),
            output_dir: None,
        }
    }
}

/// Benchmark-table defaults per problem: init count, budget, and the two
/// acquisition-optimizer pool sizes in the literal column order
/// (raw samples, num restarts).
#[derive(Debug, Clone, Copy)]
pub struct ProblemDefaults {
    pub n_init: usize,
    pub budget: usize,
    pub raw_literal: usize,
    pub restarts_literal: usize,
}

pub fn problem_defaults(name: &str) -> Result<ProblemDefaults> {
    let d = |n_init, budget, raw_literal, restarts_literal| ProblemDefaults {
        n_init,
        budget,
        raw_literal,
        restarts_literal,
    };
    match name {
        "shekel4" => Ok(d(12, 125, 8, 256)),
        "hartmann6" => Ok(d(18, 150, 10, 512)),
        "cosine8" => Ok(d(24, 200, 20, 1024)),
        "griewank10" => Ok(d(30, 300, 20, 1024)),
        "ackley14" => Ok(d(42, 500, 20, 1024)),
        "holder" => Ok(d(6, 60, 8, 256)),
        "fig2mix" => Ok(d(3, 20, 4, 128)),
        other => match parse_gp_sample_name(other) {
            Some(spec) => match spec.dim {
                7 => Ok(d(21, 175, 10, 512)),
                8 => Ok(d(24, 200, 20, 1024)),
                9 => Ok(d(27, 250, 20, 1024)),
                dim => Ok(d(3 * dim, 50 * dim, 10, 512)),
            },
            None => Err(GnboError::UnknownProblem(other.to_string())),
        },
    }
}

/// Base surrogate configuration for a problem: the mode-matched config for
/// GP samples, the standard Matérn-5/2 ARD pipeline otherwise.
pub fn base_fit_config(problem: &Problem) -> FitConfig {
    match parse_gp_sample_name(&problem.name) {
        Some(spec) => surrogate_config_for(&spec),
        None => FitConfig { input_bounds: Some(problem.bounds.clone()), ..FitConfig::default() },
    }
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Evaluation index over init + BO phases, 0-based.
    pub iteration: usize,
    pub x: Array1<f64>,
    pub y: f64,
    pub grad: Array1<f64>,
    pub best_f: f64,
    /// Acquisition value at the query; NaN for init, Sobol, and fallback
    /// queries.
    pub acq_value: f64,
    pub wall_ms: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub dim: usize,
    pub records: Vec<TraceRecord>,
    pub errors: Vec<String>,
}

impl Trace {
    pub fn best_f_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_f).collect()
    }

    pub fn best_record(&self) -> &TraceRecord {
        self.records
            .iter()
            .max_by(|a, b| a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty trace")
    }
}

/// Everything resolved and validated for one run.
pub struct ResolvedRun {
    pub problem: Problem,
    pub acquisition: AcquisitionKind,
    pub alpha: f64,
    pub budget: usize,
    pub n_init: usize,
    pub seed: u64,
    pub opt: OptSpec,
    pub incumbent_rule: IncumbentRule,
    pub rescale: RescaleMode,
    pub fit_base: FitConfig,
}

pub fn resolve(cfg: &RunConfig) -> Result<ResolvedRun> {
    let problem = by_name(&cfg.problem)?;
    let defaults = problem_defaults(&cfg.problem)?;
    let budget = cfg.budget.unwrap_or(defaults.budget);
    let n_init = cfg.n_init.unwrap_or(defaults.n_init);
    if budget < 1 || n_init < 1 {
        return Err(GnboError::InvalidConfig("budget and n_init must be >= 1".into()));
    }
    if !(cfg.alpha >= 0.0) {
        return Err(GnboError::InvalidConfig(format!("alpha must be >= 0, got {}", cfg.alpha)));
    }
    // swapped reading by default: raw samples is the larger column
    let (raw_default, restarts_default) = if cfg.table1_literal {
        (defaults.raw_literal, defaults.restarts_literal)
    } else {
        (
            defaults.raw_literal.max(defaults.restarts_literal),
            defaults.raw_literal.min(defaults.restarts_literal),
        )
    };
    let raw_samples = cfg.raw_samples.unwrap_or(raw_default);
    let num_restarts = cfg.num_restarts.unwrap_or(restarts_default);
    if raw_samples < 1 || num_restarts < 1 {
        return Err(GnboError::InvalidConfig("raw_samples and num_restarts must be >= 1".into()));
    }
    let opt = OptSpec::new(raw_samples, num_restarts, problem.bounds.clone());
    let fit_base = base_fit_config(&problem);
    Ok(ResolvedRun {
        acquisition: cfg.acquisition,
        alpha: cfg.alpha,
        budget,
        n_init,
        seed: cfg.seed,
        opt,
        incumbent_rule: cfg.incumbent_rule,
        rescale: cfg.rescale,
        fit_base,
        problem,
    })
}

struct FitState {
    warm: Option<KernelSpec>,
}

impl FitState {
    fn config(&self, base: &FitConfig, iteration: usize, seed: u64) -> FitConfig {
        let mut cfg = base.clone();
        cfg.seed = seed;
        if cfg.fixed_hyperparams.is_none() && self.warm.is_some() && iteration % FRESH_FIT_EVERY != 1
        {
            cfg.warm_start = self.warm.clone();
            cfg.restarts = WARM_RESTARTS;
        }
        cfg
    }
}

fn fit_objective_model(
    run: &ResolvedRun,
    data: &Dataset,
    state: &mut FitState,
    iteration: usize,
) -> Result<GPModel> {
    let seed = substream_seed(run.seed, Component::FitObjective, iteration as u64);
    let cfg = state.config(&run.fit_base, iteration, seed);
    let model = fit(&data.x_matrix(), &data.y_array(), &cfg)?;
    state.warm = Some(model.kernel.clone());
    Ok(model)
}

fn fit_gradient_surrogate(
    run: &ResolvedRun,
    data: &Dataset,
    warm: &mut Vec<Option<KernelSpec>>,
    iteration: usize,
) -> Result<GradientSurrogate> {
    let seed = substream_seed(run.seed, Component::FitGradients, iteration as u64);
    let x = data.x_matrix();
    let grad = data.grad_matrix();
    let d = grad.ncols();
    warm.resize(d, None);
    let mut models = Vec::with_capacity(d);
    for coord in 0..d {
        let mut cfg = run.fit_base.clone();
        cfg.seed = seed;
        if cfg.fixed_hyperparams.is_none()
            && warm[coord].is_some()
            && iteration % FRESH_FIT_EVERY != 1
        {
            cfg.warm_start = warm[coord].clone();
            cfg.restarts = WARM_RESTARTS;
        }
        let col = grad.column(coord).to_owned();
        let model = fit(&x, &col, &cfg)
            .map_err(|e| GnboError::GradientFit { dim: coord, source: Box::new(e) })?;
        warm[coord] = Some(model.kernel.clone());
        models.push(model);
    }
    Ok(GradientSurrogate::from_models(models))
}

/// One acquisition maximization for the model-based methods.
fn propose(
    run: &ResolvedRun,
    data: &Dataset,
    model: &GPModel,
    grads: Option<&GradientSurrogate>,
    iteration: usize,
) -> Result<(Array1<f64>, f64)> {
    let seed = substream_seed(run.seed, Component::AcqOpt, iteration as u64);
    match run.acquisition {
        AcquisitionKind::Ei => {
            let cfg = AcquisitionConfig {
                alpha: 0.0,
                rescale: RescaleMode::None,
                incumbent_rule: IncumbentRule::FIncumbent,
            };
            let best = select_incumbent(data, &cfg).f_plus;
            let acq = |x: &[f64]| {
                let (mu, var) = model.posterior(x);
                ei(mu, var.sqrt(), best)
            };
            let out = optimize_acquisition(
                |pool| {
                    let vals: Vec<f64> =
                        pool.iter().map(|p| acq(p.as_slice().unwrap())).collect();
                    (vals, acq)
                },
                &run.opt,
                seed,
            )?;
            Ok((out.x, out.value))
        }
        AcquisitionKind::LogEi => {
            let cfg = AcquisitionConfig {
                alpha: 0.0,
                rescale: RescaleMode::None,
                incumbent_rule: IncumbentRule::FIncumbent,
            };
            let best = select_incumbent(data, &cfg).f_plus;
            let acq = |x: &[f64]| {
                let (mu, var) = model.posterior(x);
                let sigma = var.sqrt().max(LOGEI_SIGMA_FLOOR);
                log_ei(mu, sigma, best).expect("floored sigma is positive")
            };
            let out = optimize_acquisition(
                |pool| {
                    let vals: Vec<f64> =
                        pool.iter().map(|p| acq(p.as_slice().unwrap())).collect();
                    (vals, acq)
                },
                &run.opt,
                seed,
            )?;
            Ok((out.x, out.value))
        }
        AcquisitionKind::EiGn => {
            let grads = grads.expect("gradient surrogate required for ei_gn");
            let cfg = AcquisitionConfig {
                alpha: run.alpha,
                rescale: run.rescale,
                incumbent_rule: run.incumbent_rule,
            };
            let inc = select_incumbent(data, &cfg);
            let components = |x: &[f64]| -> (f64, f64) {
                let (mu, var) = model.posterior(x);
                let ei_f = ei(mu, var.sqrt(), inc.f_plus);
                let pg = posterior_gradient(grads, x);
                let ei_s =
                    ei_s_bar(&pg, &inc.grad_plus).expect("floored variances are positive");
                (ei_f, ei_s)
            };
            let out = optimize_acquisition(
                |pool| {
                    let comps: Vec<(f64, f64)> =
                        pool.iter().map(|p| components(p.as_slice().unwrap())).collect();
                    let stats = match run.rescale {
                        RescaleMode::PoolZscore => {
                            let fs: Vec<f64> = comps.iter().map(|c| c.0).collect();
                            let ss: Vec<f64> = comps.iter().map(|c| c.1).collect();
                            Some(PoolStats::from_pools(&fs, &ss))
                        }
                        RescaleMode::None => None,
                    };
                    let vals: Vec<f64> =
                        comps.iter().map(|&(f, s)| ei_gn(f, s, &cfg, stats.as_ref())).collect();
                    let components = &components;
                    let objective = move |x: &[f64]| {
                        let (f, s) = components(x);
                        ei_gn(f, s, &cfg, stats.as_ref())
                    };
                    (vals, objective)
                },
                &run.opt,
                seed,
            )?;
            Ok((out.x, out.value))
        }
        AcquisitionKind::Ts => {
            let seed_ts = substream_seed(run.seed, Component::Thompson, iteration as u64);
            let n_cand = ts_candidate_count(run.problem.dim);
            let candidates = sobol::points_in(
                &run.problem.bounds,
                n_cand,
                0,
                substream_seed32(run.seed, Component::Thompson, iteration as u64),
            );
            let (values, best) = thompson_sample_values(model, &candidates, seed_ts)?;
            Ok((candidates[best].clone(), values[best]))
        }
        AcquisitionKind::Sobol => unreachable!("sobol queries bypass the model path"),
    }
}

/// Execute the full BO loop for one configuration.
pub fn run_bo(cfg: &RunConfig) -> Result<Trace> {
    let run = resolve(cfg)?;
    let mut trace = Trace {
        problem: run.problem.name.clone(),
        method: run.acquisition.label().to_string(),
        seed: run.seed,
        dim: run.problem.dim,
        records: Vec::with_capacity(run.n_init + run.budget),
        errors: Vec::new(),
    };
    let mut data = Dataset::default();
    let mut best_f = f64::NEG_INFINITY;
    let sobol_seed = substream_seed32(run.seed, Component::InitDesign, 0);

    let record = |data: &mut Dataset,
                      trace: &mut Trace,
                      best_f: &mut f64,
                      x: Array1<f64>,
                      acq_value: f64,
                      fallback: bool,
                      started: Instant| {
        let (y, grad) = run.problem.eval(x.as_slice().unwrap());
        *best_f = best_f.max(y);
        trace.records.push(TraceRecord {
            iteration: trace.records.len(),
            x: x.clone(),
            y,
            grad: grad.clone(),
            best_f: *best_f,
            acq_value,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            fallback,
        });
        data.push(x, y, grad);
    };

    // initial design: the first n_init points of the scrambled Sobol stream
    for i in 0..run.n_init {
        let started = Instant::now();
        let x = run
            .problem
            .bounds
            .from_unit(&sobol::unit_point(i as u32, run.problem.dim, sobol_seed));
        record(&mut data, &mut trace, &mut best_f, x, f64::NAN, false, started);
    }

    let mut fit_state = FitState { warm: None };
    let mut grad_warm: Vec<Option<KernelSpec>> = Vec::new();

    for t in 1..=run.budget {
        let started = Instant::now();
        let sobol_index = (run.n_init + t - 1) as u32;
        if matches!(run.acquisition, AcquisitionKind::Sobol) {
            // baseline: continue the scrambled-Sobol stream, no model fits
            let x = run
                .problem
                .bounds
                .from_unit(&sobol::unit_point(sobol_index, run.problem.dim, sobol_seed));
            record(&mut data, &mut trace, &mut best_f, x, f64::NAN, false, started);
            continue;
        }

        let proposal = fit_objective_model(&run, &data, &mut fit_state, t).and_then(|model| {
            let grads = if matches!(run.acquisition, AcquisitionKind::EiGn) {
                Some(fit_gradient_surrogate(&run, &data, &mut grad_warm, t)?)
            } else {
                None
            };
            propose(&run, &data, &model, grads.as_ref(), t)
        });

        match proposal {
            Ok((x, acq_value)) => {
                record(&mut data, &mut trace, &mut best_f, x, acq_value, false, started)
            }
            Err(err) => {
                // recoverable: fall back to the continued Sobol stream so the
                // suite statistics keep their full seed count
                trace.errors.push(format!("iteration {t}: {err}"));
                let x = run
                    .problem
                    .bounds
                    .from_unit(&sobol::unit_point(sobol_index, run.problem.dim, sobol_seed));
                record(&mut data, &mut trace, &mut best_f, x, f64::NAN, true, started);
            }
        }
    }
    Ok(trace)
}

/// Per-method aggregated curve.
#[derive(Debug, Clone)]
pub struct MethodCurve {
    pub method: String,
    pub n_seeds: usize,
    pub mean_best_f: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub problem: String,
    pub curves: Vec<MethodCurve>,
    /// (method, seed, error) for runs that failed outright.
    pub failed_runs: Vec<(String, u64, String)>,
    pub traces: Vec<Trace>,
}

/// Run every configuration and aggregate per-iteration mean and standard
/// error of the best observed value, grouped by method. Failed runs are
/// excluded from the statistics and reported.
pub fn run_suite(cfgs: &[RunConfig]) -> Result<SuiteSummary> {
    if cfgs.is_empty() {
        return Err(GnboError::InvalidConfig("empty suite".into()));
    }
    let problem = cfgs[0].problem.clone();
    if cfgs.iter().any(|c| c.problem != problem) {
        return Err(GnboError::InvalidConfig("a suite aggregates one problem".into()));
    }
    // validate everything before any work so a bad config produces no output
    for cfg in cfgs {
        resolve(cfg)?;
    }
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    for cfg in cfgs {
        match run_bo(cfg) {
            Ok(t) => traces.push(t),
            Err(e) => failed.push((cfg.acquisition.label().to_string(), cfg.seed, e.to_string())),
        }
    }
    let mut methods: Vec<String> = Vec::new();
    for t in &traces {
        if !methods.contains(&t.method) {
            methods.push(t.method.clone());
        }
    }
    let mut curves = Vec::new();
    for method in methods {
        let group: Vec<&Trace> = traces.iter().filter(|t| t.method == method).collect();
        let len = group.iter().map(|t| t.records.len()).min().unwrap_or(0);
        let n = group.len();
        let mut mean = vec![0.0; len];
        let mut stderr = vec![0.0; len];
        for (i, (m, s)) in mean.iter_mut().zip(stderr.iter_mut()).enumerate() {
            let vals: Vec<f64> = group.iter().map(|t| t.records[i].best_f).collect();
            let mu = vals.iter().sum::<f64>() / n as f64;
            *m = mu;
            if n > 1 {
                let var =
                    vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
                *s = (var / n as f64).sqrt();
            }
        }
        curves.push(MethodCurve { method, n_seeds: n, mean_best_f: mean, stderr });
    }
    Ok(SuiteSummary { problem, curves, failed_runs: failed, traces })
}

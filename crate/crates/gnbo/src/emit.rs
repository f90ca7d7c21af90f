//! Result emission: trace/summary/plot CSVs, the run manifest, the 1-d
//! acquisition-profile artifact, and top-k solution extraction.
//!
//! Floats are written with `Display`, which round-trips `f64` exactly, so
//! replaying a manifest reproduces every emitted byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    ei, ei_gn, ei_s_bar, log_ei, select_incumbent, AcquisitionConfig, IncumbentRule, RescaleMode,
};
use crate::data::Dataset;
use crate::error::{GnboError, Result};
use crate::gp::fit;
use crate::gradient::{fit_gradient_models, posterior_gradient};
use crate::harness::{base_fit_config, run_bo, AcquisitionKind, RunConfig, SuiteSummary, Trace};
use crate::objectives::Problem;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| GnboError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| GnboError::io(path, e))
}

/// `{problem}_{method}_{seed}.csv` with one row per evaluation.
pub fn trace_csv_name(trace: &Trace) -> String {
    format!("{}_{}_{}.csv", trace.problem, trace.method, trace.seed)
}

pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::from("iteration,seed,best_f,y,acq_value");
    for k in 0..trace.dim {
        out.push_str(&format!(",x_{k}"));
    }
    out.push('\n');
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.iteration, trace.seed, r.best_f, r.y, r.acq_value
        ));
        for v in r.x.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(trace: &Trace, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(trace_csv_name(trace));
    write_file(&path, &trace_to_csv(trace))?;
    Ok(path)
}

/// `summary_{problem}.csv`: per-iteration mean and standard error per method.
pub fn write_summary_csv(summary: &SuiteSummary, dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("iteration,method,mean_best_f,stderr,n_seeds\n");
    for curve in &summary.curves {
        for (i, (m, s)) in curve.mean_best_f.iter().zip(&curve.stderr).enumerate() {
            out.push_str(&format!("{},{},{},{},{}\n", i, curve.method, m, s, curve.n_seeds));
        }
    }
    let path = dir.join(format!("summary_{}.csv", summary.problem));
    write_file(&path, &out)?;
    Ok(path)
}

/// `plot_{problem}.csv`: x column plus mean/stderr columns per method,
/// directly consumable by any plotting tool.
pub fn write_plot_data(summary: &SuiteSummary, dir: &Path) -> Result<PathBuf> {
    let len = summary.curves.iter().map(|c| c.mean_best_f.len()).min().unwrap_or(0);
    let mut out = String::from("iteration");
    for c in &summary.curves {
        out.push_str(&format!(",{}_mean,{}_stderr", c.method, c.method));
    }
    out.push('\n');
    for i in 0..len {
        out.push_str(&i.to_string());
        for c in &summary.curves {
            out.push_str(&format!(",{},{}", c.mean_best_f[i], c.stderr[i]));
        }
        out.push('\n');
    }
    let path = dir.join(format!("plot_{}.csv", summary.problem));
    write_file(&path, &out)?;
    Ok(path)
}

/// Everything needed to reproduce a batch of runs byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub configs: Vec<RunConfig>,
}

impl Manifest {
    pub fn new(configs: Vec<RunConfig>) -> Self {
        Manifest { library_version: env!("CARGO_PKG_VERSION").to_string(), configs }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.configs.iter().map(|c| c.seed).collect()
    }
}

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| GnboError::InvalidConfig(format!("manifest serialization: {e}")))?;
    write_file(&path, &body)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let body = fs::read_to_string(path).map_err(|e| GnboError::io(path, e))?;
    serde_json::from_str(&body)
        .map_err(|e| GnboError::InvalidConfig(format!("manifest parse: {e}")))
}

/// Write per-run trace CSVs plus the manifest for a batch of runs.
pub fn emit_results(traces: &[Trace], configs: &[RunConfig], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for t in traces {
        paths.push(write_trace_csv(t, dir)?);
    }
    paths.push(write_manifest(&Manifest::new(configs.to_vec()), dir)?);
    Ok(paths)
}

/// Fit surrogates on the given 1-d dataset and tabulate acquisition values
/// on a uniform grid: the two-basin demonstration artifact.
///
/// Columns: `x`, then one column per requested method (raw values, no pool
/// rescaling, so the landscape shapes are directly comparable).
pub fn emit_acquisition_profile(
    problem: &Problem,
    data: &Dataset,
    methods: &[AcquisitionKind],
    grid_n: usize,
    alpha: f64,
    seed: u64,
) -> Result<String> {
    if problem.dim != 1 {
        return Err(GnboError::InvalidConfig("acquisition profiles are 1-d artifacts".into()));
    }
    let mut fit_cfg = base_fit_config(problem);
    fit_cfg.seed = seed;
    let x = data.x_matrix();
    let y = data.y_array();
    let model = fit(&x, &y, &fit_cfg)?;
    let grads = fit_gradient_models(&x, &data.grad_matrix(), &fit_cfg)?;

    let f_best = select_incumbent(
        data,
        &AcquisitionConfig {
            alpha: 0.0,
            rescale: RescaleMode::None,
            incumbent_rule: IncumbentRule::FIncumbent,
        },
    )
    .f_plus;
    let gn_cfg = AcquisitionConfig {
        alpha,
        rescale: RescaleMode::None,
        incumbent_rule: IncumbentRule::GIncumbent,
    };
    let inc_g = select_incumbent(data, &gn_cfg);

    let mut out = String::from("x");
    for m in methods {
        out.push_str(&format!(",{}", m.label()));
    }
    out.push('\n');
    let (lo, hi) = (problem.bounds.lower[0], problem.bounds.upper[0]);
    for i in 0..grid_n {
        let t = if grid_n == 1 { 0.0 } else { i as f64 / (grid_n - 1) as f64 };
        let xq = lo + t * (hi - lo);
        let (mu, var) = model.posterior(&[xq]);
        let sigma = var.sqrt();
        out.push_str(&format!("{xq}"));
        for m in methods {
            let v = match m {
                AcquisitionKind::Ei => ei(mu, sigma, f_best),
                AcquisitionKind::LogEi => {
                    log_ei(mu, sigma.max(1e-12), f_best).expect("positive sigma")
                }
                AcquisitionKind::EiGn => {
                    let ei_f = ei(mu, sigma, inc_g.f_plus);
                    let pg = posterior_gradient(&grads, &[xq]);
                    let s = ei_s_bar(&pg, &inc_g.grad_plus)?;
                    ei_gn(ei_f, s, &gn_cfg, None)
                }
                other => {
                    return Err(GnboError::InvalidConfig(format!(
                        "no profile column for `{}`",
                        other.label()
                    )))
                }
            };
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Run BO and extract the `k` best queried points that are pairwise at least
/// `min_dist` apart. When fewer than `k` survive deduplication, every row
/// carries a warning marker.
pub fn emit_top_solutions(cfg: &RunConfig, k: usize, min_dist: f64) -> Result<String> {
    let trace = run_bo(cfg)?;
    let mut ranked: Vec<(f64, &ndarray::Array1<f64>)> =
        trace.records.iter().map(|r| (r.y, &r.x)).collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
    for (y, x) in ranked {
        if kept.len() == k {
            break;
        }
        let xv = x.to_vec();
        let distinct = kept.iter().all(|(_, seen)| {
            let d2: f64 = seen.iter().zip(&xv).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= min_dist
        });
        if distinct {
            kept.push((y, xv));
        }
    }
    let short = kept.len() < k;
    let dim = trace.dim;
    let mut out = String::new();
    for j in 0..dim {
        out.push_str(&format!("x{},", j + 1));
    }
    out.push_str("f,warning\n");
    for (y, x) in &kept {
        for v in x {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y},{}\n", if short { "fewer_than_k" } else { "" }));
    }
    Ok(out)
}

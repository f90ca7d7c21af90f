//! Inner-loop acquisition maximization over box bounds.
//!
//! Pipeline: scrambled-Sobol raw pool, Boltzmann-weighted restart selection
//! (softmax over z-scored acquisition values), then bounded quasi-Newton
//! refinement of each start. Pool statistics are frozen before refinement so
//! rescaled acquisitions optimize a fixed function.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::domain::Bounds;
use crate::error::{GnboError, Result};
use crate::optim::{maximize_box, LbfgsOptions};
use crate::rng::mix;
use crate::sobol;

#[derive(Debug, Clone)]
pub struct OptSpec {
    pub raw_samples: usize,
    pub num_restarts: usize,
    pub bounds: Bounds,
    pub max_refine_iters: usize,
    /// Finite-difference step in normalized units; scaled per dimension by
    /// the box width.
    pub fd_step: f64,
}

impl OptSpec {
    pub fn new(raw_samples: usize, num_restarts: usize, bounds: Bounds) -> Self {
        OptSpec { raw_samples, num_restarts, bounds, max_refine_iters: 100, fd_step: 1e-6 }
    }
}

/// Diagnostics from one acquisition maximization.
#[derive(Debug, Clone)]
pub struct AcqOutcome {
    pub x: Array1<f64>,
    pub value: f64,
    pub best_raw_value: f64,
    pub pool_values: Vec<f64>,
}

/// `raw_samples` scrambled Sobol points inside the bounds.
pub fn draw_raw_pool(spec: &OptSpec, seed: u64) -> Vec<Array1<f64>> {
    sobol::points_in(&spec.bounds, spec.raw_samples, 0, seed as u32)
}

/// Select `k` distinct pool members without replacement with probabilities
/// proportional to `exp(zscore(acq_values))`, via Gumbel top-k keys.
pub fn boltzmann_restarts(
    pool: &[Array1<f64>],
    acq_values: &[f64],
    k: usize,
    seed: u64,
) -> Vec<Array1<f64>> {
    assert!(k <= pool.len(), "k must not exceed the pool size");
    let n = acq_values.len() as f64;
    let mean = acq_values.iter().sum::<f64>() / n;
    let var = acq_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = acq_values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let z = (v - mean) / std;
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (z - (-u.ln()).ln(), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    keyed[..k].iter().map(|&(_, i)| pool[i].clone()).collect()
}

/// Refine one start with projected quasi-Newton; the result never falls
/// below `acq(start)` and stays inside the bounds.
pub fn refine<F: Fn(&[f64]) -> f64>(
    start: &Array1<f64>,
    acq: &F,
    spec: &OptSpec,
) -> Result<(Array1<f64>, f64)> {
    let s = start.as_slice().expect("contiguous");
    let v0 = acq(s);
    if !v0.is_finite() {
        return Err(GnboError::NonFiniteAcquisition { point: s.to_vec() });
    }
    let d = spec.bounds.dim();
    let steps: Vec<f64> = (0..d).map(|k| spec.fd_step * spec.bounds.width(k)).collect();
    let opts = LbfgsOptions { max_iters: spec.max_refine_iters, ..LbfgsOptions::default() };
    let out = maximize_box(acq, s, &spec.bounds.lower, &spec.bounds.upper, &steps, &opts);
    Ok((Array1::from_vec(out.x), out.value))
}

/// Full pipeline: raw pool, pool evaluation via `prepare` (which freezes any
/// pool statistics and returns the objective to refine), Boltzmann restart
/// selection, refinement, best-of merge against the raw pool.
pub fn optimize_acquisition<P, F>(prepare: P, spec: &OptSpec, seed: u64) -> Result<AcqOutcome>
where
    P: FnOnce(&[Array1<f64>]) -> (Vec<f64>, F),
    F: Fn(&[f64]) -> f64,
{
    assert!(spec.raw_samples >= 1 && spec.num_restarts >= 1);
    let pool = draw_raw_pool(spec, seed);
    let (pool_values, objective) = prepare(&pool);
    debug_assert_eq!(pool_values.len(), pool.len());
    for (p, v) in pool.iter().zip(&pool_values) {
        if !v.is_finite() {
            return Err(GnboError::NonFiniteAcquisition { point: p.to_vec() });
        }
    }

    let mut best_raw = 0usize;
    for i in 1..pool.len() {
        if pool_values[i] > pool_values[best_raw] {
            best_raw = i;
        }
    }

    let k = spec.num_restarts.min(pool.len());
    let starts = boltzmann_restarts(&pool, &pool_values, k, mix(seed ^ 0x626f6c74));
    let mut best_x = pool[best_raw].clone();
    let mut best_v = pool_values[best_raw];
    for start in &starts {
        let (x, v) = refine(start, &objective, spec)?;
        if v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    Ok(AcqOutcome {
        x: best_x,
        value: best_v,
        best_raw_value: pool_values[best_raw],
        pool_values,
    })
}

/// Convenience wrapper for acquisitions with no pool-dependent state.
pub fn optimize_simple<F>(acq: F, spec: &OptSpec, seed: u64) -> Result<AcqOutcome>
where
    F: Fn(&[f64]) -> f64 + Copy,
{
    optimize_acquisition(
        |pool| {
            let values: Vec<f64> = pool.iter().map(|p| acq(p.as_slice().unwrap())).collect();
            (values, acq)
        },
        spec,
        seed,
    )
}

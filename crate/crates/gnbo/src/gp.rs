//! Exact GP regression: penalized marginal-likelihood fitting, posterior
//! prediction, input normalization and output standardization, and the
//! adaptive-jitter factorization path.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};

use crate::domain::Bounds;
use crate::error::{GnboError, Result};
use crate::kernel::{log_hyperprior, HyperpriorSpec, KernelFamily, KernelSpec};
use crate::linalg;
use crate::optim::{maximize_box, LbfgsOptions};

/// Affine input map to the unit cube plus output mean/std.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub input_bounds: Option<Bounds>,
    pub out_mean: f64,
    pub out_std: f64,
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer { input_bounds: None, out_mean: 0.0, out_std: 1.0 }
    }

    fn fit(input_bounds: Option<Bounds>, y: &Array1<f64>, standardize_outputs: bool) -> Self {
        if !standardize_outputs || y.is_empty() {
            return Standardizer { input_bounds, out_mean: 0.0, out_std: 1.0 };
        }
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let std = if y.len() < 2 {
            1.0
        } else {
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let s = var.sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        };
        Standardizer { input_bounds, out_mean: mean, out_std: std }
    }

    pub fn normalize_point(&self, x: &[f64]) -> Array1<f64> {
        match &self.input_bounds {
            Some(b) => b.to_unit(x),
            None => Array1::from_vec(x.to_vec()),
        }
    }

    fn normalize_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        match &self.input_bounds {
            Some(b) => {
                let mut out = x.clone();
                for mut row in out.rows_mut() {
                    for k in 0..row.len() {
                        row[k] = (row[k] - b.lower[k]) / b.width(k);
                    }
                }
                out
            }
            None => x.clone(),
        }
    }

    pub fn standardize_y(&self, y: &Array1<f64>) -> Array1<f64> {
        y.mapv(|v| (v - self.out_mean) / self.out_std)
    }

    pub fn destandardize_mean(&self, mu: f64) -> f64 {
        self.out_mean + self.out_std * mu
    }

    pub fn destandardize_var(&self, var: f64) -> f64 {
        self.out_std * self.out_std * var
    }
}

/// Fit configuration; the defaults match the benchmark pipeline (Matérn-5/2
/// ARD, log-normal/gamma hyperpriors, tiny fixed nugget).
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub hyperpriors: HyperpriorSpec,
    pub kernel_family: KernelFamily,
    pub ard: bool,
    /// Multi-start count for the MAP optimization.
    pub restarts: usize,
    pub max_iters: usize,
    pub base_jitter: f64,
    pub max_jitter: f64,
    /// Observation noise in standardized units; fixed, not learned.
    pub noise: f64,
    /// Within-model mode: skip hyperparameter optimization entirely.
    pub fixed_hyperparams: Option<KernelSpec>,
    /// Extra restart seeded from a previous fit.
    pub warm_start: Option<KernelSpec>,
    pub input_bounds: Option<Bounds>,
    pub standardize_outputs: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            hyperpriors: HyperpriorSpec::default(),
            kernel_family: KernelFamily::Matern52,
            ard: true,
            restarts: 5,
            max_iters: 60,
            base_jitter: 1e-9,
            max_jitter: 1e-2,
            noise: 1e-6,
            fixed_hyperparams: None,
            warm_start: None,
            input_bounds: None,
            standardize_outputs: true,
            seed: 0,
        }
    }
}

/// Cholesky with the jitter ladder bounded by the fit configuration.
pub fn adaptive_cholesky(k: &Array2<f64>, cfg: &FitConfig) -> Result<(Array2<f64>, f64)> {
    linalg::adaptive_cholesky(k, cfg.base_jitter, cfg.max_jitter)
}

/// Packed pairwise squared coordinate differences, reused across the many
/// kernel-matrix builds of one hyperparameter optimization.
struct PairwiseSq {
    n: usize,
    d: usize,
    vals: Vec<f64>,
}

impl PairwiseSq {
    fn build(x: &Array2<f64>) -> Self {
        let (n, d) = (x.nrows(), x.ncols());
        let xs = x.as_slice().expect("row-major");
        let mut vals = Vec::with_capacity(n * (n - 1) / 2 * d);
        for i in 1..n {
            for j in 0..i {
                for k in 0..d {
                    let diff = xs[i * d + k] - xs[j * d + k];
                    vals.push(diff * diff);
                }
            }
        }
        PairwiseSq { n, d, vals }
    }

    fn kernel_matrix(&self, spec: &KernelSpec, noise: f64) -> Array2<f64> {
        let (n, d) = (self.n, self.d);
        let mut inv_l2 = [0.0f64; 64];
        let inv_l2 = &mut inv_l2[..d];
        for k in 0..d {
            let l = spec.lengthscale(k);
            inv_l2[k] = 1.0 / (l * l);
        }
        let mut km = Array2::zeros((n, n));
        let mut idx = 0;
        for i in 0..n {
            km[[i, i]] = spec.outputscale + noise;
            for j in 0..i {
                let pair = &self.vals[idx * d..(idx + 1) * d];
                idx += 1;
                let r2: f64 = pair.iter().zip(inv_l2.iter()).map(|(v, w)| v * w).sum();
                let val = spec.outputscale * spec.correlation(r2);
                km[[i, j]] = val;
                km[[j, i]] = val;
            }
        }
        km
    }
}

/// A fitted GP. Immutable; posterior evaluation is pure.
#[derive(Debug, Clone)]
pub struct GPModel {
    /// Training inputs after normalization.
    pub x: Array2<f64>,
    /// Standardized targets.
    pub y_std: Array1<f64>,
    pub kernel: KernelSpec,
    pub noise: f64,
    /// Lower Cholesky factor of `K + jitter I`.
    pub chol: Array2<f64>,
    /// Cached `K^{-1}(y - m)`.
    pub alpha_vec: Array1<f64>,
    pub jitter: f64,
    pub standardizer: Standardizer,
}

impl GPModel {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Posterior mean and variance at `x`, de-standardized to original units.
    /// The variance is clamped at zero from below.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let xn = self.standardizer.normalize_point(x);
        let (mu_s, var_s) = self.posterior_normalized(xn.as_slice().unwrap());
        (self.standardizer.destandardize_mean(mu_s), self.standardizer.destandardize_var(var_s))
    }

    /// Posterior in standardized/normalized coordinates.
    pub fn posterior_normalized(&self, xn: &[f64]) -> (f64, f64) {
        let k_vec = self.kernel_vector(xn);
        let mu = self.kernel.mean_constant + k_vec.dot(&self.alpha_vec);
        let v = linalg::solve_lower(&self.chol, &k_vec);
        let var = (self.kernel.outputscale - v.dot(&v)).max(0.0);
        (mu, var)
    }

    /// `k(xn, X)` against the normalized training inputs.
    pub fn kernel_vector(&self, xn: &[f64]) -> Array1<f64> {
        let n = self.n();
        let d = self.dim();
        let xs = self.x.as_slice().expect("row-major");
        let mut inv_l2 = [0.0f64; 64];
        let inv_l2 = &mut inv_l2[..d];
        for (k, slot) in inv_l2.iter_mut().enumerate() {
            let l = self.kernel.lengthscale(k);
            *slot = 1.0 / (l * l);
        }
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            let mut r2 = 0.0;
            for k in 0..d {
                let diff = xn[k] - row[k];
                r2 += diff * diff * inv_l2[k];
            }
            out[i] = self.kernel.outputscale * self.kernel.correlation(r2);
        }
        out
    }
}

/// `-1/2 (y-m)^T K^{-1} (y-m) - sum log L_ii - (N/2) log 2 pi` on the
/// standardized targets.
pub fn log_marginal_likelihood(model: &GPModel) -> f64 {
    let n = model.n() as f64;
    let resid = model.y_std.mapv(|v| v - model.kernel.mean_constant);
    let quad = resid.dot(&model.alpha_vec);
    let logdet: f64 = (0..model.n()).map(|i| model.chol[[i, i]].ln()).sum();
    -0.5 * quad - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub start_value: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FitReport {
    pub restarts: Vec<RestartOutcome>,
}

fn factorize(
    x: Array2<f64>,
    y_std: Array1<f64>,
    kernel: KernelSpec,
    noise: f64,
    cfg: &FitConfig,
    standardizer: Standardizer,
    pairwise: &PairwiseSq,
) -> Result<GPModel> {
    let k = pairwise.kernel_matrix(&kernel, noise);
    let (chol, jitter) = adaptive_cholesky(&k, cfg)?;
    let resid = y_std.mapv(|v| v - kernel.mean_constant);
    let alpha_vec = linalg::solve_spd(&chol, &resid);
    Ok(GPModel { x, y_std, kernel, noise, chol, alpha_vec, jitter, standardizer })
}

fn lml_from_parts(chol: &Array2<f64>, resid: &Array1<f64>, alpha: &Array1<f64>) -> f64 {
    let n = resid.len() as f64;
    let logdet: f64 = (0..resid.len()).map(|i| chol[[i, i]].ln()).sum();
    -0.5 * resid.dot(alpha) - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

fn spec_from_log_params(theta: &[f64], family: KernelFamily) -> KernelSpec {
    let p = theta.len();
    KernelSpec {
        family,
        lengthscales: theta[..p - 1].iter().map(|v| v.exp()).collect(),
        outputscale: theta[p - 1].exp(),
        mean_constant: 0.0,
    }
}

/// Fit a GP to `(X, y)`: normalize, standardize, then maximize the
/// log-marginal likelihood plus hyperprior over multi-start L-BFGS in log
/// space. With `fixed_hyperparams` set, no optimization occurs.
/// Deterministic given `cfg.seed`.
pub fn fit(x: &Array2<f64>, y: &Array1<f64>, cfg: &FitConfig) -> Result<GPModel> {
    fit_detailed(x, y, cfg).map(|(m, _)| m)
}

pub fn fit_detailed(x: &Array2<f64>, y: &Array1<f64>, cfg: &FitConfig) -> Result<(GPModel, FitReport)> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 || y.len() != n {
        return Err(GnboError::InvalidConfig(format!(
            "fit requires N >= 1 matching inputs/targets (got {n} rows, {} targets)",
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(GnboError::InvalidConfig("non-finite training data".into()));
    }

    let standardizer = Standardizer::fit(cfg.input_bounds.clone(), y, cfg.standardize_outputs);
    let xn = standardizer.normalize_rows(x);
    let ys = standardizer.standardize_y(y);
    let pairwise = PairwiseSq::build(&xn);

    if let Some(fixed) = &cfg.fixed_hyperparams {
        fixed.validate()?;
        let model = factorize(xn, ys, fixed.clone(), cfg.noise, cfg, standardizer, &pairwise)?;
        return Ok((model, FitReport::default()));
    }

    let n_ls = if cfg.ard { d } else { 1 };
    let p = n_ls + 1;

    // MAP objective over log hyperparameters; factorization failures map to
    // -inf so the optimizer backs away from degenerate regions.
    let objective = |theta: &[f64]| -> f64 {
        let spec = spec_from_log_params(theta, cfg.kernel_family);
        let km = pairwise.kernel_matrix(&spec, cfg.noise);
        let Ok((chol, _)) = linalg::adaptive_cholesky(&km, cfg.base_jitter, cfg.max_jitter) else {
            return f64::NEG_INFINITY;
        };
        let resid = ys.mapv(|v| v - spec.mean_constant);
        let alpha = linalg::solve_spd(&chol, &resid);
        let lml = lml_from_parts(&chol, &resid, &alpha);
        lml + log_hyperprior(&spec, &cfg.hyperpriors).unwrap_or(f64::NEG_INFINITY)
    };

    // Start list: defaults, then the warm start, then hyperprior draws.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut start0 = vec![0.4f64.ln(); n_ls];
    start0.push(0.0);
    starts.push(start0);
    if let Some(warm) = &cfg.warm_start {
        if warm.lengthscales.len() == n_ls {
            let mut t: Vec<f64> = warm.lengthscales.iter().map(|l| l.ln()).collect();
            t.push(warm.outputscale.ln());
            starts.push(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma = GammaDist::new(cfg.hyperpriors.outputscale_shape, 1.0 / cfg.hyperpriors.outputscale_rate)
        .expect("valid gamma");
    while starts.len() < cfg.restarts.max(1) {
        let mut t: Vec<f64> = (0..n_ls)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                cfg.hyperpriors.lengthscale_log_location + cfg.hyperpriors.lengthscale_log_scale * z
            })
            .collect();
        let s: f64 = gamma.sample(&mut rng);
        t.push(s.max(1e-6).ln());
        starts.push(t);
    }

    let lower = {
        let mut v = vec![(1e-3f64).ln(); n_ls];
        v.push((1e-6f64).ln());
        v
    };
    let upper = {
        let mut v = vec![(1e3f64).ln(); n_ls];
        v.push((1e6f64).ln());
        v
    };
    let fd_steps = vec![1e-6; p];
    let opts = LbfgsOptions { max_iters: cfg.max_iters, ..LbfgsOptions::default() };

    let mut report = FitReport::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let start_value = objective(start);
        let out = if start_value.is_finite() {
            maximize_box(&objective, start, &lower, &upper, &fd_steps, &opts)
        } else {
            crate::optim::Optimum { x: start.clone(), value: start_value, iters: 0, evals: 1 }
        };
        report.restarts.push(RestartOutcome { start_value, value: out.value });
        // ties break toward the lowest restart index
        let better = match &best {
            None => true,
            Some((bv, _)) => out.value > *bv,
        };
        if better {
            best = Some((out.value, out.x));
        }
    }
    let (_, theta) = best.expect("at least one restart");
    let kernel = spec_from_log_params(&theta, cfg.kernel_family);
    let model = factorize(xn, ys, kernel, cfg.noise, cfg, standardizer, &pairwise)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg_plain() -> FitConfig {
        FitConfig { standardize_outputs: false, noise: 0.0, ..FitConfig::default() }
    }

    fn single_point_model() -> GPModel {
        // N=1, RBF unit scale/lengthscale, noise 0, X=[0], y=[2], zero mean
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 1.0, 1.0).unwrap()),
            ..cfg_plain()
        };
        fit(&array![[0.0]], &array![2.0], &cfg).unwrap()
    }

    #[test]
    fn hand_solved_single_point_posterior() {
        let m = single_point_model();
        let (mu, var) = m.posterior(&[1.0]);
        assert!((mu - 1.213_061_319_425_266_8).abs() < 1e-9, "mu = {mu}");
        assert!((var - 0.632_120_558_828_557_7).abs() < 1e-9, "var = {var}");
    }

    #[test]
    fn lml_single_zero_observation() {
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 1.0, 1.0).unwrap()),
            ..cfg_plain()
        };
        let m = fit(&array![[0.5]], &array![0.0], &cfg).unwrap();
        let lml = log_marginal_likelihood(&m);
        assert!((lml - (-0.918_938_533_204_672_7)).abs() < 1e-9, "lml = {lml}");
    }

    #[test]
    fn lml_matches_independent_density_product_when_uncorrelated() {
        // lengthscale ~ 0: K ~= (s + noise) I, so the joint density factors
        // into 1-d Gaussians; check doubling the noise tracks the brute force.
        let x = array![[0.0], [10.0], [20.0]];
        let y = array![0.3, -1.1, 0.7];
        for noise in [0.5, 1.0] {
            let cfg = FitConfig {
                fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 1e-3, 2.0).unwrap()),
                noise,
                standardize_outputs: false,
                ..FitConfig::default()
            };
            let m = fit(&x, &y, &cfg).unwrap();
            let var = 2.0 + noise;
            let brute: f64 = y
                .iter()
                .map(|v| -0.5 * v * v / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln())
                .sum();
            let lml = log_marginal_likelihood(&m);
            assert!((lml - brute).abs() < 1e-8, "noise {noise}: {lml} vs {brute}");
        }
    }

    #[test]
    fn lml_invariant_under_row_permutation() {
        let x = array![[0.1], [0.7], [0.4], [0.9]];
        let y = array![1.0, -0.5, 0.3, 0.8];
        let xp = array![[0.9], [0.4], [0.7], [0.1]];
        let yp = array![0.8, 0.3, -0.5, 1.0];
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Matern52, 0.4, 1.3).unwrap()),
            noise: 1e-4,
            standardize_outputs: false,
            ..FitConfig::default()
        };
        let a = log_marginal_likelihood(&fit(&x, &y, &cfg).unwrap());
        let b = log_marginal_likelihood(&fit(&xp, &yp, &cfg).unwrap());
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn fixed_hyperparams_skip_optimization() {
        let spec = KernelSpec::ard(KernelFamily::Matern52, 2, 0.77, 1.9).unwrap();
        let cfg = FitConfig { fixed_hyperparams: Some(spec.clone()), ..FitConfig::default() };
        let x = array![[0.0, 0.0], [0.5, 0.2], [0.9, 0.8]];
        let y = array![1.0, 2.0, 0.5];
        let m = fit(&x, &y, &cfg).unwrap();
        assert_eq!(m.kernel, spec);
    }

    #[test]
    fn noiseless_interpolation_and_prior_reversion() {
        let x = array![[0.0], [0.35], [0.8]];
        let y = array![0.5, -0.2, 0.9];
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 0.2, 1.0).unwrap()),
            ..cfg_plain()
        };
        let m = fit(&x, &y, &cfg).unwrap();
        for i in 0..3 {
            let (mu, var) = m.posterior(&[x[[i, 0]]]);
            assert!((mu - y[i]).abs() <= 1e-6, "interpolation at {i}: {mu} vs {}", y[i]);
            assert!(var <= 1e-8, "var at training point: {var}");
        }
        // far outside the data: prior mean 0 and prior variance (outputscale)
        let (mu, var) = m.posterior(&[50.0]);
        assert!(mu.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn standardized_fit_interpolates_in_original_units() {
        let x = array![[0.0], [0.25], [0.5], [0.75]];
        let y = array![103.0, 97.0, 111.0, 95.0];
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Matern52, 0.3, 1.0).unwrap()),
            noise: 0.0,
            standardize_outputs: true,
            ..FitConfig::default()
        };
        let m = fit(&x, &y, &cfg).unwrap();
        let mean = m.y_std.sum() / 4.0;
        let var = m.y_std.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-10, "standardized mean {mean}");
        assert!((var - 1.0).abs() < 1e-10, "standardized var {var}");
        for i in 0..4 {
            let (mu, _) = m.posterior(&[x[[i, 0]]]);
            assert!((mu - y[i]).abs() <= 1e-6);
        }
        // variance never exceeds the de-standardized outputscale
        for t in 0..50 {
            let (_, v) = m.posterior(&[t as f64 / 49.0 * 3.0 - 1.0]);
            assert!(v >= 0.0 && v <= m.standardizer.out_std.powi(2) + 1e-8);
        }
    }

    #[test]
    fn duplicate_observations_never_increase_variance() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = 4 + rng.random_range(0..5usize);
            let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
            let y = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
            let cfg = FitConfig {
                fixed_hyperparams: Some(KernelSpec::ard(KernelFamily::Rbf, 2, 0.5, 1.0).unwrap()),
                noise: 1e-4,
                standardize_outputs: false,
                ..FitConfig::default()
            };
            let base = fit(&x, &y, &cfg).unwrap();

            let dup = rng.random_range(0..n);
            let mut x2 = Array2::zeros((n + 1, 2));
            let mut y2 = Array1::zeros(n + 1);
            for i in 0..n {
                x2.row_mut(i).assign(&x.row(i));
                y2[i] = y[i];
            }
            x2.row_mut(n).assign(&x.row(dup));
            y2[n] = y[dup];
            let extended = fit(&x2, &y2, &cfg).unwrap();

            for _ in 0..20 {
                let probe = [rng.random::<f64>(), rng.random::<f64>()];
                let (_, v1) = base.posterior(&probe);
                let (_, v2) = extended.posterior(&probe);
                assert!(v2 <= v1 + 1e-9, "duplicate increased variance: {v2} > {v1}");
            }
        }
    }

    #[test]
    fn optimized_fit_beats_its_starts() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((20, 2), |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(20, |i| (6.0 * x[[i, 0]]).sin() + x[[i, 1]]);
        let cfg = FitConfig { restarts: 3, max_iters: 40, ..FitConfig::default() };
        let (_, report) = fit_detailed(&x, &y, &cfg).unwrap();
        assert_eq!(report.restarts.len(), 3);
        for r in &report.restarts {
            assert!(
                r.value >= r.start_value || !r.start_value.is_finite(),
                "restart regressed: {} < {}",
                r.value,
                r.start_value
            );
        }
    }

    #[test]
    fn fit_is_deterministic_given_seed() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((12, 1), |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(12, |i| (4.0 * x[[i, 0]]).cos());
        let cfg = FitConfig { restarts: 3, seed: 42, ..FitConfig::default() };
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        assert_eq!(a.kernel, b.kernel);
    }
}

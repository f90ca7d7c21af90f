//! Acquisition functions and their validation oracles.
//!
//! Closed forms: EI, LogEI, the mean-field stationarity term, and their
//! combination `EI-GN = EI_f - alpha * EIbar_s`. The stationarity term is the
//! orthant-truncated second moment of the whitened posterior gradient,
//!
//! ```text
//! EIbar_s = [prod_i Phi(-z_i+)] *
//!           ( ||mu||^2 - ||g+||^2 + 2 sum_i mu_i L_i w_i
//!             + sum_i var_i (1 + z_i+ w_i) )
//! ```
//!
//! with `z+ = L^{-1}(g+ - mu)` and `w = phi(z+) / Phi(-z+)` elementwise; the
//! diagonal posterior covariance makes every term an elementwise sum, so one
//! evaluation costs O(d).
//!
//! Monte Carlo estimators for the exact improvement quantities (`EI_s`,
//! its orthant restriction, `EI_g`, and the stationarity-event probability)
//! provide the independent oracles the closed form is validated against.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{GnboError, Result};
use crate::gp::GPModel;
use crate::gradient::PosteriorGradient;
use crate::linalg;
use crate::normal::{log_ei_kernel, mills_ratio, norm_cdf, norm_log_cdf, norm_pdf, SQRT_2};

pub use crate::normal::{normal_pdf_cdf, NormalParts};

/// Gradient posterior variances below this floor are treated as
/// deterministic; whitening divides by their square root.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Incumbent under the auxiliary objective `g = f - alpha ||grad||^2`.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub x_plus: Array1<f64>,
    pub f_plus: f64,
    pub grad_plus: Array1<f64>,
    pub g_plus: f64,
}

impl Incumbent {
    pub fn new(x_plus: Array1<f64>, f_plus: f64, grad_plus: Array1<f64>, alpha: f64) -> Self {
        let g_plus = f_plus - alpha * grad_plus.dot(&grad_plus);
        Incumbent { x_plus, f_plus, grad_plus, g_plus }
    }
}

/// Whitened incumbent quantities anchoring the stationarity term.
#[derive(Debug, Clone)]
pub struct WhitenedIncumbent {
    /// sqrt of the diagonal posterior gradient variances.
    pub l_diag: Array1<f64>,
    pub z_plus: Array1<f64>,
    /// Inverse Mills ratios `phi(z+)/Phi(-z+)`, elementwise.
    pub w: Array1<f64>,
    /// `sum_i log Phi(-z_i+)`.
    pub log_phi_prod: f64,
}

/// Stationarity event: gradient norm drops by at least `delta` while the
/// objective loses at most `alpha * c * delta`.
#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    pub delta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    None,
    PoolZscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncumbentRule {
    /// argmax of `y - alpha ||grad y||^2` over observations.
    GIncumbent,
    /// argmax of `y`.
    FIncumbent,
}

#[derive(Debug, Clone, Copy)]
pub struct AcquisitionConfig {
    pub alpha: f64,
    pub rescale: RescaleMode,
    pub incumbent_rule: IncumbentRule,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            alpha: 0.6,
            rescale: RescaleMode::PoolZscore,
            incumbent_rule: IncumbentRule::GIncumbent,
        }
    }
}

/// Frozen pool statistics for z-scored rescaling of the two components.
#[derive(Debug, Clone, Copy)]
pub struct PoolStats {
    pub mean_f: f64,
    pub std_f: f64,
    pub mean_s: f64,
    pub std_s: f64,
}

impl PoolStats {
    /// Population statistics with a std floor so constant pools fall back to
    /// std = 1.
    pub fn from_pools(ei_f: &[f64], ei_s: &[f64]) -> Self {
        let (mean_f, std_f) = mean_std(ei_f);
        let (mean_s, std_s) = mean_std(ei_s);
        PoolStats { mean_f, std_f, mean_s, std_s }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 1.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < 1e-12 { 1.0 } else { std })
}

/// Closed-form expected improvement for maximization.
pub fn ei(mu: f64, sigma: f64, best: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return (mu - best).max(0.0);
    }
    let u = (mu - best) / sigma;
    ((mu - best) * norm_cdf(u) + sigma * norm_pdf(u)).max(0.0)
}

/// `ln EI`, stable deep into the no-improvement tail.
pub fn log_ei(mu: f64, sigma: f64, best: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(GnboError::DegenerateVariance);
    }
    let u = (mu - best) / sigma;
    Ok(sigma.ln() + log_ei_kernel(u))
}

/// Incumbent selection over the observed data; ties break toward the lowest
/// observation index.
pub fn select_incumbent(data: &Dataset, cfg: &AcquisitionConfig) -> Incumbent {
    assert!(!data.is_empty(), "incumbent needs at least one observation");
    let score = |i: usize| -> f64 {
        match cfg.incumbent_rule {
            IncumbentRule::GIncumbent => data.y[i] - cfg.alpha * data.grad[i].dot(&data.grad[i]),
            IncumbentRule::FIncumbent => data.y[i],
        }
    };
    let mut best = 0;
    let mut best_score = score(0);
    for i in 1..data.len() {
        let s = score(i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Incumbent::new(data.x[best].clone(), data.y[best], data.grad[best].clone(), cfg.alpha)
}

/// Whitening of the incumbent gradient against a diagonal posterior.
/// Callers floor the variances at [`VARIANCE_FLOOR`] first.
pub fn whiten(pg: &PosteriorGradient, grad_plus: &Array1<f64>) -> Result<WhitenedIncumbent> {
    let d = pg.mean.len();
    if grad_plus.len() != d {
        return Err(GnboError::DimensionMismatch { expected: d, got: grad_plus.len() });
    }
    let mut l_diag = Array1::zeros(d);
    let mut z_plus = Array1::zeros(d);
    let mut w = Array1::zeros(d);
    let mut log_phi_prod = 0.0;
    for i in 0..d {
        let var = pg.var_diag[i];
        if !(var > 0.0) {
            return Err(GnboError::NonpositiveVariance { value: var });
        }
        let l = var.sqrt();
        let z = (grad_plus[i] - pg.mean[i]) / l;
        l_diag[i] = l;
        z_plus[i] = z;
        w[i] = mills_ratio(z);
        log_phi_prod += norm_log_cdf(-z);
    }
    Ok(WhitenedIncumbent { l_diag, z_plus, w, log_phi_prod })
}

/// Mean-field stationarity term from precomputed whitening; O(d).
pub fn ei_s_bar_from_whitened(
    wh: &WhitenedIncumbent,
    pg: &PosteriorGradient,
    grad_plus: &Array1<f64>,
) -> f64 {
    let d = pg.mean.len();
    let mut sum = -grad_plus.dot(grad_plus);
    for i in 0..d {
        let mu = pg.mean[i];
        let var = wh.l_diag[i] * wh.l_diag[i];
        sum += mu * mu;
        sum += 2.0 * mu * wh.l_diag[i] * wh.w[i];
        sum += var * (1.0 + wh.z_plus[i] * wh.w[i]);
    }
    wh.log_phi_prod.exp() * sum
}

/// Closed-form mean-field approximation of the stationarity improvement.
pub fn ei_s_bar(pg: &PosteriorGradient, grad_plus: &Array1<f64>) -> Result<f64> {
    let floored = PosteriorGradient {
        mean: pg.mean.clone(),
        var_diag: pg.var_diag.mapv(|v| v.max(VARIANCE_FLOOR)),
    };
    let wh = whiten(&floored, grad_plus)?;
    Ok(ei_s_bar_from_whitened(&wh, &floored, grad_plus))
}

/// Combine the objective and stationarity components, optionally z-scored
/// against frozen pool statistics.
pub fn ei_gn(
    ei_f: f64,
    ei_s: f64,
    cfg: &AcquisitionConfig,
    pool_stats: Option<&PoolStats>,
) -> f64 {
    match cfg.rescale {
        RescaleMode::None => ei_f - cfg.alpha * ei_s,
        RescaleMode::PoolZscore => {
            let stats = pool_stats.copied().unwrap_or(PoolStats {
                mean_f: 0.0,
                std_f: 1.0,
                mean_s: 0.0,
                std_s: 1.0,
            });
            (ei_f - stats.mean_f) / stats.std_f - cfg.alpha * (ei_s - stats.mean_s) / stats.std_s
        }
    }
}

fn running_mean_se(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Monte Carlo estimate of `E[max(||mu + L z||^2 - ||g+||^2, 0)]`.
pub fn mc_ei_s(
    pg: &PosteriorGradient,
    grad_plus: &Array1<f64>,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let d = pg.mean.len();
    let target = grad_plus.dot(grad_plus);
    let l: Vec<f64> = pg.var_diag.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..n {
        let mut norm2 = 0.0;
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let g = pg.mean[i] + l[i] * z;
            norm2 += g * g;
        }
        let v = (norm2 - target).max(0.0);
        sum += v;
        sumsq += v * v;
    }
    running_mean_se(sum, sumsq, n)
}

/// Monte Carlo estimate of the orthant integral behind the closed form: the
/// same integrand restricted (not positive-parted) to `z >= z+` componentwise.
/// This is the direct sampling oracle for [`ei_s_bar`].
///
/// Samples the restriction exactly: each coordinate draws from its truncated
/// normal by inverse-CDF in the survival domain, and the average is scaled by
/// the analytic orthant mass. This keeps the standard error proportional to
/// the estimate itself, so low-mass orthants are resolved instead of
/// reporting 0 +- 0.
pub fn mc_ei_s_orthant(
    pg: &PosteriorGradient,
    grad_plus: &Array1<f64>,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let d = pg.mean.len();
    let target = grad_plus.dot(grad_plus);
    let l: Vec<f64> = pg.var_diag.iter().map(|v| v.max(VARIANCE_FLOOR).sqrt()).collect();
    let z_plus: Vec<f64> = (0..d).map(|i| (grad_plus[i] - pg.mean[i]) / l[i]).collect();
    // orthant mass in log space; below representable range the integral is 0
    let log_mass: f64 = z_plus.iter().map(|&z| crate::normal::norm_log_cdf(-z)).sum();
    let mass = log_mass.exp();
    if mass == 0.0 {
        return (0.0, 0.0);
    }
    let survival_caps: Vec<f64> = z_plus.iter().map(|&z| norm_cdf(-z)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..n {
        let mut norm2 = 0.0;
        for i in 0..d {
            // survival value uniform on (0, Phi(-z+)) maps to z >= z+
            let s = rng.random::<f64>() * survival_caps[i];
            let z = SQRT_2 * statrs::function::erf::erfc_inv(2.0 * s.max(f64::MIN_POSITIVE));
            let g = pg.mean[i] + l[i] * z;
            norm2 += g * g;
        }
        let v = mass * (norm2 - target);
        sum += v;
        sumsq += v * v;
    }
    running_mean_se(sum, sumsq, n)
}

/// Monte Carlo estimate of `EI_g`: samples `f ~ N(mu, sigma^2)` and
/// `grad ~ N(mu_grad, Sigma_grad)` independently, forms the auxiliary
/// objective, and takes the positive part against the incumbent.
pub fn mc_ei_g(
    f_post: (f64, f64),
    pg: &PosteriorGradient,
    inc: &Incumbent,
    alpha: f64,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    let (mu_f, sigma_f) = f_post;
    let d = pg.mean.len();
    let l: Vec<f64> = pg.var_diag.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..n {
        let zf: f64 = StandardNormal.sample(&mut rng);
        let f = mu_f + sigma_f * zf;
        let mut norm2 = 0.0;
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let g = pg.mean[i] + l[i] * z;
            norm2 += g * g;
        }
        let v = (f - alpha * norm2 - inc.g_plus).max(0.0);
        sum += v;
        sumsq += v * v;
    }
    running_mean_se(sum, sumsq, n)
}

/// Outcome of the stationarity-event lower-bound check
/// `EI_g >= alpha (1 - c) delta P(E)`.
#[derive(Debug, Clone, Copy)]
pub struct EventBoundReport {
    pub p_event: f64,
    pub p_event_se: f64,
    pub lhs_ei_g: f64,
    pub lhs_se: f64,
    pub rhs_bound: f64,
    pub holds: bool,
}

/// Estimate the event probability and `EI_g` from one set of joint samples
/// and check the lower bound with a 4-combined-standard-error slack.
pub fn event_bound_check(
    f_post: (f64, f64),
    pg: &PosteriorGradient,
    inc: &Incumbent,
    alpha: f64,
    spec: &EventSpec,
    n: usize,
    seed: u64,
) -> EventBoundReport {
    let (mu_f, sigma_f) = f_post;
    let d = pg.mean.len();
    let l: Vec<f64> = pg.var_diag.iter().map(|v| v.max(0.0).sqrt()).collect();
    let target = inc.grad_plus.dot(&inc.grad_plus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum_g, mut sumsq_g) = (0.0, 0.0);
    let mut hits = 0usize;
    for _ in 0..n {
        let zf: f64 = StandardNormal.sample(&mut rng);
        let f = mu_f + sigma_f * zf;
        let mut norm2 = 0.0;
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let g = pg.mean[i] + l[i] * z;
            norm2 += g * g;
        }
        let v = (f - alpha * norm2 - inc.g_plus).max(0.0);
        sum_g += v;
        sumsq_g += v * v;
        if norm2 <= target - spec.delta && f >= inc.f_plus - alpha * spec.c * spec.delta {
            hits += 1;
        }
    }
    let (lhs, lhs_se) = running_mean_se(sum_g, sumsq_g, n);
    let p = hits as f64 / n as f64;
    let p_se = (p * (1.0 - p) / n as f64).sqrt();
    let coeff = alpha * (1.0 - spec.c) * spec.delta;
    let rhs = coeff * p;
    let combined = (lhs_se * lhs_se + (coeff * p_se) * (coeff * p_se)).sqrt();
    EventBoundReport {
        p_event: p,
        p_event_se: p_se,
        lhs_ei_g: lhs,
        lhs_se,
        rhs_bound: rhs,
        holds: lhs >= rhs - 4.0 * combined,
    }
}

/// Thompson sampling over a candidate set: one joint posterior draw, argmax
/// wins. Deterministic given the seed.
pub fn thompson_select(
    model: &GPModel,
    candidates: &[Array1<f64>],
    seed: u64,
) -> Result<Array1<f64>> {
    assert!(!candidates.is_empty(), "thompson_select needs candidates");
    let (values, _) = thompson_sample_values(model, candidates, seed)?;
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok(candidates[best].clone())
}

/// Joint posterior sample values at the candidates (de-standardized), plus
/// the argmax index.
pub fn thompson_sample_values(
    model: &GPModel,
    candidates: &[Array1<f64>],
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let m = candidates.len();
    let n = model.n();
    // cross-covariance and candidate prior covariance in normalized space
    let normalized: Vec<Array1<f64>> = candidates
        .iter()
        .map(|c| model.standardizer.normalize_point(c.as_slice().unwrap()))
        .collect();
    let mut kxs = Array2::zeros((n, m));
    for (j, c) in normalized.iter().enumerate() {
        let col = model.kernel_vector(c.as_slice().unwrap());
        kxs.column_mut(j).assign(&col);
    }
    let mut mean = Array1::zeros(m);
    for j in 0..m {
        mean[j] = model.kernel.mean_constant + kxs.column(j).dot(&model.alpha_vec);
    }
    // V = L^{-1} K(X, Xc)
    let mut v = kxs;
    linalg::solve_lower_multi(&model.chol, &mut v);
    // C = K(Xc, Xc) - V^T V
    let d = model.dim();
    let mut inv_l2 = vec![0.0f64; d];
    for (k, slot) in inv_l2.iter_mut().enumerate() {
        let l = model.kernel.lengthscale(k);
        *slot = 1.0 / (l * l);
    }
    let mut cov = Array2::zeros((m, m));
    for a in 0..m {
        let xa = normalized[a].as_slice().unwrap();
        for b in 0..=a {
            let xb = normalized[b].as_slice().unwrap();
            let mut r2 = 0.0;
            for k in 0..d {
                let diff = xa[k] - xb[k];
                r2 += diff * diff * inv_l2[k];
            }
            let prior = model.kernel.outputscale * model.kernel.correlation(r2);
            let mut dot = 0.0;
            for i in 0..n {
                dot += v[[i, a]] * v[[i, b]];
            }
            let c = prior - dot;
            cov[[a, b]] = c;
            cov[[b, a]] = c;
        }
    }
    let (lc, _) = linalg::adaptive_cholesky(&cov, 1e-9, 1e-2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut values = vec![0.0; m];
    let ls = lc.as_slice().expect("row-major");
    for i in 0..m {
        let mut s = mean[i];
        for j in 0..=i {
            s += ls[i * m + j] * z[j];
        }
        values[i] = model.standardizer.destandardize_mean(s);
    }
    let mut best = 0;
    for i in 1..m {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok((values, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn pg(mean: Vec<f64>, var: Vec<f64>) -> PosteriorGradient {
        PosteriorGradient { mean: Array1::from_vec(mean), var_diag: Array1::from_vec(var) }
    }

    #[test]
    fn ei_closed_form_values() {
        // frozen from a 1e7-sample MC / quadrature oracle
        assert!((ei(1.0, 1.0, 0.0) - 1.083_315_470_587_686_3).abs() < 1e-12);
        assert_eq!(ei(0.5, 0.0, 0.5), 0.0);
        assert_eq!(ei(0.75, 0.0, 0.25), 0.5);
        let tail = ei(-10.0, 1.0, 0.0);
        assert!(tail > 0.0 && tail <= 1e-20, "tail EI {tail}");
    }

    #[test]
    fn log_ei_matches_and_stays_finite() {
        let v = log_ei(1.0, 1.0, 0.0).unwrap();
        assert!((v - 0.080_026_218_849_306_94).abs() < 1e-10);
        for muminusbest in [-40.0, -100.0, -5.0, 0.0, 3.0] {
            let lv = log_ei(muminusbest, 1.0, 0.0).unwrap();
            assert!(lv.is_finite());
            let direct = ei(muminusbest, 1.0, 0.0);
            if direct > 1e-30 {
                let rel = ((lv.exp() - direct) / direct).abs();
                assert!(rel < 1e-6, "mismatch at {muminusbest}: rel {rel}");
            }
        }
        assert!(matches!(log_ei(1.0, 0.0, 0.0), Err(GnboError::DegenerateVariance)));
    }

    #[test]
    fn incumbent_rules() {
        let mut data = Dataset::default();
        data.push(array![0.0], 1.0, array![1.0]); // y 1.0, |g|^2 = 1
        data.push(array![1.0], 1.0, array![0.0]); // y 1.0, |g|^2 = 0
        data.push(array![2.0], 0.5, array![0.0]);
        let g_cfg = AcquisitionConfig {
            alpha: 0.5,
            rescale: RescaleMode::None,
            incumbent_rule: IncumbentRule::GIncumbent,
        };
        let inc = select_incumbent(&data, &g_cfg);
        assert_eq!(inc.x_plus[0], 1.0, "zero-gradient point wins under g rule");
        assert_eq!(inc.g_plus, 1.0);

        // alpha = 0 collapses to argmax y with lowest-index ties
        let zero = AcquisitionConfig { alpha: 0.0, ..g_cfg };
        let inc0 = select_incumbent(&data, &zero);
        assert_eq!(inc0.x_plus[0], 0.0);

        let f_cfg = AcquisitionConfig { incumbent_rule: IncumbentRule::FIncumbent, ..g_cfg };
        let incf = select_incumbent(&data, &f_cfg);
        assert_eq!(incf.x_plus[0], 0.0);

        let single = {
            let mut d = Dataset::default();
            d.push(array![9.0], -3.0, array![5.0]);
            d
        };
        assert_eq!(select_incumbent(&single, &g_cfg).x_plus[0], 9.0);
    }

    #[test]
    fn incumbent_g_consistency() {
        let inc = Incumbent::new(array![0.0], 2.0, array![1.0, 2.0], 0.6);
        assert!((inc.g_plus - (2.0 - 0.6 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn whiten_diagonal_arithmetic() {
        let p = pg(vec![1.0, 2.0], vec![4.0, 9.0]);
        let wh = whiten(&p, &array![3.0, 5.0]).unwrap();
        assert_eq!(wh.l_diag, array![2.0, 3.0]);
        assert_eq!(wh.z_plus, array![1.0, 1.0]);
    }

    #[test]
    fn whiten_at_the_mean() {
        let p = pg(vec![0.5, -0.25, 3.0], vec![1.0, 2.0, 0.5]);
        let wh = whiten(&p, &p.mean.clone()).unwrap();
        for i in 0..3 {
            assert_eq!(wh.z_plus[i], 0.0);
            assert!((wh.w[i] - 0.797_884_560_802_865_4).abs() < 1e-14);
        }
        assert!((wh.log_phi_prod - 3.0 * 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn whiten_survives_large_z() {
        let p = pg(vec![0.0], vec![1.0]);
        let wh = whiten(&p, &array![8.0]).unwrap();
        assert!(wh.w[0].is_finite());
        assert!(wh.w[0] >= 8.0, "inverse Mills bound w >= z for z > 0");
        assert!(whiten(&pg(vec![0.0], vec![0.0]), &array![0.0]).is_err());
    }

    #[test]
    fn ei_s_bar_analytic_cases() {
        // d=1, standard posterior, zero incumbent gradient: integral of
        // z^2 phi(z) over [0, inf) = 1/2
        let v = ei_s_bar(&pg(vec![0.0], vec![1.0]), &array![0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-12, "d=1 case: {v}");
        // d=3: 3 * (1/2)^3
        let v3 = ei_s_bar(&pg(vec![0.0; 3], vec![1.0; 3]), &Array1::zeros(3)).unwrap();
        assert!((v3 - 0.375).abs() < 1e-12, "d=3 case: {v3}");
    }

    #[test]
    fn ei_s_bar_untruncated_limit() {
        // incumbent gradient far below the posterior mean: orthant covers
        // everything and the untruncated second moment remains
        let p = pg(vec![2.0, -1.0], vec![0.3, 0.7]);
        let gp = array![-50.0, -80.0];
        let v = ei_s_bar(&p, &gp).unwrap();
        let expect = (4.0 + 1.0 + 0.3 + 0.7) - gp.dot(&gp);
        assert!((v - expect).abs() < 1e-6 * expect.abs(), "{v} vs {expect}");
    }

    #[test]
    fn ei_s_bar_matches_small_mc() {
        let p = pg(vec![0.4, -0.8], vec![0.5, 1.5]);
        let gp = array![0.3, 0.2];
        let closed = ei_s_bar(&p, &gp).unwrap();
        let (mc, se) = mc_ei_s_orthant(&p, &gp, 400_000, 99);
        assert!(
            (closed - mc).abs() <= 3.0 * se,
            "closed {closed} vs mc {mc} +- {se}"
        );
    }

    #[test]
    fn mc_ei_s_known_cases() {
        // zero-variance limit: deterministic integrand
        let p = pg(vec![2.0, 1.0], vec![1e-12, 1e-12]);
        let (est, _) = mc_ei_s(&p, &array![1.0, 0.0], 1000, 7);
        assert!((est - 4.0).abs() < 1e-6);
        // chi-square mean: E[max(z^2, 0)] = 1
        let (est, se) = mc_ei_s(&pg(vec![0.0], vec![1.0]), &array![0.0], 200_000, 8);
        assert!((est - 1.0).abs() <= 3.0 * se);
        assert!(est >= 0.0);
    }

    #[test]
    fn orthant_estimator_vanishing_event() {
        let p = pg(vec![0.0], vec![1.0]);
        let (est, _) = mc_ei_s_orthant(&p, &array![12.0], 100_000, 3);
        assert!(est.abs() < 1e-25, "vanishing-event estimate {est}");
        let (deep, deep_se) = mc_ei_s_orthant(&p, &array![60.0], 1000, 3);
        assert_eq!((deep, deep_se), (0.0, 0.0), "sub-representable orthant");
    }

    #[test]
    fn mc_ei_g_reduces_to_ei_at_alpha_zero() {
        let p = pg(vec![0.5], vec![2.0]);
        let inc = Incumbent::new(array![0.0], 0.3, array![0.4], 0.0);
        let (est, se) = mc_ei_g((0.7, 0.9), &p, &inc, 0.0, 400_000, 17);
        let closed = ei(0.7, 0.9, 0.3);
        assert!((est - closed).abs() <= 3.0 * se, "{est} vs {closed}");
    }

    #[test]
    fn mc_ei_g_degenerate_no_improvement() {
        let p = pg(vec![1.0], vec![0.0]);
        let inc = Incumbent::new(array![0.0], 5.0, array![0.0], 0.5);
        let (est, se) = mc_ei_g((0.0, 0.0), &p, &inc, 0.5, 1000, 1);
        assert_eq!(est, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn event_bound_degenerate_inside_event() {
        // deterministic posteriors placed exactly inside the event:
        // f drop alpha c delta / 2, gradient-norm drop exactly delta
        let alpha = 0.6;
        let spec = EventSpec { delta: 1.0, c: 0.5 };
        let f_plus = 2.0;
        let grad_plus = array![2.0f64.sqrt()]; // ||g+||^2 = 2
        let inc = Incumbent::new(array![0.0], f_plus, grad_plus, alpha);
        let p = pg(vec![1.0], vec![0.0]); // ||grad||^2 = 1 = 2 - delta
        let f_post = (f_plus - alpha * spec.c * spec.delta / 2.0, 0.0);
        let rep = event_bound_check(f_post, &p, &inc, alpha, &spec, 2000, 5);
        assert_eq!(rep.p_event, 1.0);
        assert!(rep.lhs_ei_g >= alpha * (1.0 - spec.c) * spec.delta - 1e-12);
        assert!(rep.holds);
    }

    #[test]
    fn event_bound_unreachable_delta() {
        let alpha = 0.6;
        let spec = EventSpec { delta: 1e9, c: 0.25 };
        let inc = Incumbent::new(array![0.0], 0.0, array![1.0], alpha);
        let p = pg(vec![0.0], vec![1.0]);
        let rep = event_bound_check((0.0, 1.0), &p, &inc, alpha, &spec, 10_000, 2);
        assert_eq!(rep.p_event, 0.0);
        assert_eq!(rep.rhs_bound, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn ei_gn_combinations() {
        let cfg = AcquisitionConfig {
            alpha: 0.6,
            rescale: RescaleMode::None,
            incumbent_rule: IncumbentRule::GIncumbent,
        };
        assert!((ei_gn(0.2, 0.1, &cfg, None) - 0.14).abs() < 1e-15);
        let zero = AcquisitionConfig { alpha: 0.0, ..cfg };
        let x = 0.123_456_789;
        assert_eq!(ei_gn(x, 55.0, &zero, None), x, "alpha = 0 returns EI bitwise");

        // two-candidate pool, z-scored: candidate 1 z-scores to (+1, -1) and
        // candidate 2 to (-1, +1), so the values are +-(1 + alpha)
        let zcfg = AcquisitionConfig { rescale: RescaleMode::PoolZscore, ..cfg };
        let stats = PoolStats::from_pools(&[1.0, 0.0], &[0.0, 1.0]);
        let a = ei_gn(1.0, 0.0, &zcfg, Some(&stats));
        let b = ei_gn(0.0, 1.0, &zcfg, Some(&stats));
        assert!((a - 1.6).abs() < 1e-12);
        assert!((b + 1.6).abs() < 1e-12);
        assert!(a > b, "candidate with high EI_f and low EI_s must win");
    }

    #[test]
    fn pool_zscore_invariant_to_affine_ei_f_transform() {
        let cfg = AcquisitionConfig::default();
        let ei_f = [0.3, 1.4, 0.9, 0.2];
        let ei_s = [1.0, -0.5, 0.2, 0.8];
        let stats = PoolStats::from_pools(&ei_f, &ei_s);
        let base: Vec<f64> =
            (0..4).map(|i| ei_gn(ei_f[i], ei_s[i], &cfg, Some(&stats))).collect();
        let transformed: Vec<f64> = ei_f.iter().map(|v| 7.3 * v + 11.0).collect();
        let stats_t = PoolStats::from_pools(&transformed, &ei_s);
        let after: Vec<f64> =
            (0..4).map(|i| ei_gn(transformed[i], ei_s[i], &cfg, Some(&stats_t))).collect();
        let argmax = |v: &[f64]| {
            v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        assert_eq!(argmax(&base), argmax(&after));
        for (x, y) in base.iter().zip(&after) {
            assert!((x - y).abs() < 1e-9, "z-scoring removes the affine transform");
        }
    }

    #[test]
    fn mc_estimators_deterministic_given_seed() {
        let p = pg(vec![0.1, 0.2], vec![1.0, 2.0]);
        let g = array![0.5, 0.1];
        assert_eq!(mc_ei_s(&p, &g, 5000, 7), mc_ei_s(&p, &g, 5000, 7));
        assert_ne!(mc_ei_s(&p, &g, 5000, 7).0, mc_ei_s(&p, &g, 5000, 8).0);
    }

    proptest! {
        // Positive Part Inequality: max(A-B, 0) >= max(A, 0) - max(B, 0)
        #[test]
        fn positive_part_inequality(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assert!((a - b).max(0.0) >= a.max(0.0) - b.max(0.0));
        }

        #[test]
        fn ei_monotone_in_mu_and_sigma(
            mu1 in -5.0f64..5.0,
            bump in 0.0f64..3.0,
            sigma in 0.001f64..4.0,
            best in -5.0f64..5.0,
        ) {
            prop_assert!(ei(mu1 + bump, sigma, best) >= ei(mu1, sigma, best));
            // nondecreasing in sigma when mu <= best
            let mu = best - bump;
            prop_assert!(ei(mu, sigma + 0.5, best) >= ei(mu, sigma, best) - 1e-12);
            prop_assert!(ei(mu, sigma, best) >= 0.0);
        }
    }

    #[test]
    fn thompson_single_candidate_and_determinism() {
        use crate::gp::{fit, FitConfig};
        use crate::kernel::{KernelFamily, KernelSpec};
        let x = array![[0.0], [0.5], [1.0]];
        let y = array![0.0, 1.0, 0.3];
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 0.3, 1.0).unwrap()),
            standardize_outputs: false,
            ..FitConfig::default()
        };
        let m = fit(&x, &y, &cfg).unwrap();
        let single = vec![array![0.25]];
        assert_eq!(thompson_select(&m, &single, 0).unwrap(), single[0]);

        let cands: Vec<Array1<f64>> = (0..32).map(|i| array![i as f64 / 31.0]).collect();
        let a = thompson_select(&m, &cands, 123).unwrap();
        let b = thompson_select(&m, &cands, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thompson_near_zero_variance_picks_posterior_mean_argmax() {
        use crate::gp::{fit, FitConfig};
        use crate::kernel::{KernelFamily, KernelSpec};
        // candidates sit on noiseless observations, so the joint posterior is
        // a near point mass at the mean and the argmax is forced
        let n = 8;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / (n - 1) as f64);
        let y = Array1::from_shape_fn(n, |i| {
            let t = i as f64 / (n - 1) as f64;
            -10.0 * (t - 0.3) * (t - 0.3)
        });
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 0.15, 1.0).unwrap()),
            noise: 0.0,
            standardize_outputs: false,
            ..FitConfig::default()
        };
        let m = fit(&x, &y, &cfg).unwrap();
        let cands: Vec<Array1<f64>> = (0..n).map(|i| array![i as f64 / (n - 1) as f64]).collect();
        let best = 2.0 / 7.0; // argmax of the observed parabola on the grid
        for seed in 0..5 {
            let pick = thompson_select(&m, &cands, seed).unwrap();
            assert!(
                (pick[0] - best).abs() < 1e-9,
                "seed {seed} picked {} instead of the mean argmax",
                pick[0]
            );
        }
    }
}

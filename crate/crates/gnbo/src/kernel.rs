//! Kernel functions, their hyperparameters, and hyperprior log-densities.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma, LogNormal};

use crate::error::{GnboError, Result};

pub const SQRT_5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern52,
    Rbf,
}

/// A stationary kernel `s * k(r)` with `r` the lengthscale-weighted Euclidean
/// distance. Lengthscales are per-dimension (ARD) when the vector has length
/// `d`, isotropic when it has length 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
    /// Constant prior mean `m(.)`.
    pub mean_constant: f64,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        lengthscales: Vec<f64>,
        outputscale: f64,
        mean_constant: f64,
    ) -> Result<Self> {
        let spec = KernelSpec { family, lengthscales, outputscale, mean_constant };
        spec.validate()?;
        Ok(spec)
    }

    /// Isotropic kernel with a zero prior mean.
    pub fn isotropic(family: KernelFamily, lengthscale: f64, outputscale: f64) -> Result<Self> {
        KernelSpec::new(family, vec![lengthscale], outputscale, 0.0)
    }

    /// ARD kernel with all lengthscales equal and a zero prior mean.
    pub fn ard(family: KernelFamily, dim: usize, lengthscale: f64, outputscale: f64) -> Result<Self> {
        KernelSpec::new(family, vec![lengthscale; dim], outputscale, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(GnboError::InvalidConfig("at least one lengthscale required".into()));
        }
        for &l in &self.lengthscales {
            if !(l > 0.0) || !l.is_finite() {
                return Err(GnboError::NonpositiveHyperparameter { name: "lengthscale", value: l });
            }
        }
        if !(self.outputscale > 0.0) || !self.outputscale.is_finite() {
            return Err(GnboError::NonpositiveHyperparameter {
                name: "outputscale",
                value: self.outputscale,
            });
        }
        Ok(())
    }

    /// Lengthscale applying to coordinate `k`.
    #[inline]
    pub fn lengthscale(&self, k: usize) -> f64 {
        if self.lengthscales.len() == 1 {
            self.lengthscales[0]
        } else {
            self.lengthscales[k]
        }
    }

    fn check_dims(&self, d: usize) -> Result<()> {
        if self.lengthscales.len() != 1 && self.lengthscales.len() != d {
            return Err(GnboError::DimensionMismatch { expected: d, got: self.lengthscales.len() });
        }
        Ok(())
    }

    /// Squared lengthscale-weighted distance between two points. Every
    /// kernel-evaluation path in the crate uses this exact arithmetic
    /// (`(a-b)^2 * l^-2`, summed in coordinate order) so that identical
    /// matrices built by different routes agree bitwise.
    #[inline]
    fn weighted_sqdist(&self, x1: &[f64], x2: &[f64]) -> f64 {
        if self.lengthscales.len() == 1 {
            let inv = 1.0 / (self.lengthscales[0] * self.lengthscales[0]);
            x1.iter()
                .zip(x2)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d * inv
                })
                .sum()
        } else {
            x1.iter()
                .zip(x2)
                .zip(&self.lengthscales)
                .map(|((a, b), l)| {
                    let d = a - b;
                    d * d * (1.0 / (l * l))
                })
                .sum()
        }
    }

    /// Correlation at squared weighted distance `r2` (outputscale excluded).
    #[inline]
    pub fn correlation(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Rbf => (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                // Guard the r = 0 branch: sqrt has an infinite derivative
                // there and the closed form must return exactly 1.
                if r2 == 0.0 {
                    return 1.0;
                }
                let r = r2.sqrt();
                (1.0 + SQRT_5 * r + 5.0 * r2 / 3.0) * (-SQRT_5 * r).exp()
            }
        }
    }
}

/// Hyperpriors on the kernel hyperparameters: log-normal lengthscales and a
/// shape/rate gamma on the outputscale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperpriorSpec {
    pub lengthscale_log_location: f64,
    pub lengthscale_log_scale: f64,
    pub outputscale_shape: f64,
    pub outputscale_rate: f64,
}

impl Default for HyperpriorSpec {
    fn default() -> Self {
        HyperpriorSpec {
            lengthscale_log_location: 0.4f64.ln(),
            lengthscale_log_scale: 0.7,
            outputscale_shape: 2.0,
            outputscale_rate: 0.5,
        }
    }
}

/// Kernel value `k(x1, x2)`.
pub fn eval_kernel(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(GnboError::DimensionMismatch { expected: x1.len(), got: x2.len() });
    }
    spec.validate()?;
    spec.check_dims(x1.len())?;
    Ok(spec.outputscale * spec.correlation(spec.weighted_sqdist(x1, x2)))
}

/// Kernel matrix `K = k(X, X) + noise * I` over the rows of `xs`.
pub fn eval_kernel_matrix(spec: &KernelSpec, xs: &Array2<f64>, noise: f64) -> Result<Array2<f64>> {
    let n = xs.nrows();
    spec.validate()?;
    spec.check_dims(xs.ncols())?;
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        let xi = xs.row(i);
        let xi = xi.as_slice().expect("row-major");
        k[[i, i]] = spec.outputscale + noise;
        for j in 0..i {
            let xj = xs.row(j);
            let v = spec.outputscale
                * spec.correlation(spec.weighted_sqdist(xi, xj.as_slice().expect("row-major")));
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// Sum of hyperprior log-densities over all lengthscales and the outputscale.
pub fn log_hyperprior(spec: &KernelSpec, priors: &HyperpriorSpec) -> Result<f64> {
    spec.validate()?;
    let lognormal = LogNormal::new(priors.lengthscale_log_location, priors.lengthscale_log_scale)
        .expect("valid log-normal hyperprior");
    let gamma = Gamma::new(priors.outputscale_shape, priors.outputscale_rate)
        .expect("valid gamma hyperprior");
    let mut lp = 0.0;
    for &l in &spec.lengthscales {
        lp += lognormal.ln_pdf(l);
    }
    lp += gamma.ln_pdf(spec.outputscale);
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn rbf(l: f64, s: f64) -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::Rbf, l, s).unwrap()
    }

    #[test]
    fn zero_distance_returns_outputscale() {
        let spec = rbf(0.3, 2.5);
        let x = [0.1, -0.4, 2.0];
        assert_eq!(eval_kernel(&spec, &x, &x).unwrap(), 2.5);
        let m = KernelSpec::isotropic(KernelFamily::Matern52, 0.3, 2.5).unwrap();
        assert_eq!(eval_kernel(&m, &x, &x).unwrap(), 2.5);
    }

    #[test]
    fn rbf_at_one_lengthscale_distance() {
        // exp(-r^2 / (2 l^2)) at |x1-x2| = l, frozen from direct evaluation
        let spec = rbf(0.7, 1.0);
        let v = eval_kernel(&spec, &[0.0], &[0.7]).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn matern52_at_unit_distance() {
        // (1 + sqrt5 + 5/3) exp(-sqrt5), frozen from symbolic evaluation
        let spec = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0).unwrap();
        let v = eval_kernel(&spec, &[0.0], &[1.0]).unwrap();
        assert!((v - 0.523_994_108_831_820_3).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let spec = rbf(1.0, 1.0);
        assert!(eval_kernel(&spec, &[0.0, 1.0], &[0.0]).is_err());
        let ard = KernelSpec::ard(KernelFamily::Rbf, 3, 0.5, 1.0).unwrap();
        assert!(eval_kernel(&ard, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn kernel_matrix_single_and_duplicate_points() {
        let spec = rbf(1.0, 1.7);
        let single = array![[0.3]];
        let k = eval_kernel_matrix(&spec, &single, 0.0).unwrap();
        assert_eq!(k[[0, 0]], 1.7);

        let dup = array![[0.3], [0.3]];
        let k = eval_kernel_matrix(&spec, &dup, 0.01).unwrap();
        assert_eq!(k[[0, 1]], 1.7);
        assert_eq!(k[[1, 0]], 1.7);
        assert_eq!(k[[0, 0]], 1.71);
    }

    #[test]
    fn log_hyperprior_at_lognormal_median() {
        // at x = exp(mu) the log-normal log-density is -log(x sigma sqrt(2 pi))
        let spec = rbf(0.4, 2.0);
        let priors = HyperpriorSpec::default();
        let lp = log_hyperprior(&spec, &priors).unwrap();
        let expect_ls = -(0.4 * 0.7 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let gamma = Gamma::new(2.0, 0.5).unwrap();
        assert!((lp - (expect_ls + gamma.ln_pdf(2.0))).abs() < 1e-12);
        assert!((expect_ls - 0.354_027_142_608_214_7).abs() < 1e-12);
    }

    #[test]
    fn gamma_term_is_maximized_at_the_mode() {
        // mode of Gamma(shape k, rate r) is (k - 1)/r = 2
        let priors = HyperpriorSpec::default();
        let at = |s: f64| log_hyperprior(&rbf(0.4, s), &priors).unwrap();
        let mode = at(2.0);
        for s in [0.5, 1.0, 1.9, 2.1, 3.0, 8.0] {
            assert!(at(s) <= mode + 1e-12, "outputscale {s} beats the mode");
        }
    }

    #[test]
    fn ard_prior_terms_add() {
        let priors = HyperpriorSpec::default();
        let one = KernelSpec::new(KernelFamily::Rbf, vec![0.9], 2.0, 0.0).unwrap();
        let two = KernelSpec::new(KernelFamily::Rbf, vec![0.9, 0.9], 2.0, 0.0).unwrap();
        let gamma = Gamma::new(2.0, 0.5).unwrap().ln_pdf(2.0);
        let a = log_hyperprior(&one, &priors).unwrap() - gamma;
        let b = log_hyperprior(&two, &priors).unwrap() - gamma;
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_hyperparameters_rejected() {
        assert!(KernelSpec::isotropic(KernelFamily::Rbf, 0.0, 1.0).is_err());
        assert!(KernelSpec::isotropic(KernelFamily::Rbf, 1.0, -2.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(
            vals in proptest::collection::vec(-10.0f64..10.0, 2..=8),
            l in 0.05f64..5.0,
            s in 0.1f64..10.0,
        ) {
            let d = vals.len() / 2;
            let (x1, x2) = vals.split_at(d);
            let x2 = &x2[..d];
            for family in [KernelFamily::Rbf, KernelFamily::Matern52] {
                let spec = KernelSpec::isotropic(family, l, s).unwrap();
                let a = eval_kernel(&spec, x1, x2).unwrap();
                let b = eval_kernel(&spec, x2, x1).unwrap();
                prop_assert_eq!(a, b);
                prop_assert!(a <= s + 1e-12);
            }
        }

        #[test]
        fn joint_input_and_lengthscale_scaling_is_invariant(
            x1 in proptest::collection::vec(-3.0f64..3.0, 3),
            x2 in proptest::collection::vec(-3.0f64..3.0, 3),
            scale in 0.1f64..10.0,
        ) {
            let base = KernelSpec::new(KernelFamily::Matern52, vec![0.4, 1.3, 0.8], 1.0, 0.0).unwrap();
            let scaled = KernelSpec::new(
                KernelFamily::Matern52,
                base.lengthscales.iter().map(|l| l * scale).collect(),
                1.0,
                0.0,
            ).unwrap();
            let sx1: Vec<f64> = x1.iter().map(|v| v * scale).collect();
            let sx2: Vec<f64> = x2.iter().map(|v| v * scale).collect();
            let a = eval_kernel(&base, &x1, &x2).unwrap();
            let b = eval_kernel(&scaled, &sx1, &sx2).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_matrices_factorize_on_random_point_sets() {
        use crate::linalg::adaptive_cholesky;
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..100 {
            let d = 1 + (trial % 14);
            let n = 2 + rng.random_range(0..59usize);
            let xs = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
            let spec = KernelSpec::ard(KernelFamily::Matern52, d, 0.2 + rng.random::<f64>(), 1.0)
                .unwrap();
            let k = eval_kernel_matrix(&spec, &xs, 1e-6).unwrap();
            adaptive_cholesky(&k, 1e-9, 1e-2).expect("positive definite up to jitter");
        }
    }
}

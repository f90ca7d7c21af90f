//! Independent GP surrogates over partial-derivative observations.
//!
//! One GP per coordinate of the observed gradient, each with its own
//! hyperparameters and its own output standardization, all trained on the
//! same input set. The posterior gradient covariance is diagonal by
//! construction, which is what makes the downstream stationarity term
//! separable.

use ndarray::{Array1, Array2};

use crate::error::{GnboError, Result};
use crate::gp::{fit, FitConfig, GPModel};

#[derive(Debug, Clone)]
pub struct GradientSurrogate {
    models: Vec<GPModel>,
}

/// Posterior gradient mean and the diagonal of its covariance, in original
/// gradient units.
#[derive(Debug, Clone)]
pub struct PosteriorGradient {
    pub mean: Array1<f64>,
    pub var_diag: Array1<f64>,
}

impl GradientSurrogate {
    /// Assemble from already-fitted per-coordinate models (the BO loop fits
    /// them itself to thread warm starts through).
    pub fn from_models(models: Vec<GPModel>) -> Self {
        GradientSurrogate { models }
    }

    pub fn dim(&self) -> usize {
        self.models.len()
    }

    pub fn models(&self) -> &[GPModel] {
        &self.models
    }
}

/// Fit one GP per gradient coordinate. Every coordinate shares the fit
/// configuration (including the seed, so duplicated columns produce
/// bitwise-identical models) but optimizes its own hyperparameters.
pub fn fit_gradient_models(
    x: &Array2<f64>,
    grad_y: &Array2<f64>,
    cfg: &FitConfig,
) -> Result<GradientSurrogate> {
    if grad_y.nrows() != x.nrows() {
        return Err(GnboError::DimensionMismatch { expected: x.nrows(), got: grad_y.nrows() });
    }
    let d = grad_y.ncols();
    let mut models = Vec::with_capacity(d);
    for coord in 0..d {
        let col = grad_y.column(coord).to_owned();
        let model = fit(x, &col, cfg)
            .map_err(|e| GnboError::GradientFit { dim: coord, source: Box::new(e) })?;
        models.push(model);
    }
    Ok(GradientSurrogate { models })
}

/// Posterior gradient at `x`; coordinate `i` comes from model `i` alone.
pub fn posterior_gradient(s: &GradientSurrogate, x: &[f64]) -> PosteriorGradient {
    let d = s.models.len();
    let mut mean = Array1::zeros(d);
    let mut var_diag = Array1::zeros(d);
    for (i, m) in s.models.iter().enumerate() {
        let (mu, var) = m.posterior(x);
        mean[i] = mu;
        var_diag[i] = var.max(0.0);
    }
    PosteriorGradient { mean, var_diag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, KernelSpec};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fixed_cfg() -> FitConfig {
        FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 0.3, 1.0).unwrap()),
            noise: 0.0,
            standardize_outputs: false,
            ..FitConfig::default()
        }
    }

    #[test]
    fn one_dimensional_case_reduces_to_a_single_fit() {
        let x = array![[0.1], [0.5], [0.9]];
        let g = array![[1.0], [0.2], [-0.7]];
        let cfg = FitConfig { seed: 3, ..FitConfig::default() };
        let surr = fit_gradient_models(&x, &g, &cfg).unwrap();
        let direct = fit(&x, &g.column(0).to_owned(), &cfg).unwrap();
        for probe in [[0.3], [0.77]] {
            let pg = posterior_gradient(&surr, &probe);
            let (mu, var) = direct.posterior(&probe);
            assert_eq!(pg.mean[0], mu);
            assert_eq!(pg.var_diag[0], var.max(0.0));
        }
    }

    #[test]
    fn permuting_columns_permutes_the_posteriors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((8, 2), |_| rng.random::<f64>());
        let g = Array2::from_shape_fn((8, 3), |_| rng.random::<f64>() - 0.5);
        let mut swapped = g.clone();
        for r in 0..8 {
            swapped[[r, 0]] = g[[r, 2]];
            swapped[[r, 2]] = g[[r, 0]];
        }
        let cfg = FitConfig { seed: 11, restarts: 2, max_iters: 25, ..FitConfig::default() };
        let a = fit_gradient_models(&x, &g, &cfg).unwrap();
        let b = fit_gradient_models(&x, &swapped, &cfg).unwrap();
        let probe = [0.4, 0.6];
        let pa = posterior_gradient(&a, &probe);
        let pb = posterior_gradient(&b, &probe);
        assert_eq!(pa.mean[0], pb.mean[2]);
        assert_eq!(pa.mean[2], pb.mean[0]);
        assert_eq!(pa.mean[1], pb.mean[1]);
    }

    #[test]
    fn constant_gradient_column_interpolates_the_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_fn((10, 2), |_| rng.random::<f64>());
        let c = 3.7;
        let g = Array2::from_elem((10, 1), c);
        // constant columns need learned hyperparameters to notice flatness
        let cfg = FitConfig { seed: 4, restarts: 2, max_iters: 30, ..FitConfig::default() };
        let surr = fit_gradient_models(&x, &g, &cfg).unwrap();
        for _ in 0..5 {
            let probe = [rng.random::<f64>(), rng.random::<f64>()];
            let pg = posterior_gradient(&surr, &probe);
            assert!((pg.mean[0] - c).abs() < 1e-5, "constant not recovered: {}", pg.mean[0]);
        }
    }

    #[test]
    fn interpolation_and_prior_reversion_per_coordinate() {
        let x = array![[0.1, 0.2], [0.6, 0.4], [0.3, 0.9]];
        let g = array![[1.0, -0.3], [0.5, 0.1], [-0.2, 0.8]];
        let surr = fit_gradient_models(&x, &g, &fixed_cfg()).unwrap();
        for r in 0..3 {
            let row = [x[[r, 0]], x[[r, 1]]];
            let pg = posterior_gradient(&surr, &row);
            for c in 0..2 {
                assert!((pg.mean[c] - g[[r, c]]).abs() < 1e-5);
                assert!(pg.var_diag[c] <= 1e-8);
            }
        }
        let far = posterior_gradient(&surr, &[40.0, -40.0]);
        for c in 0..2 {
            assert!(far.mean[c].abs() < 1e-8);
            assert!((far.var_diag[c] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_columns_give_identical_posteriors() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((9, 3), |_| rng.random::<f64>());
        let col = Array1::from_shape_fn(9, |i| (5.0 * x[[i, 0]]).sin());
        let mut g = Array2::zeros((9, 3));
        for c in 0..3 {
            g.column_mut(c).assign(&col);
        }
        let cfg = FitConfig { seed: 17, restarts: 2, max_iters: 25, ..FitConfig::default() };
        let surr = fit_gradient_models(&x, &g, &cfg).unwrap();
        let pg = posterior_gradient(&surr, &[0.5, 0.5, 0.5]);
        for c in 1..3 {
            assert!((pg.mean[c] - pg.mean[0]).abs() < 1e-10);
            assert!((pg.var_diag[c] - pg.var_diag[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn failed_coordinate_reports_its_index() {
        let x = array![[0.0], [0.0]]; // duplicated rows, zero noise, no jitter headroom
        let g = array![[1.0, 1.0], [2.0, -1.0]];
        let cfg = FitConfig {
            fixed_hyperparams: Some(KernelSpec::isotropic(KernelFamily::Rbf, 0.3, 1.0).unwrap()),
            noise: 0.0,
            base_jitter: 1e-18,
            max_jitter: 1e-18,
            standardize_outputs: false,
            ..FitConfig::default()
        };
        let err = fit_gradient_models(&x, &g, &cfg).unwrap_err();
        match err {
            GnboError::GradientFit { dim, .. } => assert_eq!(dim, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }
}

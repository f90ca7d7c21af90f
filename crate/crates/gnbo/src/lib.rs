//! Bayesian optimization with a gradient-norm-penalized acquisition.
//!
//! The library implements expected improvement on the auxiliary objective
//! `g(x) = f(x) - alpha * ||grad f(x)||^2`, evaluated through a closed-form
//! mean-field approximation of the stationarity term (the EI-GN acquisition),
//! together with everything needed to run it end to end:
//!
//! - [`kernel`]: Matérn-5/2 and RBF kernels with ARD lengthscales and
//!   hyperprior log-densities.
//! - [`gp`]: exact GP regression with MAP hyperparameter fitting,
//!   adaptive-jitter Cholesky factorization, and input/output standardization.
//! - [`gradient`]: d independent GP surrogates over partial derivatives.
//! - [`acquisition`]: EI, LogEI, the closed-form stationarity term, EI-GN,
//!   Thompson sampling, and Monte Carlo oracles that validate the closed form.
//! - [`acqopt`]: inner-loop acquisition maximization (scrambled-Sobol raw
//!   pool, Boltzmann restart selection, projected quasi-Newton refinement).
//! - [`objectives`]: synthetic benchmarks with analytic gradients and
//!   GP-sample objective generators.
//! - [`harness`]: the BO loop, multi-seed suite driver, and result emission.
//!
//! All randomized components are seeded and deterministic; a run is fully
//! reproducible from its configuration.

pub mod acqopt;
pub mod acquisition;
pub mod data;
pub mod domain;
pub mod emit;
pub mod error;
pub mod gp;
pub mod gradient;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod normal;
pub mod objectives;
pub mod optim;
pub mod rng;
pub mod sobol;
pub mod validate;

pub use error::{GnboError, Result};

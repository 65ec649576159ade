//! Periodic activation functions in single-hidden-layer Bayesian neural
//! networks and the stationary Gaussian-process kernels they induce.

pub mod activations;
pub mod bnn;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod mc_kernel;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use activations::{activate, activate_grad, ActivationKind};
pub use error::{Error, Result};
pub use kernels::{gram, kernel_eval, KernelFamily, KernelSpec};
pub use spectral::{
    matern_spectral_density, prior_for_kernel, prior_log_pdf, prior_sample,
    wiener_khinchin_numeric, PriorFamily, WeightPrior,
};

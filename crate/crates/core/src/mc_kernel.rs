//! Monte-Carlo estimates of the infinite-width covariance
//! `κ(x, x') = E_{w,b}[σ(wᵀx + b)·σ(wᵀx' + b)]` and the error harnesses
//! comparing them with closed-form kernels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::activations::{activate, ActivationKind};
use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::rng;
use crate::spectral::{prior_for_kernel, wiener_khinchin_numeric, PriorFamily, WeightPrior};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub activation: ActivationKind,
    pub prior: WeightPrior,
    pub hidden_units: usize,
    pub seed: u64,
    pub input_dim: usize,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.activation.is_periodic() {
            return Err(Error::Unsupported(format!(
                "Monte-Carlo kernels need a periodic activation, got `{}`",
                self.activation
            )));
        }
        if self.hidden_units == 0 {
            return Err(Error::InvalidParameter("hidden_units must be at least 1".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be at least 1".into()));
        }
        self.prior.validate()
    }
}

/// One random hidden layer: `hidden_units × input_dim` weights and biases.
#[derive(Debug, Clone)]
pub struct RandomLayer {
    pub weights: DMatrix<f64>,
    pub biases: Vec<f64>,
    pub activation: ActivationKind,
}

impl RandomLayer {
    /// Weights are drawn coordinatewise from the prior, then biases from
    /// Uniform(−π, π) unless the activation is bias-free.
    pub fn draw(cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::seeded(cfg.seed);
        let (k, d) = (cfg.hidden_units, cfg.input_dim);
        let mut weights = DMatrix::zeros(k, d);
        for i in 0..k {
            for j in 0..d {
                weights[(i, j)] = cfg.prior.draw(&mut rng);
            }
        }
        let biases = if cfg.activation.uses_bias() {
            (0..k).map(|_| rng.random_range(-PI..PI)).collect()
        } else {
            vec![0.0; k]
        };
        Ok(Self {
            weights,
            biases,
            activation: cfg.activation,
        })
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .row_iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let z: f64 = w.iter().zip(x).map(|(a, c)| a * c).sum();
                activate(self.activation, z + b)
            })
            .collect()
    }
}

fn check_dim(cfg: &McConfig, len: usize) -> Result<()> {
    if len != cfg.input_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim,
            got: len,
        });
    }
    Ok(())
}

fn feature_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / a.len() as f64
}

/// `κ̂(x, x') = (1/K)·Σ_k σ(w_kᵀx + b_k)·σ(w_kᵀx' + b_k)`.
pub fn mc_kernel_estimate(cfg: &McConfig, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    cfg.validate()?;
    check_dim(cfg, x.len())?;
    check_dim(cfg, x_prime.len())?;
    let layer = RandomLayer::draw(cfg)?;
    Ok(feature_dot(&layer.features(x), &layer.features(x_prime)))
}

/// `(1/K)·ΦΦᵀ` for one shared network draw; rows of `xs` are points.
pub fn mc_gram(cfg: &McConfig, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    check_dim(cfg, xs.ncols())?;
    let layer = RandomLayer::draw(cfg)?;
    let phi: Vec<Vec<f64>> = xs
        .row_iter()
        .map(|r| layer.features(&r.iter().copied().collect::<Vec<_>>()))
        .collect();
    let n = phi.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = feature_dot(&phi[i], &phi[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `Σ_{k<terms} (2k+1)^−4`, the harmonic weight mass of the triangle-type
/// kernels truncated to `terms` components.
pub fn harmonic_mass(terms: usize) -> f64 {
    (0..terms).map(|k| ((2 * k + 1) as f64).powi(-4)).sum()
}

/// Factor that maps the MC kernel of `kind` to unit variance at `r = 0`.
///
/// Triangle-type activations carry every odd harmonic, so their kernel is
/// `Σ λ_k^−4·κ(λ_k r)` with total mass `π⁴/96` instead of 1.
pub fn kernel_normalizer(kind: ActivationKind) -> f64 {
    match kind {
        ActivationKind::Triangle | ActivationKind::PeriodicReLU => PI.powi(4) / 96.0,
        _ => 1.0,
    }
}

fn check_dual(prior: &WeightPrior, kernel: &KernelSpec) -> Result<()> {
    let dual = prior_for_kernel(kernel)?;
    let same_family = match (dual.family, prior.family) {
        (a, b) if a == b => true,
        (PriorFamily::StudentT { dof }, PriorFamily::Cauchy)
        | (PriorFamily::Cauchy, PriorFamily::StudentT { dof }) => dof == 1.0,
        _ => false,
    };
    if !same_family || (dual.scale - prior.scale).abs() > 1e-12 * dual.scale {
        return Err(Error::InvalidParameter(format!(
            "prior {prior:?} is not the spectral dual of kernel {kernel:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden_units: usize,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub mae_median: f64,
    /// Per-repeat mean absolute errors.
    pub maes: Vec<f64>,
}

/// Mean absolute error between MC and closed-form Gram matrices on a 1D
/// grid, for each hidden-unit count, over `repeats` independent networks.
///
/// Repeat `i` uses seed `seed + i`. Triangle-type estimates are normalised
/// by [`kernel_normalizer`] before comparison.
pub fn convergence_sweep(
    activation: ActivationKind,
    prior: &WeightPrior,
    kernel: &KernelSpec,
    hidden_units: &[usize],
    grid: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if hidden_units.is_empty() || grid.is_empty() {
        return Err(Error::InvalidParameter("sweep needs non-empty K list and grid".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    check_dual(prior, kernel)?;
    let xs = crate::kernels::column(grid);
    let exact = gram(kernel, &xs, &xs)?;
    let norm = kernel_normalizer(activation);
    let jobs: Vec<(usize, usize)> = hidden_units
        .iter()
        .flat_map(|&k| (0..repeats).map(move |r| (k, r)))
        .collect();
    let maes: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, rep)| {
            let cfg = McConfig {
                activation,
                prior: *prior,
                hidden_units: k,
                seed: seed.wrapping_add(rep as u64),
                input_dim: 1,
            };
            let g = mc_gram(&cfg, &xs)?;
            let total: f64 = g.iter().zip(exact.iter()).map(|(a, b)| (a / norm - b).abs()).sum();
            Ok(total / g.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(hidden_units
        .iter()
        .zip(maes.chunks(repeats))
        .map(|(&k, chunk)| {
            let mean = chunk.iter().sum::<f64>() / repeats as f64;
            let var = if repeats > 1 {
                chunk.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64
            } else {
                0.0
            };
            SweepRow {
                hidden_units: k,
                mae_mean: mean,
                mae_std: var.sqrt(),
                mae_median: median(chunk),
                maes: chunk.to_vec(),
            }
        })
        .collect())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRow {
    pub r: f64,
    pub first_component: f64,
    pub truncated_mixture: f64,
    pub abs_diff: f64,
}

/// Compares the first component of the triangle-wave kernel mixture
/// `Σ λ_k^−4·κ(λ_k r) / Σ λ_k^−4` (λ_k = 2k+1) with its `terms`-term
/// truncation, evaluating `κ` by numerical quadrature of the prior.
pub fn triangle_truncation_error(
    prior: &WeightPrior,
    r_grid: &[f64],
    terms: usize,
) -> Result<Vec<TruncationRow>> {
    prior.validate()?;
    if terms == 0 {
        return Err(Error::InvalidParameter("terms must be at least 1".into()));
    }
    let mass = harmonic_mass(terms);
    r_grid
        .par_iter()
        .map(|&r| {
            let first = wiener_khinchin_numeric(prior, r)?;
            let mut mixture = first;
            for k in 1..terms {
                let lambda = (2 * k + 1) as f64;
                mixture += lambda.powi(-4) * wiener_khinchin_numeric(prior, lambda * r)?;
            }
            let mixture = mixture / mass;
            Ok(TruncationRow {
                r,
                first_component: first,
                truncated_mixture: mixture,
                abs_diff: (first - mixture).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyRow {
    pub r: f64,
    pub kappa_mc: f64,
    pub kappa_closed: f64,
    pub abs_err: f64,
}

/// Normalised MC kernel `κ̂(0, r)` against the closed form at each lag.
pub fn mc_verify(cfg: &McConfig, kernel: &KernelSpec, lags: &[f64]) -> Result<Vec<VerifyRow>> {
    if cfg.input_dim != 1 {
        return Err(Error::InvalidParameter("mc-verify works on 1D inputs".into()));
    }
    if !kernel.is_stationary() {
        return Err(Error::Unsupported("mc-verify needs a stationary kernel".into()));
    }
    let layer = RandomLayer::draw(cfg)?;
    let origin = layer.features(&[0.0]);
    let norm = kernel_normalizer(cfg.activation);
    Ok(lags
        .iter()
        .map(|&r| {
            let kappa_mc = feature_dot(&origin, &layer.features(&[r])) / norm;
            let kappa_closed = kernel.eval_distance(r.abs());
            VerifyRow {
                r,
                kappa_mc,
                kappa_closed,
                abs_err: (kappa_mc - kappa_closed).abs(),
            }
        })
        .collect())
}

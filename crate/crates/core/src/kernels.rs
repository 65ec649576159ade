//! Closed-form covariance functions and Gram matrices.
//!
//! Stationary families (Matérn with half-integer smoothness, RBF, Exponential)
//! depend only on `‖x − x'‖`. The locally stationary Matérn multiplies a
//! Matérn kernel by a Gaussian envelope centred at the origin. ArcCos and the
//! sigmoid (erf) network kernel are the non-stationary baselines.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Jitter, relative to the kernel variance, used when checking that a Gram
/// matrix is positive semi-definite.
pub const PSD_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Matérn with smoothness `nu` ∈ {1/2, 3/2, 5/2, 7/2}.
    Matern { nu: f64 },
    Rbf,
    /// Identical to `Matern { nu: 0.5 }`.
    Exponential,
    /// Arc-cosine kernel of order 0 (step) or 1 (ReLU).
    ArcCos { order: u8 },
    /// Infinite-width erf network kernel.
    SigmoidNn { sigma0: f64, sigma: f64 },
    /// Matérn kernel with a Gaussian decay envelope of width `sigma_m`.
    LocallyStationaryMatern { nu: f64, sigma_m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Ignored by `ArcCos` and `SigmoidNn`.
    pub lengthscale: f64,
    pub variance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64, variance: f64) -> Result<Self> {
        let spec = Self {
            family,
            lengthscale,
            variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern(nu: f64, lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern { nu }, lengthscale, variance)
    }

    pub fn rbf(lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, lengthscale, variance)
    }

    pub fn exponential(lengthscale: f64, variance: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, lengthscale, variance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive and finite, got {}",
                self.variance
            )));
        }
        let needs_lengthscale = !matches!(
            self.family,
            KernelFamily::ArcCos { .. } | KernelFamily::SigmoidNn { .. }
        );
        if needs_lengthscale && !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale must be positive and finite, got {}",
                self.lengthscale
            )));
        }
        match self.family {
            KernelFamily::Matern { nu } => {
                matern_order(nu)?;
            }
            KernelFamily::LocallyStationaryMatern { nu, sigma_m } => {
                matern_order(nu)?;
                if !(sigma_m > 0.0 && sigma_m.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "sigma_m must be positive, got {sigma_m}"
                    )));
                }
            }
            KernelFamily::ArcCos { order } if order > 1 => {
                return Err(Error::Unsupported(format!("arc-cosine order {order}")));
            }
            KernelFamily::SigmoidNn { sigma0, sigma } => {
                if !(sigma0 > 0.0 && sigma > 0.0 && sigma0.is_finite() && sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "sigmoid kernel scales must be positive, got sigma0={sigma0}, sigma={sigma}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// True for families whose value depends only on `x − x'`.
    pub fn is_stationary(&self) -> bool {
        matches!(
            self.family,
            KernelFamily::Matern { .. } | KernelFamily::Rbf | KernelFamily::Exponential
        )
    }

    /// Evaluate a stationary family at distance `r ≥ 0`.
    ///
    /// Panics if the family is not stationary.
    pub fn eval_distance(&self, r: f64) -> f64 {
        let scaled = r / self.lengthscale;
        let unit = match self.family {
            KernelFamily::Matern { nu } => {
                matern_unit(matern_order(nu).expect("validated smoothness"), scaled)
            }
            KernelFamily::Exponential => (-scaled).exp(),
            KernelFamily::Rbf => (-0.5 * scaled * scaled).exp(),
            _ => panic!("eval_distance called on a non-stationary kernel"),
        };
        self.variance * unit
    }

    // Assumes a validated spec and equal-length inputs.
    fn eval_unchecked(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Matern { .. } | KernelFamily::Rbf | KernelFamily::Exponential => {
                self.eval_distance(distance(x, x_prime))
            }
            KernelFamily::LocallyStationaryMatern { nu, sigma_m } => {
                let p = matern_order(nu).expect("validated smoothness");
                let base = matern_unit(p, distance(x, x_prime) / self.lengthscale);
                let envelope =
                    (-(dot(x, x) + dot(x_prime, x_prime)) / (2.0 * sigma_m * sigma_m)).exp();
                self.variance * base * envelope
            }
            KernelFamily::ArcCos { order } => self.variance * arccos(order, x, x_prime),
            KernelFamily::SigmoidNn { sigma0, sigma } => {
                self.variance * erf_network(sigma0, sigma, x, x_prime)
            }
        }
    }
}

/// Maps a half-integer smoothness to `p` with `nu = p + 1/2`.
fn matern_order(nu: f64) -> Result<u32> {
    for (p, supported) in [0.5, 1.5, 2.5, 3.5].into_iter().enumerate() {
        if nu == supported {
            return Ok(p as u32);
        }
    }
    Err(Error::Unsupported(format!(
        "Matérn smoothness nu={nu}; supported values are 0.5, 1.5, 2.5, 3.5"
    )))
}

/// Unit-variance half-integer Matérn at scaled distance `r/ℓ`.
///
/// Uses `exp(−a)·p!/(2p)!·Σᵢ (p+i)!/(i!(p−i)!)·(2a)^(p−i)` with `a = √(2ν)·r/ℓ`.
fn matern_unit(p: u32, scaled: f64) -> f64 {
    let nu = p as f64 + 0.5;
    let a = (2.0 * nu).sqrt() * scaled;
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut poly = 0.0;
    for i in 0..=p {
        let coef = fact(p + i) / (fact(i) * fact(p - i));
        poly += coef * (2.0 * a).powi((p - i) as i32);
    }
    (-a).exp() * poly * fact(p) / fact(2 * p)
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn arccos(order: u8, x: &[f64], y: &[f64]) -> f64 {
    // Bias-augmented inputs (1, x).
    let nx = (1.0 + dot(x, x)).sqrt();
    let ny = (1.0 + dot(y, y)).sqrt();
    // Angle between the unit vectors via half-angle atan2; acos of the
    // clamped cosine loses half the digits near theta = 0.
    let (mut diff, mut sum) = ((1.0 / nx - 1.0 / ny).powi(2), (1.0 / nx + 1.0 / ny).powi(2));
    for (a, b) in x.iter().zip(y) {
        let (ua, ub) = (a / nx, b / ny);
        diff += (ua - ub) * (ua - ub);
        sum += (ua + ub) * (ua + ub);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    match order {
        0 => (PI - theta) / PI,
        _ => nx * ny * (theta.sin() + (PI - theta) * theta.cos()) / PI,
    }
}

fn erf_network(sigma0: f64, sigma: f64, x: &[f64], y: &[f64]) -> f64 {
    let s0 = sigma0 * sigma0;
    let s = sigma * sigma;
    let quad = |a: &[f64], b: &[f64]| s0 + s * dot(a, b);
    let num = 2.0 * quad(x, y);
    let den = ((1.0 + 2.0 * quad(x, x)) * (1.0 + 2.0 * quad(y, y))).sqrt();
    2.0 / PI * (num / den).clamp(-1.0, 1.0).asin()
}

fn check_point(x: &[f64], what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} has dimension 0")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} contains a non-finite coordinate")));
    }
    Ok(())
}

/// Evaluate `κ(x, x')`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_point(x, "x")?;
    check_point(x_prime, "x'")?;
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_prime.len(),
        });
    }
    Ok(spec.eval_unchecked(x, x_prime))
}

/// Gram matrix `G[i][j] = κ(X[i], X'[j])`; rows of the matrices are points.
pub fn gram(spec: &KernelSpec, xs: &DMatrix<f64>, xs_prime: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if xs.ncols() != xs_prime.ncols() {
        return Err(Error::DimensionMismatch {
            expected: xs.ncols(),
            got: xs_prime.ncols(),
        });
    }
    if xs.ncols() == 0 {
        return Err(Error::InvalidParameter("inputs have dimension 0".into()));
    }
    if xs.iter().chain(xs_prime.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram inputs contain a non-finite value".into()));
    }
    let left = rows(xs);
    let right = rows(xs_prime);
    let values: Vec<Vec<f64>> = left
        .par_iter()
        .map(|a| right.iter().map(|b| spec.eval_unchecked(a, b)).collect())
        .collect();
    Ok(DMatrix::from_fn(left.len(), right.len(), |i, j| values[i][j]))
}

/// Rows of a matrix as owned vectors.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A column matrix from 1D points.
pub fn column(points: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(points.len(), 1, points)
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

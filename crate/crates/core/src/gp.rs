//! Exact Gaussian-process regression with a Gaussian likelihood.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};

/// Jitter ladder tried, in order, when `K + σ²I` fails to factorize.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub kernel: KernelSpec,
    pub train_x: DMatrix<f64>,
    pub train_y: DVector<f64>,
    pub noise_var: f64,
    /// Extra diagonal added to make the factorization succeed (0 if none).
    pub jitter: f64,
    chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
    pub log_marginal_likelihood: f64,
}

impl GpPosterior {
    /// Lower-triangular factor of `K + (noise_var + jitter)·I`.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

pub fn gp_fit(kernel: &KernelSpec, xs: &DMatrix<f64>, ys: &DVector<f64>, noise_var: f64) -> Result<GpPosterior> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {noise_var}")));
    }
    let n = xs.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("GP fit needs at least one training point".into()));
    }
    if ys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ys.len() });
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets".into()));
    }
    let k = gram(kernel, xs, xs)?;
    let mut jitter = 0.0;
    let mut factor = Cholesky::new(&k + DMatrix::identity(n, n) * noise_var);
    for j in JITTER_LADDER {
        if factor.is_some() {
            break;
        }
        jitter = j * kernel.variance;
        factor = Cholesky::new(&k + DMatrix::identity(n, n) * (noise_var + jitter));
    }
    let chol = factor.ok_or(Error::Cholesky { jitter })?;
    let alpha = chol.solve(ys);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * ys.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * PI).ln();
    Ok(GpPosterior {
        kernel: *kernel,
        train_x: xs.clone(),
        train_y: ys.clone(),
        noise_var,
        jitter,
        chol,
        alpha,
        log_marginal_likelihood: lml,
    })
}

/// Latent predictive mean and variance at the rows of `xs_star`.
pub fn gp_predict(post: &GpPosterior, xs_star: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if xs_star.ncols() != post.train_x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: post.train_x.ncols(),
            got: xs_star.ncols(),
        });
    }
    let k_star = gram(&post.kernel, &post.train_x, xs_star)?; // n × m
    let mean = k_star.tr_mul(&post.alpha);
    let mut v = k_star;
    post.chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let prior = prior_variance(&post.kernel, xs_star)?;
    let var = DVector::from_iterator(
        xs_star.nrows(),
        v.column_iter()
            .zip(prior.iter())
            .map(|(col, p)| (p - col.norm_squared()).max(0.0)),
    );
    Ok((mean, var))
}

/// `κ(x*, x*)` at each row.
pub fn prior_variance(kernel: &KernelSpec, xs: &DMatrix<f64>) -> Result<DVector<f64>> {
    kernel.validate()?;
    xs.row_iter()
        .map(|r| {
            let x: Vec<f64> = r.iter().copied().collect();
            crate::kernels::kernel_eval(kernel, &x, &x)
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

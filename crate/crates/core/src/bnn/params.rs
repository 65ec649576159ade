use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activations::{activate, ActivationKind};
use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::WeightPrior;

/// Parameters of a single-hidden-layer network
/// `f(x) = V·σ(W x/ℓ + b)/√K + v0` with `b = 2π·sigmoid(b̂) − π`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnParams {
    /// `K × d` hidden weights, expressed at unit lengthscale.
    pub weights: DMatrix<f64>,
    /// Unconstrained biases `b̂`.
    pub bias_raw: DVector<f64>,
    /// `c × K` readout weights; the effective readout is `V/√K`.
    pub readout: DMatrix<f64>,
    pub readout_bias: DVector<f64>,
    pub log_lengthscale: f64,
    /// Log of the measurement-noise standard deviation (regression only).
    pub log_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamShape {
    pub hidden_units: usize,
    pub input_dim: usize,
    pub outputs: usize,
}

impl ParamShape {
    pub fn len(&self) -> usize {
        let (k, d, c) = (self.hidden_units, self.input_dim, self.outputs);
        k * d + k + c * k + c + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `b = 2π·sigmoid(b̂) − π`, always inside (−π, π).
pub fn bias_link(raw: f64) -> f64 {
    2.0 * PI * sigmoid(raw) - PI
}

pub fn bias_link_inverse(b: f64) -> f64 {
    let u = (b + PI) / (2.0 * PI);
    (u / (1.0 - u)).ln()
}

impl BnnParams {
    pub fn zeros(shape: ParamShape) -> Self {
        let ParamShape {
            hidden_units: k,
            input_dim: d,
            outputs: c,
        } = shape;
        Self {
            weights: DMatrix::zeros(k, d),
            bias_raw: DVector::zeros(k),
            readout: DMatrix::zeros(c, k),
            readout_bias: DVector::zeros(c),
            log_lengthscale: 0.0,
            log_noise: 0.0,
        }
    }

    pub fn shape(&self) -> ParamShape {
        ParamShape {
            hidden_units: self.weights.nrows(),
            input_dim: self.weights.ncols(),
            outputs: self.readout.nrows(),
        }
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn noise_std(&self) -> f64 {
        self.log_noise.exp()
    }

    /// Constrained biases in (−π, π).
    pub fn biases(&self) -> DVector<f64> {
        self.bias_raw.map(bias_link)
    }

    /// `V/√K`, the output-layer weights as they act on the hidden features.
    pub fn effective_readout(&self) -> DMatrix<f64> {
        &self.readout / (self.weights.nrows() as f64).sqrt()
    }

    /// Flattened in the order W (row-major), b̂, V (row-major), v0, log ℓ, log s.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape().len());
        out.extend(self.weights.transpose().iter());
        out.extend(self.bias_raw.iter());
        out.extend(self.readout.transpose().iter());
        out.extend(self.readout_bias.iter());
        out.push(self.log_lengthscale);
        out.push(self.log_noise);
        out
    }

    pub fn from_slice(shape: ParamShape, values: &[f64]) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: values.len(),
            });
        }
        let ParamShape {
            hidden_units: k,
            input_dim: d,
            outputs: c,
        } = shape;
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &values[at..at + n];
            at += n;
            s
        };
        let weights = DMatrix::from_row_slice(k, d, take(k * d));
        let bias_raw = DVector::from_column_slice(take(k));
        let readout = DMatrix::from_row_slice(c, k, take(c * k));
        let readout_bias = DVector::from_column_slice(take(c));
        let tail = take(2);
        Ok(Self {
            weights,
            bias_raw,
            readout,
            readout_bias,
            log_lengthscale: tail[0],
            log_noise: tail[1],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Initial values for the scalar hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub lengthscale: f64,
    pub noise_std: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            lengthscale: 1.0,
            noise_std: 1.0,
        }
    }
}

/// Draw parameters from the model priors.
///
/// `W` comes from the weight prior, `b` is uniform on (−π, π) and mapped back
/// through the link, `V` is standard normal (so the effective
/// readout `V/√K` is `N(0, 1/K)`). The output bias starts at zero so the
/// prior output covariance is exactly the kernel.
pub fn bnn_init(
    seed: u64,
    input_dim: usize,
    hidden_units: usize,
    outputs: usize,
    prior: &WeightPrior,
    options: InitOptions,
) -> Result<BnnParams> {
    prior.validate()?;
    if hidden_units == 0 || input_dim == 0 || outputs == 0 {
        return Err(Error::InvalidParameter(
            "hidden units, input dimension and outputs must all be at least 1".into(),
        ));
    }
    if !(options.lengthscale > 0.0 && options.noise_std > 0.0) {
        return Err(Error::InvalidParameter("initial lengthscale and noise must be positive".into()));
    }
    let mut rng = rng::seeded(seed);
    let (k, d, c) = (hidden_units, input_dim, outputs);
    let weights = DMatrix::from_fn(k, d, |_, _| prior.draw(&mut rng));
    let bias_raw = DVector::from_fn(k, |_, _| {
        // Open interval keeps the inverse link finite.
        let b = loop {
            let b: f64 = rng.random_range(-PI..PI);
            if b > -PI {
                break b;
            }
        };
        bias_link_inverse(b)
    });
    let readout = DMatrix::from_fn(c, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let readout_bias = DVector::zeros(c);
    Ok(BnnParams {
        weights,
        bias_raw,
        readout,
        readout_bias,
        log_lengthscale: options.lengthscale.ln(),
        log_noise: options.noise_std.ln(),
    })
}

/// Hidden pre-activations `W x/ℓ + b` for each row of `xs` (n × K).
pub(crate) fn pre_activations(params: &BnnParams, xs: &DMatrix<f64>) -> DMatrix<f64> {
    let inv_ell = 1.0 / params.lengthscale();
    let biases = params.biases();
    let mut z = xs * params.weights.transpose() * inv_ell;
    for mut row in z.row_iter_mut() {
        row += biases.transpose();
    }
    z
}

/// Network outputs (n × c) for the rows of `xs`.
pub fn bnn_forward(params: &BnnParams, activation: ActivationKind, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let shape = params.shape();
    if xs.ncols() != shape.input_dim {
        return Err(Error::DimensionMismatch {
            expected: shape.input_dim,
            got: xs.ncols(),
        });
    }
    let hidden = pre_activations(params, xs).map(|z| activate(activation, z));
    let mut out = hidden * params.effective_readout().transpose();
    for mut row in out.row_iter_mut() {
        row += params.readout_bias.transpose();
    }
    Ok(out)
}

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::params::{pre_activations, sigmoid, BnnParams};
use crate::activations::{activate, activate_grad, ActivationKind};
use crate::error::{Error, Result};
use crate::spectral::WeightPrior;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Labels { labels: Vec<usize>, classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Classification { classes: usize },
}

impl TaskKind {
    pub fn outputs(self) -> usize {
        match self {
            TaskKind::Regression => 1,
            TaskKind::Classification { classes } => classes,
        }
    }
}

/// Training data: one input per row of `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub inputs: DMatrix<f64>,
    pub targets: Targets,
}

impl TaskSpec {
    pub fn regression(inputs: DMatrix<f64>, targets: Vec<f64>) -> Result<Self> {
        let task = Self {
            inputs,
            targets: Targets::Real(targets),
        };
        task.validate()?;
        Ok(task)
    }

    pub fn classification(inputs: DMatrix<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let task = Self {
            inputs,
            targets: Targets::Labels { labels, classes },
        };
        task.validate()?;
        Ok(task)
    }

    pub fn kind(&self) -> TaskKind {
        match &self.targets {
            Targets::Real(_) => TaskKind::Regression,
            Targets::Labels { classes, .. } => TaskKind::Classification { classes: *classes },
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.nrows();
        if n == 0 || self.inputs.ncols() == 0 {
            return Err(Error::InvalidParameter("task needs at least one input with one feature".into()));
        }
        if self.inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("task inputs".into()));
        }
        match &self.targets {
            Targets::Real(y) => {
                if y.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: y.len() });
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("regression targets".into()));
                }
            }
            Targets::Labels { labels, classes } => {
                if labels.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: labels.len(),
                    });
                }
                if *classes < 2 {
                    return Err(Error::InvalidParameter("classification needs at least two classes".into()));
                }
                if let Some(bad) = labels.iter().find(|l| **l >= *classes) {
                    return Err(Error::InvalidParameter(format!("label {bad} out of range for {classes} classes")));
                }
            }
        }
        Ok(())
    }
}

/// Gamma(shape, rate) prior on a positive scalar, applied through its log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    /// `−log p(e^u) − u`: the negative log density of `u = log x`.
    pub fn neg_log_density_of_log(&self, u: f64) -> f64 {
        let (a, b) = (self.shape, self.rate);
        -(a * b.ln() - ln_gamma(a) + a * u - b * u.exp())
    }

    pub fn grad_neg_log_density_of_log(&self, u: f64) -> f64 {
        -self.shape + self.rate * u.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperpriors {
    pub lengthscale: GammaPrior,
    pub noise: GammaPrior,
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Self {
            lengthscale: GammaPrior { shape: 2.0, rate: 0.5 },
            noise: GammaPrior { shape: 0.5, rate: 1.0 },
        }
    }
}

/// Everything about the model that is not a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnnModel {
    pub activation: ActivationKind,
    pub prior: WeightPrior,
    pub hyperpriors: Hyperpriors,
}

impl BnnModel {
    pub fn new(activation: ActivationKind, prior: WeightPrior) -> Self {
        Self {
            activation,
            prior,
            hyperpriors: Hyperpriors::default(),
        }
    }
}

/// Negative log joint split by term. `noise` is zero for classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub data: f64,
    pub weights: f64,
    pub biases: f64,
    pub readout: f64,
    pub lengthscale: f64,
    pub noise: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.data + self.weights + self.biases + self.readout + self.lengthscale + self.noise
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("data", self.data),
            ("weights", self.weights),
            ("biases", self.biases),
            ("readout", self.readout),
            ("lengthscale", self.lengthscale),
            ("noise", self.noise),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

fn check_compatible(params: &BnnParams, task: &TaskSpec) -> Result<()> {
    let shape = params.shape();
    if task.inputs.ncols() != shape.input_dim {
        return Err(Error::DimensionMismatch {
            expected: shape.input_dim,
            got: task.inputs.ncols(),
        });
    }
    let outputs = task.kind().outputs();
    if shape.outputs != outputs {
        return Err(Error::DimensionMismatch {
            expected: outputs,
            got: shape.outputs,
        });
    }
    Ok(())
}

/// `log Σ exp(row)` and the softmax of `row`.
pub(crate) fn log_softmax_parts(row: &[f64]) -> (f64, Vec<f64>) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (m + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

/// `log σ(x)` computed without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

struct Forward {
    pre: DMatrix<f64>,
    hidden: DMatrix<f64>,
    out: DMatrix<f64>,
}

fn forward(params: &BnnParams, activation: ActivationKind, xs: &DMatrix<f64>) -> Forward {
    let pre = pre_activations(params, xs);
    let hidden = pre.map(|z| activate(activation, z));
    let mut out = &hidden * params.effective_readout().transpose();
    for mut row in out.row_iter_mut() {
        row += params.readout_bias.transpose();
    }
    Forward { pre, hidden, out }
}

/// Data term and its gradient with respect to the network outputs.
fn data_term(params: &BnnParams, task: &TaskSpec, out: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = out.nrows();
    match &task.targets {
        Targets::Real(y) => {
            let s = params.noise_std();
            let log_norm = 0.5 * (2.0 * PI).ln() + params.log_noise;
            let mut g = DMatrix::zeros(n, 1);
            let mut total = 0.0;
            for i in 0..n {
                let r = out[(i, 0)] - y[i];
                total += log_norm + r * r / (2.0 * s * s);
                g[(i, 0)] = r / (s * s);
            }
            (total, g)
        }
        Targets::Labels { labels, .. } => {
            let mut g = DMatrix::zeros(n, out.ncols());
            let mut total = 0.0;
            for i in 0..n {
                let row: Vec<f64> = out.row(i).iter().copied().collect();
                let (lse, probs) = log_softmax_parts(&row);
                total += lse - row[labels[i]];
                for (c, p) in probs.into_iter().enumerate() {
                    g[(i, c)] = p;
                }
                g[(i, labels[i])] -= 1.0;
            }
            (total, g)
        }
    }
}

fn prior_terms(params: &BnnParams, task: &TaskSpec, model: &BnnModel) -> LossBreakdown {
    let weights = -params.weights.iter().map(|w| model.prior.log_pdf_unchecked(*w)).sum::<f64>();
    // Uniform bias pushed through the link: the 2π constants cancel.
    let biases = -params
        .bias_raw
        .iter()
        .map(|u| log_sigmoid(*u) + log_sigmoid(-*u))
        .sum::<f64>();
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let readout = params
        .readout
        .iter()
        .chain(params.readout_bias.iter())
        .map(|v| half_log_2pi + 0.5 * v * v)
        .sum::<f64>();
    let lengthscale = model.hyperpriors.lengthscale.neg_log_density_of_log(params.log_lengthscale);
    let noise = match task.kind() {
        TaskKind::Regression => model.hyperpriors.noise.neg_log_density_of_log(params.log_noise),
        TaskKind::Classification { .. } => 0.0,
    };
    LossBreakdown {
        data: 0.0,
        weights,
        biases,
        readout,
        lengthscale,
        noise,
    }
}

/// Term-by-term negative log joint density of parameters and data.
pub fn loss_breakdown(params: &BnnParams, task: &TaskSpec, model: &BnnModel) -> Result<LossBreakdown> {
    check_compatible(params, task)?;
    let fwd = forward(params, model.activation, &task.inputs);
    let (data, _) = data_term(params, task, &fwd.out);
    Ok(LossBreakdown {
        data,
        ..prior_terms(params, task, model)
    })
}

pub fn neg_log_joint(params: &BnnParams, task: &TaskSpec, model: &BnnModel) -> Result<f64> {
    Ok(loss_breakdown(params, task, model)?.total())
}

/// Loss and its gradient, the gradient laid out like the parameters.
pub fn neg_log_joint_with_grad(params: &BnnParams, task: &TaskSpec, model: &BnnModel) -> Result<(f64, BnnParams)> {
    check_compatible(params, task)?;
    let xs = &task.inputs;
    let k = params.shape().hidden_units;
    let sqrt_k = (k as f64).sqrt();
    let ell = params.lengthscale();

    let fwd = forward(params, model.activation, xs);
    let (data, g_out) = data_term(params, task, &fwd.out);
    let loss = LossBreakdown {
        data,
        ..prior_terms(params, task, model)
    }
    .total();

    let mut grad = BnnParams::zeros(params.shape());
    grad.readout = g_out.transpose() * &fwd.hidden / sqrt_k;
    grad.readout_bias = DVector::from_iterator(g_out.ncols(), g_out.column_iter().map(|c| c.sum()));

    let mut d_pre = &g_out * &params.readout / sqrt_k;
    d_pre.zip_apply(&fwd.pre, |d, z| *d *= activate_grad(model.activation, z));

    grad.weights = d_pre.transpose() * xs / ell;
    let biases = params.biases();
    grad.bias_raw = DVector::from_iterator(
        k,
        d_pre.column_iter().zip(params.bias_raw.iter()).map(|(col, u)| {
            let s = sigmoid(*u);
            col.sum() * 2.0 * PI * s * (1.0 - s)
        }),
    );
    // ∂z/∂log ℓ = −(z − b)
    let mut d_log_ell = 0.0;
    for (j, (d_col, z_col)) in d_pre.column_iter().zip(fwd.pre.column_iter()).enumerate() {
        d_log_ell -= d_col.dot(&z_col.add_scalar(-biases[j]));
    }
    grad.log_lengthscale = d_log_ell;

    if let Targets::Real(y) = &task.targets {
        let s2 = params.noise_std().powi(2);
        grad.log_noise = (0..y.len())
            .map(|i| {
                let r = fwd.out[(i, 0)] - y[i];
                1.0 - r * r / s2
            })
            .sum::<f64>()
            + model.hyperpriors.noise.grad_neg_log_density_of_log(params.log_noise);
    }

    // Prior gradients.
    grad.weights.zip_apply(&params.weights, |g, w| *g -= model.prior.grad_log_pdf(w));
    grad.bias_raw.zip_apply(&params.bias_raw, |g, u| *g += 2.0 * sigmoid(u) - 1.0);
    grad.readout += &params.readout;
    grad.readout_bias += &params.readout_bias;
    grad.log_lengthscale += model.hyperpriors.lengthscale.grad_neg_log_density_of_log(params.log_lengthscale);

    Ok((loss, grad))
}

pub fn neg_log_joint_grad(params: &BnnParams, task: &TaskSpec, model: &BnnModel) -> Result<BnnParams> {
    Ok(neg_log_joint_with_grad(params, task, model)?.1)
}

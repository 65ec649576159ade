use nalgebra::DMatrix;

use super::loss::{log_softmax_parts, TaskKind};
use super::params::{bnn_forward, BnnParams};
use crate::activations::ActivationKind;
use crate::error::{Error, Result};

/// Posterior predictive summary at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictivePoint {
    /// Class probabilities, or the single regression mean.
    pub mean: Vec<f64>,
    /// Regression: latent variance plus mean noise variance. Classification:
    /// across-draw probability variance averaged over classes.
    pub marginal_variance: f64,
    /// Across-draw variance of the latent regression output (0 for classification).
    pub latent_variance: f64,
    /// Entropy of the mean class distribution (classification only).
    pub entropy: Option<f64>,
    /// `−log p(y | x, D)` when a target was supplied.
    pub nlpd: Option<f64>,
}

fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Predictive summaries at the rows of `xs` from a set of posterior draws.
///
/// Classification targets are class indices stored as `f64`.
pub fn predictive(
    draws: &[BnnParams],
    activation: ActivationKind,
    xs: &DMatrix<f64>,
    kind: TaskKind,
    targets: Option<&[f64]>,
) -> Result<Vec<PredictivePoint>> {
    if draws.is_empty() {
        return Err(Error::InvalidParameter("predictive needs at least one draw".into()));
    }
    if let Some(t) = targets {
        if t.len() != xs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: xs.nrows(),
                got: t.len(),
            });
        }
    }
    let outputs = kind.outputs();
    if let Some(bad) = draws.iter().find(|p| p.shape().outputs != outputs) {
        return Err(Error::DimensionMismatch {
            expected: outputs,
            got: bad.shape().outputs,
        });
    }
    let per_draw: Vec<DMatrix<f64>> = draws
        .iter()
        .map(|p| bnn_forward(p, activation, xs))
        .collect::<Result<_>>()?;
    let s = draws.len() as f64;

    let points = (0..xs.nrows()).map(|i| {
        let target = targets.map(|t| t[i]);
        match kind {
            TaskKind::Regression => {
                let f: Vec<f64> = per_draw.iter().map(|o| o[(i, 0)]).collect();
                let mean = f.iter().sum::<f64>() / s;
                let latent = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s;
                let noise = draws.iter().map(|p| p.noise_std().powi(2)).sum::<f64>() / s;
                let nlpd = target.map(|y| {
                    let logs: Vec<f64> = f
                        .iter()
                        .zip(draws)
                        .map(|(fi, p)| {
                            let sd = p.noise_std();
                            -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - (y - fi).powi(2) / (2.0 * sd * sd)
                        })
                        .collect();
                    s.ln() - logsumexp(&logs)
                });
                Ok(PredictivePoint {
                    mean: vec![mean],
                    marginal_variance: latent + noise,
                    latent_variance: latent,
                    entropy: None,
                    nlpd,
                })
            }
            TaskKind::Classification { classes } => {
                let probs: Vec<Vec<f64>> = per_draw
                    .iter()
                    .map(|o| log_softmax_parts(&o.row(i).iter().copied().collect::<Vec<_>>()).1)
                    .collect();
                let mean: Vec<f64> = (0..classes).map(|c| probs.iter().map(|p| p[c]).sum::<f64>() / s).collect();
                let variance = (0..classes)
                    .map(|c| probs.iter().map(|p| (p[c] - mean[c]).powi(2)).sum::<f64>() / s)
                    .sum::<f64>()
                    / classes as f64;
                let entropy = -mean.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>();
                let nlpd = match target {
                    Some(y) => {
                        if y < 0.0 || y.fract() != 0.0 || y as usize >= classes {
                            return Err(Error::InvalidParameter(format!("label {y} out of range")));
                        }
                        Some(-mean[y as usize].ln())
                    }
                    None => None,
                };
                Ok(PredictivePoint {
                    mean,
                    marginal_variance: variance,
                    latent_variance: 0.0,
                    entropy: Some(entropy),
                    nlpd,
                })
            }
        }
    });
    points.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::params::ParamShape;
    use approx::assert_abs_diff_eq;

    fn constant_classifier(logits: [f64; 2]) -> BnnParams {
        let mut p = BnnParams::zeros(ParamShape {
            hidden_units: 1,
            input_dim: 1,
            outputs: 2,
        });
        p.readout_bias[0] = logits[0];
        p.readout_bias[1] = logits[1];
        p
    }

    #[test]
    fn identical_uniform_draws() {
        let draws = vec![constant_classifier([0.3, 0.3]); 4];
        let pts = predictive(&draws, ActivationKind::Sin, &DMatrix::zeros(1, 1), TaskKind::Classification { classes: 2 }, Some(&[1.0])).unwrap();
        assert_abs_diff_eq!(pts[0].entropy.unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(pts[0].marginal_variance, 0.0);
        assert_abs_diff_eq!(pts[0].nlpd.unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn disagreeing_confident_draws() {
        let draws = vec![constant_classifier([50.0, 0.0]), constant_classifier([0.0, 50.0])];
        let pts = predictive(&draws, ActivationKind::Sin, &DMatrix::zeros(1, 1), TaskKind::Classification { classes: 2 }, None).unwrap();
        assert_abs_diff_eq!(pts[0].entropy.unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(pts[0].marginal_variance, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn regression_moments_and_nlpd() {
        let mut a = BnnParams::zeros(ParamShape {
            hidden_units: 1,
            input_dim: 1,
            outputs: 1,
        });
        a.log_noise = 0.5f64.ln();
        let mut b = a.clone();
        a.readout_bias[0] = 1.0;
        b.readout_bias[0] = -1.0;
        let pts = predictive(&[a, b], ActivationKind::Sin, &DMatrix::zeros(1, 1), TaskKind::Regression, Some(&[0.0])).unwrap();
        assert_abs_diff_eq!(pts[0].mean[0], 0.0);
        assert_abs_diff_eq!(pts[0].latent_variance, 1.0);
        assert_abs_diff_eq!(pts[0].marginal_variance, 1.25);
        let density = (-0.5 / 0.25f64).exp() / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert_abs_diff_eq!(pts[0].nlpd.unwrap(), -density.ln(), epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        let draws = vec![constant_classifier([0.0, 0.0])];
        let xs = DMatrix::zeros(2, 1);
        assert!(predictive(&[], ActivationKind::Sin, &xs, TaskKind::Regression, None).is_err());
        assert!(predictive(&draws, ActivationKind::Sin, &xs, TaskKind::Regression, None).is_err());
        assert!(predictive(&draws, ActivationKind::Sin, &xs, TaskKind::Classification { classes: 2 }, Some(&[0.0])).is_err());
        assert!(predictive(&draws, ActivationKind::Sin, &xs, TaskKind::Classification { classes: 2 }, Some(&[0.0, 3.0])).is_err());
    }
}

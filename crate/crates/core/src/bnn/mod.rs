//! Finite-width Bayesian neural networks with a single hidden layer:
//! priors, gradients, MAP fitting, HMC and posterior predictives.

pub mod hmc;
mod loss;
mod map;
mod params;
mod predictive;

pub use hmc::{ChainOutput, HmcConfig, Potential};
pub use loss::{
    loss_breakdown, neg_log_joint, neg_log_joint_grad, neg_log_joint_with_grad, BnnModel, GammaPrior, Hyperpriors,
    LossBreakdown, TaskKind, TaskSpec, Targets,
};
pub use map::{map_fit, MapConfig, MapFit};
pub use params::{bias_link, bias_link_inverse, bnn_forward, bnn_init, sigmoid, BnnParams, InitOptions, ParamShape};
pub use predictive::{predictive, PredictivePoint};

use crate::error::Result;

/// Posterior of a network as a parameter vector, for the generic sampler.
pub struct BnnPotential<'a> {
    pub task: &'a TaskSpec,
    pub model: &'a BnnModel,
    pub shape: ParamShape,
}

impl Potential for BnnPotential<'_> {
    fn dim(&self) -> usize {
        self.shape.len()
    }

    fn energy_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let evaluated = BnnParams::from_slice(self.shape, q)
            .and_then(|p| neg_log_joint_with_grad(&p, self.task, self.model));
        match evaluated {
            Ok((loss, g)) if loss.is_finite() => {
                grad.copy_from_slice(&g.to_vec());
                loss
            }
            _ => {
                grad.fill(0.0);
                f64::INFINITY
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    pub accept_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
}

#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    /// Post-warmup draws, chain by chain.
    pub draws: Vec<BnnParams>,
    pub chains: Vec<ChainSummary>,
    pub config: HmcConfig,
}

impl PosteriorSamples {
    pub fn mean_accept_rate(&self) -> f64 {
        self.chains.iter().map(|c| c.accept_rate).sum::<f64>() / self.chains.len() as f64
    }
}

/// HMC over all network parameters. Chain `i` starts from a prior draw with
/// seed `seed + i` and samples with the same seed.
pub fn hmc_sample(
    task: &TaskSpec,
    model: &BnnModel,
    hidden_units: usize,
    init: InitOptions,
    cfg: &HmcConfig,
) -> Result<PosteriorSamples> {
    task.validate()?;
    cfg.validate()?;
    let outputs = task.kind().outputs();
    let inits = (0..cfg.chains)
        .map(|i| {
            bnn_init(cfg.seed.wrapping_add(i as u64), task.inputs.ncols(), hidden_units, outputs, &model.prior, init)
                .map(|p| p.to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = ParamShape {
        hidden_units,
        input_dim: task.inputs.ncols(),
        outputs,
    };
    let potential = BnnPotential { task, model, shape };
    let chains = hmc::sample(&potential, inits, cfg)?;
    let summaries = chains
        .iter()
        .map(|c| ChainSummary {
            accept_rate: c.accept_rate,
            step_size: c.step_size,
            divergences: c.divergences,
        })
        .collect();
    let draws = chains
        .into_iter()
        .flat_map(|c| c.draws)
        .map(|q| BnnParams::from_slice(shape, &q))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples {
        draws,
        chains: summaries,
        config: *cfg,
    })
}

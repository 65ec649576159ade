use super::loss::{loss_breakdown, neg_log_joint, neg_log_joint_with_grad, BnnModel, TaskSpec};
use super::params::BnnParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig {
    pub iterations: usize,
    pub initial_step: f64,
    /// Step multiplier after an accepted move.
    pub growth: f64,
    /// Halvings tried before a step is declared stuck.
    pub max_halvings: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            initial_step: 1e-3,
            growth: 1.2,
            max_halvings: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapFit {
    pub params: BnnParams,
    /// Loss after each accepted step, starting with the initial loss.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Gradient descent with backtracking on the negative log joint.
///
/// Every accepted step lowers the loss, so `trace` is non-increasing.
pub fn map_fit(init: &BnnParams, task: &TaskSpec, model: &BnnModel, cfg: &MapConfig) -> Result<MapFit> {
    task.validate()?;
    model.prior.validate()?;
    if !(cfg.initial_step > 0.0 && cfg.growth >= 1.0) {
        return Err(Error::InvalidParameter("MAP step must be positive and growth at least 1".into()));
    }
    let shape = init.shape();
    let breakdown = loss_breakdown(init, task, model)?;
    if let Some(term) = breakdown.non_finite_term() {
        return Err(Error::NonFiniteLoss(term));
    }
    let mut params = init.clone();
    let mut theta = params.to_vec();
    let mut step = cfg.initial_step;
    let mut trace = vec![breakdown.total()];
    let mut converged = false;

    for iteration in 0..cfg.iterations {
        let (loss, grad) = neg_log_joint_with_grad(&params, task, model)?;
        let g = grad.to_vec();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration, trace });
        }
        let mut accepted = None;
        for _ in 0..cfg.max_halvings {
            let candidate: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let cand = BnnParams::from_slice(shape, &candidate)?;
            match neg_log_joint(&cand, task, model) {
                Ok(l) if l.is_finite() && l <= loss => {
                    accepted = Some((candidate, cand, l));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        match accepted {
            Some((t, p, l)) => {
                theta = t;
                params = p;
                trace.push(l);
                step *= cfg.growth;
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(MapFit {
        params,
        trace,
        converged,
    })
}

//! Hamiltonian Monte Carlo with an identity mass matrix and dual-averaging
//! step-size adaptation during warmup.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// Energy change beyond which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;
/// Largest tolerated fraction of divergent post-warmup transitions.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.1;

/// A potential `U(q) = −log π(q)` on a flat parameter vector.
pub trait Potential: Sync {
    fn dim(&self) -> usize;
    /// Returns `U(q)` and writes `∇U(q)` into `grad`.
    fn energy_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub iters: usize,
    pub leapfrog_steps: usize,
    pub seed: u64,
    pub target_accept: f64,
    /// Relative jitter applied to the step size each transition.
    pub step_jitter: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 1000,
            iters: 1000,
            leapfrog_steps: 32,
            seed: 0,
            target_accept: 0.8,
            step_jitter: 0.2,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iters == 0 || self.leapfrog_steps == 0 {
            return Err(Error::InvalidParameter(
                "chains, iters and leapfrog_steps must all be at least 1".into(),
            ));
        }
        if self.warmup < 100 {
            return Err(Error::InvalidParameter(format!(
                "warmup must be at least 100 iterations, got {}",
                self.warmup
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(Error::InvalidParameter("step jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<Vec<f64>>,
    /// Mean acceptance probability over post-warmup transitions.
    pub accept_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
}

/// Dual averaging of the log step size.
struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            h_bar: 0.0,
            log_eps: eps.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
            target,
        }
    }

    fn update(&mut self, accept: f64) {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }
}

struct State {
    q: Vec<f64>,
    grad: Vec<f64>,
    energy: f64,
}

impl State {
    fn new<P: Potential>(potential: &P, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let energy = potential.energy_and_grad(&q, &mut grad);
        Self { q, grad, energy }
    }
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

/// One leapfrog trajectory; returns the end state and the Hamiltonian change.
fn trajectory<P: Potential>(potential: &P, start: &State, p0: &[f64], eps: f64, steps: usize) -> (State, f64) {
    let mut q = start.q.clone();
    let mut p = p0.to_vec();
    let mut grad = start.grad.clone();
    let mut energy = start.energy;
    for (pi, g) in p.iter_mut().zip(&grad) {
        *pi -= 0.5 * eps * g;
    }
    for step in 0..steps {
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += eps * pi;
        }
        energy = potential.energy_and_grad(&q, &mut grad);
        if !energy.is_finite() {
            break;
        }
        let scale = if step + 1 == steps { 0.5 } else { 1.0 };
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi -= scale * eps * g;
        }
    }
    let delta = (energy + kinetic(&p)) - (start.energy + kinetic(p0));
    let delta = if delta.is_finite() { delta } else { f64::INFINITY };
    (State { q, grad, energy }, delta)
}

fn draw_momentum(rng: &mut rng::Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Doubles or halves a starting step until one leapfrog step has
/// acceptance probability crossing one half.
fn initial_step_size<P: Potential>(potential: &P, state: &State, rng: &mut rng::Rng) -> f64 {
    let mut eps = 0.1;
    let p = draw_momentum(rng, state.q.len());
    let accept = |eps: f64| {
        let (_, delta) = trajectory(potential, state, &p, eps, 1);
        (-delta).exp().min(1.0)
    };
    let direction = if accept(eps) > 0.5 { 1.0 } else { -1.0 };
    for _ in 0..50 {
        let a = accept(eps);
        if (direction > 0.0 && a <= 0.5) || (direction < 0.0 && a > 0.5) {
            break;
        }
        eps *= 2f64.powf(direction);
    }
    eps
}

/// Runs one chain; `stream` selects the seed offset.
pub fn run_chain<P: Potential>(potential: &P, init: Vec<f64>, cfg: &HmcConfig, stream: u64) -> Result<ChainOutput> {
    cfg.validate()?;
    if init.len() != potential.dim() {
        return Err(Error::DimensionMismatch {
            expected: potential.dim(),
            got: init.len(),
        });
    }
    let mut rng = rng::seeded(cfg.seed.wrapping_add(stream));
    let mut state = State::new(potential, init);
    if !state.energy.is_finite() {
        return Err(Error::NonFiniteLoss("initial potential"));
    }
    let mut eps = initial_step_size(potential, &state, &mut rng);
    let mut adapt = DualAveraging::new(eps, cfg.target_accept);
    let mut draws = Vec::with_capacity(cfg.iters);
    let mut accept_sum = 0.0;
    let mut divergences = 0;

    for it in 0..cfg.warmup + cfg.iters {
        let sampling = it >= cfg.warmup;
        if it == cfg.warmup {
            eps = adapt.log_eps_bar.exp();
        }
        let jitter = 1.0 + cfg.step_jitter * rng.random_range(-1.0..1.0);
        let p0 = draw_momentum(&mut rng, state.q.len());
        let (proposal, delta) = trajectory(potential, &state, &p0, eps * jitter, cfg.leapfrog_steps);
        let accept = if delta.is_finite() { (-delta).exp().min(1.0) } else { 0.0 };
        if rng.random::<f64>() < accept {
            state = proposal;
        }
        if sampling {
            if delta > DIVERGENCE_THRESHOLD {
                divergences += 1;
            }
            accept_sum += accept;
            draws.push(state.q.clone());
        } else {
            adapt.update(accept);
            eps = adapt.log_eps.exp();
        }
    }
    Ok(ChainOutput {
        draws,
        accept_rate: accept_sum / cfg.iters as f64,
        step_size: eps,
        divergences,
    })
}

/// Runs `inits.len()` chains in parallel; chain `i` uses seed `seed + i`.
///
/// Fails when more than a tenth of post-warmup transitions diverge.
pub fn sample<P: Potential>(potential: &P, inits: Vec<Vec<f64>>, cfg: &HmcConfig) -> Result<Vec<ChainOutput>> {
    cfg.validate()?;
    if inits.len() != cfg.chains {
        return Err(Error::DimensionMismatch {
            expected: cfg.chains,
            got: inits.len(),
        });
    }
    let chains: Vec<ChainOutput> = inits
        .into_par_iter()
        .enumerate()
        .map(|(i, init)| run_chain(potential, init, cfg, i as u64))
        .collect::<Result<_>>()?;
    let divergent: usize = chains.iter().map(|c| c.divergences).sum();
    let total = cfg.chains * cfg.iters;
    if divergent as f64 > MAX_DIVERGENT_FRACTION * total as f64 {
        return Err(Error::Sampling(format!(
            "{divergent} of {total} transitions diverged"
        )));
    }
    Ok(chains)
}

/// Gaussian with diagonal covariance, handy as a sampler check.
#[derive(Debug, Clone)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Potential for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn energy_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let mut u = 0.0;
        for i in 0..q.len() {
            let z = q[i] - self.mean[i];
            u += 0.5 * z * z / self.variance[i];
            grad[i] = z / self.variance[i];
        }
        u
    }
}

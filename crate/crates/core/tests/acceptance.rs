//! End-to-end acceptance checks. Runs without the test harness so every
//! criterion prints one line; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use periodic_bnn::bnn::{
    self, bnn_forward, bnn_init, hmc, BnnModel, BnnParams, HmcConfig, InitOptions, TaskKind, TaskSpec,
};
use periodic_bnn::data::banana;
use periodic_bnn::gp::{gp_fit, gp_predict};
use periodic_bnn::kernels::{column, linspace};
use periodic_bnn::mc_kernel::{convergence_sweep, mc_verify, triangle_truncation_error, McConfig};
use periodic_bnn::{
    matern_spectral_density, wiener_khinchin_numeric, ActivationKind, KernelSpec, WeightPrior,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// The three priors of the kernel/prior table with their closed-form kernels.
fn table() -> Vec<(&'static str, WeightPrior, KernelSpec)> {
    vec![
        ("normal/rbf", WeightPrior::normal(), KernelSpec::rbf(1.0, 1.0).unwrap()),
        (
            "t3/matern32",
            WeightPrior::student_t(3.0).unwrap(),
            KernelSpec::matern(1.5, 1.0, 1.0).unwrap(),
        ),
        ("cauchy/exponential", WeightPrior::cauchy(), KernelSpec::exponential(1.0, 1.0).unwrap()),
    ]
}

fn spectral_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.5, 1.5, 2.5] {
        let t = WeightPrior::student_t(2.0 * nu).unwrap();
        for i in 0..=100 {
            let w = -5.0 + 0.1 * i as f64;
            let diff = (t.pdf(w) - matern_spectral_density(nu, w).unwrap() / (2.0 * PI)).abs();
            worst = worst.max(diff);
        }
    }
    outcome(worst <= 1e-12, format!("max |diff| = {worst:.2e} (limit 1e-12)"))
}

fn wiener_khinchin_round_trip() -> Outcome {
    let mut pairs = table();
    pairs.push((
        "t1/matern12",
        WeightPrior::student_t(1.0).unwrap(),
        KernelSpec::matern(0.5, 1.0, 1.0).unwrap(),
    ));
    pairs.push((
        "t5/matern52",
        WeightPrior::student_t(5.0).unwrap(),
        KernelSpec::matern(2.5, 1.0, 1.0).unwrap(),
    ));
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    for (name, prior, kernel) in &pairs {
        for i in 0..=50 {
            let r = 0.1 * i as f64;
            let diff = (wiener_khinchin_numeric(prior, r).unwrap() - kernel.eval_distance(r)).abs();
            if diff > worst {
                worst = diff;
                worst_at = format!("{name} r={r:.1}");
            }
        }
    }
    outcome(worst <= 1e-6, format!("max |diff| = {worst:.2e} at {worst_at} (limit 1e-6)"))
}

fn mc_convergence() -> Outcome {
    let ks = [5, 10, 50, 100, 500, 1000, 5000];
    let grid = linspace(-3.0, 3.0, 13);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, prior, kernel) in table() {
        let rows = convergence_sweep(ActivationKind::Sin, &prior, &kernel, &ks, &grid, 5, 0).unwrap();
        let medians: Vec<f64> = rows.iter().map(|r| r.mae_median).collect();
        let limit = if name.starts_with("cauchy") { 0.04 } else { 0.03 };
        let last = *medians.last().unwrap();
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        pass &= last <= limit && decreasing;
        parts.push(format!(
            "{name}: median@5000={last:.4} (<= {limit}) decreasing={decreasing} [{}]",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ));
    }
    outcome(pass, parts.join("; "))
}

fn all_activation_recovery() -> Outcome {
    let lags = [0.0, 0.5, 1.0, 2.0, 3.0];
    let kinds = [
        ActivationKind::Sin,
        ActivationKind::SinCos,
        ActivationKind::Triangle,
        ActivationKind::PeriodicReLU,
    ];
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    for kind in kinds {
        for (name, prior, kernel) in table() {
            let cfg = McConfig {
                activation: kind,
                prior,
                hidden_units: 5000,
                seed: 0,
                input_dim: 1,
            };
            for row in mc_verify(&cfg, &kernel, &lags).unwrap() {
                if row.abs_err > worst {
                    worst = row.abs_err;
                    worst_at = format!("{kind} {name} r={}", row.r);
                }
            }
        }
    }
    outcome(worst <= 0.06, format!("max |err| = {worst:.4} at {worst_at} (limit 0.06)"))
}

fn triangle_truncation() -> Outcome {
    let grid = linspace(0.0, 5.0, 101);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, prior, _) in table() {
        let sup = triangle_truncation_error(&prior, &grid, 100)
            .unwrap()
            .iter()
            .map(|r| r.abs_diff)
            .fold(0.0, f64::max);
        pass &= sup <= 2e-2;
        parts.push(format!("{name}: sup = {sup:.4}"));
    }
    outcome(pass, format!("{} (limit 0.02)", parts.join("; ")))
}

fn gradient_correctness() -> Outcome {
    let mut rng = periodic_bnn::rng::seeded(2024);
    let n = 12;
    let xs = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-2.0..2.0));
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let task = TaskSpec::classification(xs, labels, 2).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut checked = 0;
    for kind in ActivationKind::ALL {
        let model = BnnModel::new(kind, WeightPrior::student_t(3.0).unwrap());
        let mut points = 0;
        let mut seed = 0;
        while points < 10 {
            seed += 1;
            let mut p = bnn_init(seed, 2, 5, 2, &model.prior, InitOptions::default()).unwrap();
            p.readout_bias = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            p.log_lengthscale = rng.random_range(-0.5..0.5);
            let pre = &task.inputs * p.weights.transpose() / p.lengthscale();
            let biases = p.biases();
            let near_kink = pre
                .row_iter()
                .any(|row| row.iter().zip(biases.iter()).any(|(z, b)| kind.distance_to_kink(z + b) < 1e-3));
            if near_kink {
                continue;
            }
            points += 1;
            let analytic = bnn::neg_log_joint_grad(&p, &task, &model).unwrap().to_vec();
            let theta = p.to_vec();
            let shape = p.shape();
            let loss = |t: &[f64]| bnn::neg_log_joint(&BnnParams::from_slice(shape, t).unwrap(), &task, &model).unwrap();
            for i in 0..theta.len() {
                let mut plus = theta.clone();
                plus[i] += h;
                let mut minus = theta.clone();
                minus[i] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let scale = analytic[i].abs().max(fd.abs());
                let rel = if scale == 0.0 { 0.0 } else { (analytic[i] - fd).abs() / scale };
                checked += 1;
                if rel > worst {
                    worst = rel;
                    worst_at = format!("{kind} seed {seed} coord {i} (analytic {:.3e}, fd {fd:.3e})", analytic[i]);
                }
            }
        }
    }
    outcome(
        worst <= 1e-5,
        format!("{checked} coordinates, max rel err = {worst:.2e} at {worst_at} (limit 1e-5)"),
    )
}

fn hmc_calibration() -> Outcome {
    let target = hmc::DiagonalGaussian {
        mean: vec![0.0, 0.0],
        variance: vec![1.0, 1.0],
    };
    let cfg = HmcConfig {
        chains: 4,
        warmup: 500,
        iters: 2500,
        seed: 0,
        ..HmcConfig::default()
    };
    let chains = hmc::sample(&target, vec![vec![0.0, 0.0]; 4], &cfg).unwrap();
    let draws: Vec<&Vec<f64>> = chains.iter().flat_map(|c| c.draws.iter()).collect();
    let n = draws.len() as f64;
    let mean: Vec<f64> = (0..2).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / n).collect();
    let cov = |a: usize, b: usize| draws.iter().map(|d| (d[a] - mean[a]) * (d[b] - mean[b])).sum::<f64>() / (n - 1.0);
    let c = [cov(0, 0), cov(0, 1), cov(1, 1)];
    let accept: Vec<f64> = chains.iter().map(|c| c.accept_rate).collect();
    let pass = mean.iter().all(|m| m.abs() <= 0.05)
        && (c[0] - 1.0).abs() <= 0.1
        && (c[2] - 1.0).abs() <= 0.1
        && c[1].abs() <= 0.1
        && accept.iter().all(|a| (0.6..=0.95).contains(a));
    outcome(
        pass,
        format!(
            "{} draws, mean = ({:.4}, {:.4}), cov = [{:.4} {:.4}; {:.4}], accept = {:?}",
            draws.len(),
            mean[0],
            mean[1],
            c[0],
            c[1],
            c[2],
            accept.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn gp_reversion() -> Outcome {
    let x = linspace(-3.0, 3.0, 20);
    let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
    let max_y = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let kernel = KernelSpec::matern(1.5, 1.0, 1.0).unwrap();
    let post = gp_fit(&kernel, &column(&x), &DVector::from_vec(y), 1e-2).unwrap();
    let (mean, var) = gp_predict(&post, &column(&[-100.0, 100.0])).unwrap();
    let pass = var.iter().all(|v| *v >= 0.999) && mean.iter().all(|m| m.abs() <= 1e-3 * max_y);
    outcome(
        pass,
        format!(
            "var = ({:.6}, {:.6}), |mean| = ({:.2e}, {:.2e})",
            var[0],
            var[1],
            mean[0].abs(),
            mean[1].abs()
        ),
    )
}

fn finite_width_reversion() -> Outcome {
    let (xs, labels) = banana(50, 0.1, 0).unwrap();
    let task = TaskSpec::classification(xs.clone(), labels.clone(), 2).unwrap();
    let model = BnnModel::new(ActivationKind::Sin, WeightPrior::student_t(3.0).unwrap());
    let cfg = HmcConfig {
        chains: 4,
        warmup: 1000,
        iters: 2000,
        seed: 1,
        ..HmcConfig::default()
    };
    let samples = match bnn::hmc_sample(&task, &model, 30, InitOptions::default(), &cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("sampling failed: {e}")),
    };
    let kind = TaskKind::Classification { classes: 2 };
    let train = bnn::predictive(&samples.draws, model.activation, &xs, kind, None).unwrap();
    let correct = train
        .iter()
        .zip(&labels)
        .filter(|(p, l)| usize::from(p.mean[1] > p.mean[0]) == **l)
        .count();
    let accuracy = correct as f64 / labels.len() as f64;
    let train_var = train.iter().map(|p| p.marginal_variance).sum::<f64>() / train.len() as f64;
    let far = &bnn::predictive(
        &samples.draws,
        model.activation,
        &DMatrix::from_row_slice(1, 2, &[10.0, 10.0]),
        kind,
        None,
    )
    .unwrap()[0];
    let pass = accuracy >= 0.9 && (far.mean[1] - 0.5).abs() <= 0.15 && far.marginal_variance > train_var;
    outcome(
        pass,
        format!(
            "accuracy = {accuracy:.3}, p(1 | (10,10)) = {:.3}, var far = {:.4} vs train mean {train_var:.4}, accept = {:.3}",
            far.mean[1],
            far.marginal_variance,
            samples.mean_accept_rate()
        ),
    )
}

fn wide_network_covariance() -> Outcome {
    let xs = column(&[0.0, 1.0]);
    let prior = WeightPrior::normal();
    let outputs: Vec<(f64, f64)> = (0..500u64)
        .map(|seed| {
            let p = bnn_init(seed, 1, 5000, 1, &prior, InitOptions::default()).unwrap();
            let f = bnn_forward(&p, ActivationKind::Sin, &xs).unwrap();
            (f[(0, 0)], f[(1, 0)])
        })
        .collect();
    let n = outputs.len() as f64;
    let m0 = outputs.iter().map(|o| o.0).sum::<f64>() / n;
    let m1 = outputs.iter().map(|o| o.1).sum::<f64>() / n;
    let cov = outputs.iter().map(|o| (o.0 - m0) * (o.1 - m1)).sum::<f64>() / (n - 1.0);
    let target = (-0.5f64).exp();
    outcome((cov - target).abs() <= 0.1, format!("cov = {cov:.4}, target {target:.5} +/- 0.1"))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 10] = [
        ("spectral identity", spectral_identity, Duration::from_secs(1)),
        ("wiener-khinchin round trip", wiener_khinchin_round_trip, Duration::from_secs(10)),
        ("mc convergence sweep", mc_convergence, Duration::from_secs(120)),
        ("all-activation kernel recovery", all_activation_recovery, Duration::from_secs(120)),
        ("triangle truncation", triangle_truncation, Duration::from_secs(30)),
        ("gradient correctness", gradient_correctness, Duration::from_secs(10)),
        ("hmc calibration", hmc_calibration, Duration::from_secs(30)),
        ("gp reversion to prior", gp_reversion, Duration::from_secs(1)),
        ("finite-width reversion", finite_width_reversion, Duration::from_secs(600)),
        ("wide-network prior covariance", wide_network_covariance, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} | {} | {:.2}s (budget {}s{})",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

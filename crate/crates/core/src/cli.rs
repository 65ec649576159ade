//! Command-line experiments. Each subcommand reads a flat config, runs one
//! computation and writes a CSV whose first line is the resolved config.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use crate::activations::ActivationKind;
use crate::bnn::{self, BnnModel, HmcConfig, InitOptions, MapConfig, PredictivePoint, TaskKind, TaskSpec};
use crate::config::Config;
use crate::data::{self, format_number, Table};
use crate::error::{Error, Result};
use crate::gp;
use crate::kernels::{self, column, linspace, KernelSpec};
use crate::mc_kernel::{self, McConfig};
use crate::spectral::{kernel_for_prior, WeightPrior};

#[derive(Debug, Parser)]
#[command(name = "pbnn", version, about = "Periodic-activation BNNs and their stationary GP kernels")]
pub struct Cli {
    /// Base random seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output CSV path (stdout if omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Extra `key=value` config entries; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form or Monte-Carlo Gram matrix on a 1D grid.
    Gram,
    /// Single-network MC kernel against its closed form over lags.
    McVerify,
    /// MC Gram error as the hidden-unit count grows.
    Sweep,
    /// First component versus truncated triangle-kernel mixture.
    TriangleError,
    /// Exact GP regression on a training CSV.
    GpFit,
    /// MAP fit of a single-hidden-layer BNN.
    BnnFit,
    /// HMC posterior of a single-hidden-layer BNN.
    BnnHmc,
    /// Two-crescent classification data.
    BananaGen,
    /// 1D regression with a GP and/or an HMC BNN, with metrics.
    #[command(name = "regress-1d")]
    Regress1d,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gram => "gram",
            Command::McVerify => "mc-verify",
            Command::Sweep => "sweep",
            Command::TriangleError => "triangle-error",
            Command::GpFit => "gp-fit",
            Command::BnnFit => "bnn-fit",
            Command::BnnHmc => "bnn-hmc",
            Command::BananaGen => "banana-gen",
            Command::Regress1d => "regress-1d",
        }
    }
}

/// Resolved config plus where results go.
struct Run {
    command: Command,
    cfg: Config,
    out: Option<PathBuf>,
}

impl Run {
    fn seed(&self) -> Result<u64> {
        self.cfg.get_or("seed", 0u64)
    }

    fn comment(&self) -> String {
        format!("pbnn {} {}", self.command.name(), self.cfg.provenance())
    }

    fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
        Ok(match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
            })?)),
            None => Box::new(std::io::stdout().lock()),
        })
    }

    fn emit(&self, header: Vec<String>, rows: &[Vec<f64>]) -> Result<()> {
        data::write_table(Self::writer(self.out.as_deref())?, &self.comment(), &header, rows)
    }

    /// `grid.min`, `grid.max`, `grid.n`.
    fn grid(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        let lo = self.cfg.get_or("grid.min", lo)?;
        let hi = self.cfg.get_or("grid.max", hi)?;
        let n = self.cfg.get_or("grid.n", n)?;
        if n == 0 || !(hi >= lo) {
            return Err(Error::Config(format!("bad grid [{lo}, {hi}] with {n} points")));
        }
        Ok(linspace(lo, hi, n))
    }

    fn data(&self) -> Result<Table> {
        let path = self.cfg.require_str("data")?;
        let table = data::read_table_path(Path::new(&path))?;
        if table.width() < 2 {
            return Err(Error::Config("training CSV needs feature columns and a target column".into()));
        }
        Ok(table)
    }
}

fn headers(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for entry in &cli.set {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{entry}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    let run = Run {
        command: cli.command,
        cfg,
        out: cli.out,
    };
    match cli.command {
        Command::Gram => cmd_gram(&run),
        Command::McVerify => cmd_mc_verify(&run),
        Command::Sweep => cmd_sweep(&run),
        Command::TriangleError => cmd_triangle_error(&run),
        Command::GpFit => cmd_gp_fit(&run),
        Command::BnnFit => cmd_bnn(&run, false),
        Command::BnnHmc => cmd_bnn(&run, true),
        Command::BananaGen => cmd_banana_gen(&run),
        Command::Regress1d => cmd_regress_1d(&run),
    }
}

fn mc_config(run: &Run, default_k: usize) -> Result<McConfig> {
    Ok(McConfig {
        activation: run.cfg.activation(ActivationKind::Sin)?,
        prior: run.cfg.prior("normal")?,
        hidden_units: run.cfg.get_or("hidden_units", default_k)?,
        seed: run.seed()?,
        input_dim: 1,
    })
}

fn kernel_or_dual(run: &Run, prior: &WeightPrior) -> Result<KernelSpec> {
    match run.cfg.kernel()? {
        Some(k) => Ok(k),
        None => kernel_for_prior(prior),
    }
}

fn cmd_gram(run: &Run) -> Result<()> {
    let mode = run.cfg.get_or("mode", "closed".to_string())?;
    let grid = run.grid(-3.0, 3.0, 13)?;
    let xs = column(&grid);
    let g = match mode.as_str() {
        "closed" => {
            let kernel = run
                .cfg
                .kernel()?
                .ok_or_else(|| Error::Config("closed-form gram needs `kernel.family`".into()))?;
            run.cfg.check_unused()?;
            kernels::gram(&kernel, &xs, &xs)?
        }
        "mc" => {
            let mc = mc_config(run, 1000)?;
            run.cfg.check_unused()?;
            mc_kernel::mc_gram(&mc, &xs)? / mc_kernel::kernel_normalizer(mc.activation)
        }
        other => return Err(Error::Config(format!("unknown gram mode `{other}` (closed or mc)"))),
    };
    run.emit(grid.iter().map(|x| format_number(*x)).collect(), &kernels::rows(&g))
}

fn cmd_mc_verify(run: &Run) -> Result<()> {
    let mc = mc_config(run, 5000)?;
    let kernel = kernel_or_dual(run, &mc.prior)?;
    let lags = run.grid(0.0, 5.0, 11)?;
    run.cfg.check_unused()?;
    let rows: Vec<Vec<f64>> = mc_kernel::mc_verify(&mc, &kernel, &lags)?
        .into_iter()
        .map(|r| vec![r.r, r.kappa_mc, r.kappa_closed, r.abs_err])
        .collect();
    run.emit(headers(&["r", "kappa_mc", "kappa_closed", "abs_err"]), &rows)
}

fn cmd_sweep(run: &Run) -> Result<()> {
    let activation = run.cfg.activation(ActivationKind::Sin)?;
    let prior = run.cfg.prior("normal")?;
    let kernel = kernel_or_dual(run, &prior)?;
    let ks = run.cfg.get_list_or("hidden_units", &[5usize, 10, 50, 100, 500, 1000, 5000])?;
    let repeats = run.cfg.get_or("repeats", 5usize)?;
    let grid = run.grid(-3.0, 3.0, 13)?;
    let seed = run.seed()?;
    run.cfg.check_unused()?;
    let rows: Vec<Vec<f64>> = mc_kernel::convergence_sweep(activation, &prior, &kernel, &ks, &grid, repeats, seed)?
        .into_iter()
        .map(|r| vec![r.hidden_units as f64, r.mae_mean, r.mae_std])
        .collect();
    run.emit(headers(&["K", "mae_mean", "mae_std"]), &rows)
}

fn cmd_triangle_error(run: &Run) -> Result<()> {
    let prior = run.cfg.prior("normal")?;
    let terms = run.cfg.get_or("terms", 100usize)?;
    let grid = run.grid(0.0, 5.0, 51)?;
    run.cfg.check_unused()?;
    let rows: Vec<Vec<f64>> = mc_kernel::triangle_truncation_error(&prior, &grid, terms)?
        .into_iter()
        .map(|r| vec![r.r, r.first_component, r.truncated_mixture, r.abs_diff])
        .collect();
    run.emit(headers(&["r", "first_component", "truncated_mixture", "abs_diff"]), &rows)
}

/// Points to predict at: a `predict` CSV, a 1D grid, or the training inputs.
fn prediction_inputs(run: &Run, train: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = train.ncols();
    if let Some(path) = run.cfg.get_str("predict") {
        let table = data::read_table_path(Path::new(&path))?;
        if table.width() < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: table.width(),
            });
        }
        return Ok(table.columns(0..d));
    }
    if d == 1 {
        let lo = train.min();
        let hi = train.max();
        let pad = 0.5 * (hi - lo).max(1.0);
        return Ok(column(&run.grid(lo - pad, hi + pad, 101)?));
    }
    Ok(train.clone())
}

fn feature_names(table: &Table) -> Vec<String> {
    table.header[..table.width() - 1].to_vec()
}

fn cmd_gp_fit(run: &Run) -> Result<()> {
    let table = run.data()?;
    let d = table.width() - 1;
    let kernel = match run.cfg.kernel()? {
        Some(k) => k,
        None => KernelSpec::matern(1.5, 1.0, 1.0)?,
    };
    let noise_var = run.cfg.require("noise_var")?;
    let xs = table.columns(0..d);
    let ys = DVector::from_vec(table.column(d));
    let xs_star = prediction_inputs(run, &xs)?;
    run.cfg.check_unused()?;
    let post = gp::gp_fit(&kernel, &xs, &ys, noise_var)?;
    let (mean, var) = gp::gp_predict(&post, &xs_star)?;
    eprintln!("log_marginal_likelihood={}", format_number(post.log_marginal_likelihood));
    let rows: Vec<Vec<f64>> = (0..xs_star.nrows())
        .map(|i| {
            let mut r: Vec<f64> = xs_star.row(i).iter().copied().collect();
            r.extend([mean[i], var[i]]);
            r
        })
        .collect();
    let mut header = feature_names(&table);
    header.extend(headers(&["mean", "var"]));
    run.emit(header, &rows)
}

struct BnnSettings {
    model: BnnModel,
    hidden_units: usize,
    init: InitOptions,
}

fn bnn_settings(run: &Run, default_prior: &str) -> Result<BnnSettings> {
    let activation = run.cfg.activation(ActivationKind::Sin)?;
    let prior = run.cfg.prior(default_prior)?;
    Ok(BnnSettings {
        model: BnnModel::new(activation, prior),
        hidden_units: run.cfg.get_or("hidden_units", 30usize)?,
        init: InitOptions {
            lengthscale: run.cfg.get_or("lengthscale_init", 1.0)?,
            noise_std: run.cfg.get_or("noise_init", 1.0)?,
        },
    })
}

fn hmc_config(run: &Run) -> Result<HmcConfig> {
    let defaults = HmcConfig::default();
    Ok(HmcConfig {
        chains: run.cfg.get_or("chains", defaults.chains)?,
        warmup: run.cfg.get_or("warmup", defaults.warmup)?,
        iters: run.cfg.get_or("iters", defaults.iters)?,
        leapfrog_steps: run.cfg.get_or("leapfrog_steps", defaults.leapfrog_steps)?,
        seed: run.seed()?,
        ..defaults
    })
}

/// Builds the task from a training table; `task` is regression or classification.
fn task_from_table(run: &Run, table: &Table) -> Result<TaskSpec> {
    let d = table.width() - 1;
    let xs = table.columns(0..d);
    let y = table.column(d);
    match run.cfg.get_or("task", "regression".to_string())?.as_str() {
        "regression" => TaskSpec::regression(xs, y),
        "classification" => {
            let labels = y
                .iter()
                .map(|v| {
                    if *v >= 0.0 && v.fract() == 0.0 {
                        Ok(*v as usize)
                    } else {
                        Err(Error::Config(format!("class label `{v}` is not a non-negative integer")))
                    }
                })
                .collect::<Result<Vec<usize>>>()?;
            let inferred = labels.iter().max().map_or(2, |m| (m + 1).max(2));
            let classes = run.cfg.get_or("classes", inferred)?;
            TaskSpec::classification(xs, labels, classes)
        }
        other => Err(Error::Config(format!("unknown task `{other}` (regression or classification)"))),
    }
}

/// Columns `features…, mean, variance, entropy`; classification `mean` is
/// the probability of class 1 for two classes and of the most probable class
/// otherwise, with per-class probabilities appended.
fn prediction_rows(
    features: &[String],
    xs: &DMatrix<f64>,
    points: &[PredictivePoint],
    kind: TaskKind,
) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = features.to_vec();
    header.extend(headers(&["mean", "variance", "entropy"]));
    let classes = match kind {
        TaskKind::Classification { classes } if classes > 2 => classes,
        _ => 0,
    };
    header.extend((0..classes).map(|c| format!("p{c}")));
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r: Vec<f64> = xs.row(i).iter().copied().collect();
            let (mean, entropy) = match kind {
                TaskKind::Regression => (
                    p.mean[0],
                    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * p.marginal_variance).ln(),
                ),
                TaskKind::Classification { classes: 2 } => (p.mean[1], p.entropy.unwrap_or(f64::NAN)),
                TaskKind::Classification { .. } => (
                    p.mean.iter().copied().fold(0.0, f64::max),
                    p.entropy.unwrap_or(f64::NAN),
                ),
            };
            r.extend([mean, p.marginal_variance, entropy]);
            if classes > 0 {
                r.extend(&p.mean);
            }
            r
        })
        .collect();
    (header, rows)
}

fn cmd_bnn(run: &Run, sample: bool) -> Result<()> {
    let table = run.data()?;
    let task = task_from_table(run, &table)?;
    let settings = bnn_settings(run, "normal")?;
    let xs_star = prediction_inputs(run, &task.inputs)?;
    let draws = if sample {
        let hmc = hmc_config(run)?;
        run.cfg.check_unused()?;
        let samples = bnn::hmc_sample(&task, &settings.model, settings.hidden_units, settings.init, &hmc)?;
        for (i, c) in samples.chains.iter().enumerate() {
            eprintln!(
                "chain={i} accept_rate={:.3} step_size={:.4} divergences={}",
                c.accept_rate, c.step_size, c.divergences
            );
        }
        samples.draws
    } else {
        let map_cfg = MapConfig {
            iterations: run.cfg.get_or("iters", 2000usize)?,
            initial_step: run.cfg.get_or("step", MapConfig::default().initial_step)?,
            ..MapConfig::default()
        };
        let seed = run.seed()?;
        run.cfg.check_unused()?;
        let init = bnn::bnn_init(
            seed,
            task.inputs.ncols(),
            settings.hidden_units,
            task.kind().outputs(),
            &settings.model.prior,
            settings.init,
        )?;
        let fit = bnn::map_fit(&init, &task, &settings.model, &map_cfg)?;
        eprintln!(
            "initial_loss={} final_loss={} steps={}",
            format_number(fit.trace[0]),
            format_number(*fit.trace.last().unwrap_or(&f64::NAN)),
            fit.trace.len() - 1
        );
        vec![fit.params]
    };
    let points = bnn::predictive(&draws, settings.model.activation, &xs_star, task.kind(), None)?;
    let (header, rows) = prediction_rows(&feature_names(&table), &xs_star, &points, task.kind());
    run.emit(header, &rows)
}

fn cmd_banana_gen(run: &Run) -> Result<()> {
    let n = run.cfg.get_or("n_per_class", 100usize)?;
    let noise = run.cfg.get_or("noise_std", 0.1)?;
    let seed = run.seed()?;
    run.cfg.check_unused()?;
    let (xs, labels) = data::banana(n, noise, seed)?;
    let rows: Vec<Vec<f64>> = xs
        .row_iter()
        .zip(&labels)
        .map(|(r, l)| vec![r[0], r[1], *l as f64])
        .collect();
    run.emit(headers(&["x1", "x2", "label"]), &rows)
}

/// Minimum over the two grid ends of latent variance over prior variance.
fn edge_ratio(latent_var: &[f64], prior_var: f64) -> f64 {
    let first = latent_var.first().copied().unwrap_or(f64::NAN);
    let last = latent_var.last().copied().unwrap_or(f64::NAN);
    first.min(last) / prior_var
}

fn gaussian_nlpd(y: f64, mean: f64, var: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * var).ln() + (y - mean).powi(2) / (2.0 * var)
}

fn metrics_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".metrics.csv");
    out.with_file_name(name)
}

fn cmd_regress_1d(run: &Run) -> Result<()> {
    const GP_REVERSION: f64 = 0.999;
    const BNN_REVERSION: f64 = 0.8;
    let table = run.data()?;
    if table.width() != 2 {
        return Err(Error::Config("regress-1d expects a CSV with columns x, y".into()));
    }
    let model = run.cfg.get_or("model", "gp".to_string())?;
    let (use_gp, use_bnn) = match model.as_str() {
        "gp" => (true, false),
        "bnn" => (false, true),
        "both" => (true, true),
        other => return Err(Error::Config(format!("unknown model `{other}` (gp, bnn or both)"))),
    };
    let grid = run.grid(-15.0, 15.0, 121)?;
    let check = run.cfg.get_or("assert_reversion", true)?;
    let xs = table.columns(0..1);
    let ys = table.column(1);
    let xs_star = column(&grid);
    let n = ys.len() as f64;

    let gp_settings = if use_gp {
        let kernel = match run.cfg.kernel()? {
            Some(k) => k,
            None => KernelSpec::matern(1.5, 1.0, 1.0)?,
        };
        Some((kernel, run.cfg.require("noise_var")?))
    } else {
        None
    };
    let bnn_settings = if use_bnn {
        Some((bnn_settings(run, "student-t")?, hmc_config(run)?))
    } else {
        None
    };
    run.cfg.check_unused()?;

    let mut header = vec!["x".to_string()];
    let mut columns: Vec<Vec<f64>> = vec![grid.clone()];
    let mut metrics: Vec<Vec<String>> = Vec::new();
    let mut failures = Vec::new();

    if let Some((kernel, noise_var)) = gp_settings {
        let post = gp::gp_fit(&kernel, &xs, &DVector::from_vec(ys.clone()), noise_var)?;
        let (mean, var) = gp::gp_predict(&post, &xs_star)?;
        let (train_mean, train_var) = gp::gp_predict(&post, &xs)?;
        let rmse = (ys.iter().zip(train_mean.iter()).map(|(y, m)| (y - m).powi(2)).sum::<f64>() / n).sqrt();
        let nlpd = ys
            .iter()
            .enumerate()
            .map(|(i, y)| gaussian_nlpd(*y, train_mean[i], train_var[i] + noise_var))
            .sum::<f64>()
            / n;
        let ratio = edge_ratio(var.as_slice(), kernel.variance);
        if ratio < GP_REVERSION {
            failures.push(format!("gp edge variance ratio {ratio:.4} < {GP_REVERSION}"));
        }
        metrics.push(vec!["gp".into(), format_number(rmse), format_number(nlpd), format_number(ratio)]);
        header.extend(headers(&["gp_mean", "gp_var"]));
        columns.push(mean.as_slice().to_vec());
        columns.push(var.as_slice().to_vec());
    }

    if let Some((settings, hmc)) = bnn_settings {
        let task = TaskSpec::regression(xs.clone(), ys.clone())?;
        let samples = bnn::hmc_sample(&task, &settings.model, settings.hidden_units, settings.init, &hmc)?;
        let pts = bnn::predictive(&samples.draws, settings.model.activation, &xs_star, TaskKind::Regression, None)?;
        let train = bnn::predictive(&samples.draws, settings.model.activation, &xs, TaskKind::Regression, Some(&ys))?;
        let rmse = (train.iter().zip(&ys).map(|(p, y)| (p.mean[0] - y).powi(2)).sum::<f64>() / n).sqrt();
        let nlpd = train.iter().map(|p| p.nlpd.unwrap_or(f64::NAN)).sum::<f64>() / n;
        // The network prior is dual to a unit-variance kernel.
        let latent: Vec<f64> = pts.iter().map(|p| p.latent_variance).collect();
        let ratio = edge_ratio(&latent, 1.0);
        if ratio < BNN_REVERSION {
            failures.push(format!("bnn edge variance ratio {ratio:.4} < {BNN_REVERSION}"));
        }
        metrics.push(vec!["bnn".into(), format_number(rmse), format_number(nlpd), format_number(ratio)]);
        header.extend(headers(&["bnn_mean", "bnn_var"]));
        columns.push(pts.iter().map(|p| p.mean[0]).collect());
        columns.push(pts.iter().map(|p| p.marginal_variance).collect());
    }

    let rows: Vec<Vec<f64>> = (0..grid.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    run.emit(header, &rows)?;

    let metric_header = headers(&["model", "rmse", "nlpd", "edge_var_ratio"]);
    match &run.out {
        Some(out) => data::write_records(Run::writer(Some(&metrics_path(out)))?, &run.comment(), &metric_header, &metrics)?,
        None => data::write_records(std::io::stderr().lock(), &run.comment(), &metric_header, &metrics)?,
    }
    if check && !failures.is_empty() {
        return Err(Error::Property(failures.join("; ")));
    }
    Ok(())
}

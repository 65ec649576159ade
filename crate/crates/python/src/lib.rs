//! Python bindings. Matrices cross the boundary as lists of rows.

use nalgebra::{DMatrix, DVector};
use periodic_bnn::bnn::{self, BnnModel, BnnParams, HmcConfig, InitOptions, MapConfig, TaskKind, TaskSpec};
use periodic_bnn::gp::{self, GpPosterior};
use periodic_bnn::mc_kernel::{self, McConfig};
use periodic_bnn::spectral::{self, PriorFamily};
use periodic_bnn::{ActivationKind, KernelFamily, KernelSpec, WeightPrior};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: periodic_bnn::Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e.category() {
        "invalid-parameter" | "dimension-mismatch" | "non-finite-input" | "config" => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("ragged matrix: rows differ in length"));
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    periodic_bnn::kernels::rows(m)
}

fn activation(name: &str) -> PyResult<ActivationKind> {
    name.parse().map_err(py_err)
}

#[pyclass(name = "Kernel", module = "periodic_bnn_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(KernelSpec);

#[pymethods]
impl PyKernel {
    #[staticmethod]
    #[pyo3(signature = (nu, lengthscale=1.0, variance=1.0))]
    fn matern(nu: f64, lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::matern(nu, lengthscale, variance).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (lengthscale=1.0, variance=1.0))]
    fn rbf(lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::rbf(lengthscale, variance).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (lengthscale=1.0, variance=1.0))]
    fn exponential(lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::exponential(lengthscale, variance).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (order=1, lengthscale=1.0, variance=1.0))]
    fn arccos(order: u8, lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::new(KernelFamily::ArcCos { order }, lengthscale, variance).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (sigma0=1.0, sigma=1.0, lengthscale=1.0, variance=1.0))]
    fn sigmoid_nn(sigma0: f64, sigma: f64, lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::new(KernelFamily::SigmoidNn { sigma0, sigma }, lengthscale, variance)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (nu, sigma_m, lengthscale=1.0, variance=1.0))]
    fn locally_stationary_matern(nu: f64, sigma_m: f64, lengthscale: f64, variance: f64) -> PyResult<Self> {
        KernelSpec::new(KernelFamily::LocallyStationaryMatern { nu, sigma_m }, lengthscale, variance)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn lengthscale(&self) -> f64 {
        self.0.lengthscale
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    fn __call__(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        periodic_bnn::kernel_eval(&self.0, &x, &y).map_err(py_err)
    }

    #[pyo3(signature = (xs, ys=None))]
    fn gram(&self, xs: Vec<Vec<f64>>, ys: Option<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let a = matrix(&xs)?;
        let b = match ys {
            Some(ys) => matrix(&ys)?,
            None => a.clone(),
        };
        periodic_bnn::gram(&self.0, &a, &b).map(|g| to_rows(&g)).map_err(py_err)
    }

    /// Weight prior whose characteristic function is this kernel.
    fn prior(&self) -> PyResult<PyPrior> {
        spectral::prior_for_kernel(&self.0).map(PyPrior).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, lengthscale={}, variance={})", self.0.family, self.0.lengthscale, self.0.variance)
    }
}

#[pyclass(name = "Prior", module = "periodic_bnn_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPrior(WeightPrior);

#[pymethods]
impl PyPrior {
    #[staticmethod]
    #[pyo3(signature = (scale=1.0))]
    fn normal(scale: f64) -> PyResult<Self> {
        WeightPrior::new(PriorFamily::Normal, scale).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (scale=1.0))]
    fn cauchy(scale: f64) -> PyResult<Self> {
        WeightPrior::new(PriorFamily::Cauchy, scale).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (dof, scale=1.0))]
    fn student_t(dof: f64, scale: f64) -> PyResult<Self> {
        WeightPrior::new(PriorFamily::StudentT { dof }, scale).map(Self).map_err(py_err)
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale
    }

    fn log_pdf(&self, w: f64) -> PyResult<f64> {
        periodic_bnn::prior_log_pdf(&self.0, w).map_err(py_err)
    }

    fn sample(&self, seed: u64, n: usize) -> PyResult<Vec<f64>> {
        periodic_bnn::prior_sample(&self.0, seed, n).map_err(py_err)
    }

    /// Kernel value at lag `r` by numerical Fourier integration.
    fn kernel_at(&self, r: f64) -> PyResult<f64> {
        periodic_bnn::wiener_khinchin_numeric(&self.0, r).map_err(py_err)
    }

    fn kernel(&self) -> PyResult<PyKernel> {
        spectral::kernel_for_prior(&self.0).map(PyKernel).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Prior({:?}, scale={})", self.0.family, self.0.scale)
    }
}

#[pyfunction]
fn activate(name: &str, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let kind = activation(name)?;
    Ok(xs.into_iter().map(|x| periodic_bnn::activate(kind, x)).collect())
}

#[pyfunction]
fn activate_grad(name: &str, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let kind = activation(name)?;
    Ok(xs.into_iter().map(|x| periodic_bnn::activate_grad(kind, x)).collect())
}

/// Normalised Monte-Carlo Gram matrix of a random single-layer network.
#[pyfunction]
#[pyo3(signature = (activation_name, prior, xs, hidden_units=1000, seed=0))]
fn mc_gram(
    activation_name: &str,
    prior: &PyPrior,
    xs: Vec<Vec<f64>>,
    hidden_units: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let xs = matrix(&xs)?;
    let act = activation(activation_name)?;
    let cfg = McConfig {
        activation: act,
        prior: prior.0,
        hidden_units,
        seed,
        input_dim: xs.ncols(),
    };
    let g = mc_kernel::mc_gram(&cfg, &xs).map_err(py_err)?;
    Ok(to_rows(&(g / mc_kernel::kernel_normalizer(act))))
}

#[pyclass(name = "GaussianProcess", module = "periodic_bnn_py", frozen)]
struct PyGp(GpPosterior);

#[pymethods]
impl PyGp {
    #[new]
    #[pyo3(signature = (kernel, xs, ys, noise_var=1e-2))]
    fn new(kernel: &PyKernel, xs: Vec<Vec<f64>>, ys: Vec<f64>, noise_var: f64) -> PyResult<Self> {
        gp::gp_fit(&kernel.0, &matrix(&xs)?, &DVector::from_vec(ys), noise_var)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn log_marginal_likelihood(&self) -> f64 {
        self.0.log_marginal_likelihood
    }

    /// Latent mean and variance at each row of `xs`.
    fn predict(&self, xs: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (mean, var) = gp::gp_predict(&self.0, &matrix(&xs)?).map_err(py_err)?;
        Ok((mean.as_slice().to_vec(), var.as_slice().to_vec()))
    }
}

#[pyclass(name = "BnnParams", module = "periodic_bnn_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams(BnnParams);

#[pymethods]
impl PyParams {
    #[getter]
    fn hidden_units(&self) -> usize {
        self.0.shape().hidden_units
    }

    #[getter]
    fn lengthscale(&self) -> f64 {
        self.0.lengthscale()
    }

    #[getter]
    fn noise_std(&self) -> f64 {
        self.0.noise_std()
    }

    #[getter]
    fn biases(&self) -> Vec<f64> {
        self.0.biases().as_slice().to_vec()
    }

    /// Flat parameter vector (weights, raw biases, readout, readout bias, log ℓ, log s).
    fn to_list(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    fn forward(&self, activation_name: &str, xs: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        bnn::bnn_forward(&self.0, activation(activation_name)?, &matrix(&xs)?)
            .map(|f| to_rows(&f))
            .map_err(py_err)
    }
}

#[pyclass(name = "Prediction", module = "periodic_bnn_py", frozen, get_all)]
struct PyPrediction {
    mean: Vec<Vec<f64>>,
    variance: Vec<f64>,
    latent_variance: Vec<f64>,
    entropy: Option<Vec<f64>>,
    nlpd: Option<Vec<f64>>,
}

/// Regression when `classes` is None, otherwise integer labels in `ys`.
fn task(xs: Vec<Vec<f64>>, ys: Vec<f64>, classes: Option<usize>) -> PyResult<TaskSpec> {
    let xs = matrix(&xs)?;
    match classes {
        None => TaskSpec::regression(xs, ys),
        Some(c) => {
            if ys.iter().any(|y| y.fract() != 0.0 || *y < 0.0) {
                return Err(PyValueError::new_err("class labels must be non-negative integers"));
            }
            TaskSpec::classification(xs, ys.iter().map(|y| *y as usize).collect(), c)
        }
    }
    .map_err(py_err)
}

fn kind(classes: Option<usize>) -> TaskKind {
    classes.map_or(TaskKind::Regression, |classes| TaskKind::Classification { classes })
}

fn model(activation_name: &str, prior: &PyPrior) -> PyResult<BnnModel> {
    Ok(BnnModel::new(activation(activation_name)?, prior.0))
}

fn predict_draws(
    draws: &[BnnParams],
    act: ActivationKind,
    xs: Vec<Vec<f64>>,
    classes: Option<usize>,
    targets: Option<Vec<f64>>,
) -> PyResult<PyPrediction> {
    let points = bnn::predictive(draws, act, &matrix(&xs)?, kind(classes), targets.as_deref()).map_err(py_err)?;
    let optional = |f: fn(&bnn::PredictivePoint) -> Option<f64>| points.iter().map(f).collect::<Option<Vec<_>>>();
    Ok(PyPrediction {
        mean: points.iter().map(|p| p.mean.clone()).collect(),
        variance: points.iter().map(|p| p.marginal_variance).collect(),
        latent_variance: points.iter().map(|p| p.latent_variance).collect(),
        entropy: optional(|p| p.entropy),
        nlpd: optional(|p| p.nlpd),
    })
}

#[pyfunction]
#[pyo3(signature = (seed, input_dim, hidden_units, outputs, prior, lengthscale=1.0, noise_std=1.0))]
fn bnn_init(
    seed: u64,
    input_dim: usize,
    hidden_units: usize,
    outputs: usize,
    prior: &PyPrior,
    lengthscale: f64,
    noise_std: f64,
) -> PyResult<PyParams> {
    let options = InitOptions { lengthscale, noise_std };
    bnn::bnn_init(seed, input_dim, hidden_units, outputs, &prior.0, options)
        .map(PyParams)
        .map_err(py_err)
}

/// Negative log joint density of `params` given the data.
#[pyfunction]
#[pyo3(signature = (params, activation_name, prior, xs, ys, classes=None))]
fn neg_log_joint(
    params: &PyParams,
    activation_name: &str,
    prior: &PyPrior,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    classes: Option<usize>,
) -> PyResult<f64> {
    bnn::neg_log_joint(&params.0, &task(xs, ys, classes)?, &model(activation_name, prior)?).map_err(py_err)
}

/// Gradient-descent MAP fit. Returns the fitted parameters and the loss trace.
#[pyfunction]
#[pyo3(signature = (init, activation_name, prior, xs, ys, classes=None, iterations=2000, step=1e-3))]
#[allow(clippy::too_many_arguments)]
fn map_fit(
    py: Python<'_>,
    init: &PyParams,
    activation_name: &str,
    prior: &PyPrior,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    classes: Option<usize>,
    iterations: usize,
    step: f64,
) -> PyResult<(PyParams, Vec<f64>)> {
    let task = task(xs, ys, classes)?;
    let model = model(activation_name, prior)?;
    let cfg = MapConfig {
        iterations,
        initial_step: step,
        ..MapConfig::default()
    };
    let fit = py
        .detach(|| bnn::map_fit(&init.0, &task, &model, &cfg))
        .map_err(py_err)?;
    Ok((PyParams(fit.params), fit.trace))
}

#[pyclass(name = "Posterior", module = "periodic_bnn_py", frozen)]
struct PyPosterior {
    draws: Vec<BnnParams>,
    activation: ActivationKind,
    classes: Option<usize>,
    accept_rates: Vec<f64>,
    step_sizes: Vec<f64>,
    divergences: Vec<usize>,
}

#[pymethods]
impl PyPosterior {
    fn __len__(&self) -> usize {
        self.draws.len()
    }

    #[getter]
    fn accept_rates(&self) -> Vec<f64> {
        self.accept_rates.clone()
    }

    #[getter]
    fn step_sizes(&self) -> Vec<f64> {
        self.step_sizes.clone()
    }

    #[getter]
    fn divergences(&self) -> Vec<usize> {
        self.divergences.clone()
    }

    fn draw(&self, i: usize) -> PyResult<PyParams> {
        self.draws
            .get(i)
            .cloned()
            .map(PyParams)
            .ok_or_else(|| PyValueError::new_err(format!("draw {i} out of range")))
    }

    #[pyo3(signature = (xs, targets=None))]
    fn predict(&self, xs: Vec<Vec<f64>>, targets: Option<Vec<f64>>) -> PyResult<PyPrediction> {
        predict_draws(&self.draws, self.activation, xs, self.classes, targets)
    }
}

#[pyfunction]
#[pyo3(signature = (
    activation_name, prior, xs, ys, classes=None, hidden_units=30,
    chains=4, warmup=1000, iters=1000, leapfrog_steps=32, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn hmc_sample(
    py: Python<'_>,
    activation_name: &str,
    prior: &PyPrior,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    classes: Option<usize>,
    hidden_units: usize,
    chains: usize,
    warmup: usize,
    iters: usize,
    leapfrog_steps: usize,
    seed: u64,
) -> PyResult<PyPosterior> {
    let task = task(xs, ys, classes)?;
    let model = model(activation_name, prior)?;
    let cfg = HmcConfig {
        chains,
        warmup,
        iters,
        leapfrog_steps,
        seed,
        ..HmcConfig::default()
    };
    let samples = py
        .detach(|| bnn::hmc_sample(&task, &model, hidden_units, InitOptions::default(), &cfg))
        .map_err(py_err)?;
    Ok(PyPosterior {
        activation: model.activation,
        classes,
        accept_rates: samples.chains.iter().map(|c| c.accept_rate).collect(),
        step_sizes: samples.chains.iter().map(|c| c.step_size).collect(),
        divergences: samples.chains.iter().map(|c| c.divergences).collect(),
        draws: samples.draws,
    })
}

/// Predictive summaries from a single parameter set (e.g. a MAP fit).
#[pyfunction]
#[pyo3(signature = (params, activation_name, xs, classes=None, targets=None))]
fn predict(
    params: &PyParams,
    activation_name: &str,
    xs: Vec<Vec<f64>>,
    classes: Option<usize>,
    targets: Option<Vec<f64>>,
) -> PyResult<PyPrediction> {
    predict_draws(std::slice::from_ref(&params.0), activation(activation_name)?, xs, classes, targets)
}

/// Two interleaved half-moons. Returns points and labels.
#[pyfunction]
#[pyo3(signature = (n_per_class=100, noise_std=0.1, seed=0))]
fn banana(n_per_class: usize, noise_std: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let (xs, labels) = periodic_bnn::data::banana(n_per_class, noise_std, seed).map_err(py_err)?;
    Ok((to_rows(&xs), labels))
}

#[pymodule]
fn periodic_bnn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PyGp>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyPrediction>()?;
    m.add_class::<PyPosterior>()?;
    m.add_function(wrap_pyfunction!(activate, m)?)?;
    m.add_function(wrap_pyfunction!(activate_grad, m)?)?;
    m.add_function(wrap_pyfunction!(mc_gram, m)?)?;
    m.add_function(wrap_pyfunction!(bnn_init, m)?)?;
    m.add_function(wrap_pyfunction!(neg_log_joint, m)?)?;
    m.add_function(wrap_pyfunction!(map_fit, m)?)?;
    m.add_function(wrap_pyfunction!(hmc_sample, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(banana, m)?)?;
    Ok(())
}

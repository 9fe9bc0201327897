//! Python bindings: interpolation primitives, dataset recipes, model
//! building, training and the benchmark entry points.

use std::path::PathBuf;

use chebyshev_lagrange::activations::{ActivationSpec, Variant, DEFAULT_REGRESSION_K};
use chebyshev_lagrange::autodiff::Tensor;
use chebyshev_lagrange::bench::{
    checkpoint, cmd_run, cmd_slice, gradcheck, results_to_json, RunConfig,
};
use chebyshev_lagrange::cheby::{self, make_grid, TailMode};
use chebyshev_lagrange::data::{self, DatasetSpec, Recipe};
use chebyshev_lagrange::models::{self, ModelSpec};
use chebyshev_lagrange::rng::{stream, SeededRng};
use chebyshev_lagrange::training::{self, TrainConfig, TrainOptions};
use chebyshev_lagrange::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn variant(name: &str) -> PyResult<Variant> {
    name.parse().map_err(py_err)
}

fn recipe(name: &str) -> PyResult<Recipe> {
    name.parse().map_err(py_err)
}

fn tail_mode(mode: &str, k: usize) -> PyResult<TailMode> {
    match mode {
        "extrapolate" => Ok(TailMode::Extrapolate),
        "regression" => Ok(TailMode::Regression { k }),
        other => Err(PyValueError::new_err(format!(
            "unknown tail mode '{other}'"
        ))),
    }
}

fn grid_for(y: &[f64], scaled: bool) -> PyResult<cheby::ChebyshevGrid> {
    if y.is_empty() {
        return Err(PyValueError::new_err("need at least one node value"));
    }
    make_grid(y.len() - 1, scaled).map_err(py_err)
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    t.data()
        .chunks(t.cols().max(1))
        .map(<[f64]>::to_vec)
        .collect()
}

/// Node positions in descending order.
#[pyfunction]
#[pyo3(signature = (degree, scaled = true))]
fn chebyshev_nodes(degree: usize, scaled: bool) -> PyResult<Vec<f64>> {
    Ok(make_grid(degree, scaled).map_err(py_err)?.nodes().to_vec())
}

/// Evaluates the interpolant through `(x_j, y[j])` at `v`.
#[pyfunction]
#[pyo3(signature = (y, v, scaled = true))]
fn lagrange_eval(y: Vec<f64>, v: f64, scaled: bool) -> PyResult<f64> {
    cheby::lagrange_eval(&grid_for(&y, scaled)?, &y, v).map_err(py_err)
}

/// Derivative of the interpolant at `c`.
#[pyfunction]
#[pyo3(signature = (y, c, scaled = true))]
fn lagrange_grad(y: Vec<f64>, c: f64, scaled: bool) -> PyResult<f64> {
    cheby::lagrange_grad(&grid_for(&y, scaled)?, &y, c).map_err(py_err)
}

/// `(m_minus, m_plus)` for the given tail mode.
#[pyfunction]
#[pyo3(signature = (y, mode = "extrapolate", k = DEFAULT_REGRESSION_K))]
fn tail_slopes(y: Vec<f64>, mode: &str, k: usize) -> PyResult<(f64, f64)> {
    let s = cheby::tail_slopes(&grid_for(&y, true)?, &y, tail_mode(mode, k)?).map_err(py_err)?;
    Ok((s.m_minus, s.m_plus))
}

/// Interpolant inside `[-1, 1]`, linear tails outside.
#[pyfunction]
#[pyo3(signature = (y, v, mode = "extrapolate", k = DEFAULT_REGRESSION_K))]
fn cl_piecewise(y: Vec<f64>, v: f64, mode: &str, k: usize) -> PyResult<f64> {
    cheby::cl_piecewise(&grid_for(&y, true)?, &y, tail_mode(mode, k)?, v).map_err(py_err)
}

#[pyfunction]
fn error_bound(n: usize, max_deriv: f64) -> PyResult<f64> {
    cheby::cheby_error_bound(n, max_deriv).map_err(py_err)
}

#[pyfunction]
fn recipe_names() -> Vec<&'static str> {
    Recipe::ALL.iter().map(|r| r.name()).collect()
}

#[pyfunction]
fn variant_names() -> Vec<&'static str> {
    Variant::ALL.iter().map(|v| v.name()).collect()
}

#[pyfunction]
fn recipe_eval(name: &str, x: Vec<f64>) -> PyResult<f64> {
    data::recipe_eval(recipe(name)?, &x).map_err(py_err)
}

/// `(x_train, y_train, x_test, y_test)` as nested lists.
#[pyfunction]
#[pyo3(signature = (name, noise_sd = 0.01, seed = 0, n_train = 1000, n_test = 1000))]
#[allow(clippy::type_complexity)]
fn generate(
    name: &str,
    noise_sd: f64,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let spec = DatasetSpec {
        n_train,
        n_test,
        ..DatasetSpec::new(recipe(name)?, noise_sd, seed)
    };
    let d = data::generate(&spec).map_err(py_err)?;
    Ok((
        rows_of(&d.train.x),
        d.train.y.data().to_vec(),
        rows_of(&d.test.x),
        d.test.y.data().to_vec(),
    ))
}

fn build_spec(
    variant_name: &str,
    input_dim: usize,
    width: usize,
    blocks: usize,
    layers_per_block: usize,
    degree: usize,
) -> PyResult<ModelSpec> {
    Ok(ModelSpec {
        width,
        blocks,
        layers_per_block,
        activation: ActivationSpec::new(variant(variant_name)?).with_degree(degree),
        ..ModelSpec::synthetic(input_dim, Variant::Relu)
    })
}

#[pyfunction]
#[pyo3(signature = (variant, input_dim = 3, width = 32, blocks = 3, layers_per_block = 1, degree = 3))]
fn count_params(
    variant: &str,
    input_dim: usize,
    width: usize,
    blocks: usize,
    layers_per_block: usize,
    degree: usize,
) -> PyResult<usize> {
    let spec = build_spec(variant, input_dim, width, blocks, layers_per_block, degree)?;
    spec.validate().map_err(py_err)?;
    Ok(models::count_params(&spec))
}

/// `[(name, max_rel_err, passed)]` over every op and activation variant.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn run_gradcheck(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, f64, bool)>> {
    let report = py
        .detach(|| gradcheck::cmd_gradcheck(seed))
        .map_err(py_err)?;
    Ok(report
        .entries
        .into_iter()
        .map(|e| (e.name, e.max_rel_err, e.passed))
        .collect())
}

/// Runs a benchmark grid from a JSON config and returns the results JSON.
#[pyfunction]
#[pyo3(signature = (config_json, workers = None))]
fn run(py: Python<'_>, config_json: &str, workers: Option<usize>) -> PyResult<String> {
    let config = RunConfig::from_json(config_json).map_err(py_err)?;
    py.detach(|| cmd_run(&config, workers).and_then(|r| results_to_json(&r)))
        .map_err(py_err)
}

/// Residual MLP with a learnable or fixed activation.
#[pyclass(name = "Model")]
struct PyModel {
    inner: models::Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (variant, input_dim = 3, width = 32, blocks = 3, layers_per_block = 1, degree = 3, seed = 0))]
    fn new(
        variant: &str,
        input_dim: usize,
        width: usize,
        blocks: usize,
        layers_per_block: usize,
        degree: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = build_spec(variant, input_dim, width, blocks, layers_per_block, degree)?;
        let inner =
            models::Model::build(spec, &mut SeededRng::new(seed, stream::INIT)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: checkpoint::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.spec().activation.variant.name()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let t = Tensor::from_rows(&x).map_err(py_err)?;
        let out = training::predict_batched(&self.inner, &t).map_err(py_err)?;
        Ok(out.data().to_vec())
    }

    /// Trains on a generated recipe and returns
    /// `{"history", "diverged", "rmse"}`.
    #[pyo3(signature = (dataset, noise_sd = 0.01, seed = 0, epochs = 300))]
    fn fit(
        &mut self,
        py: Python<'_>,
        dataset: &str,
        noise_sd: f64,
        seed: u64,
        epochs: usize,
    ) -> PyResult<(Vec<f64>, bool, Option<f64>)> {
        let spec = DatasetSpec::new(recipe(dataset)?, noise_sd, seed);
        let config = TrainConfig {
            epochs,
            ..TrainConfig::synthetic(seed)
        };
        let model = &mut self.inner;
        py.detach(|| {
            let data = data::generate(&spec)?;
            let outcome = training::train(model, &data.train, &config, &TrainOptions::default())?;
            let rmse = if outcome.diverged {
                None
            } else {
                Some(training::evaluate_rmse(model, &data.test)?)
            };
            Ok((outcome.history, outcome.diverged, rmse))
        })
        .map_err(py_err)
    }

    /// `[(x0, y_true, y_pred)]` along the recipe's slice.
    fn slice(&self, dataset: &str) -> PyResult<Vec<(f64, f64, f64)>> {
        let rows = cmd_slice(&self.inner, recipe(dataset)?).map_err(py_err)?;
        Ok(rows.into_iter().map(|[a, b, c]| (a, b, c)).collect())
    }
}

#[pymodule]
pub fn chebylagrange(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(chebyshev_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(lagrange_eval, m)?)?;
    m.add_function(wrap_pyfunction!(lagrange_grad, m)?)?;
    m.add_function(wrap_pyfunction!(tail_slopes, m)?)?;
    m.add_function(wrap_pyfunction!(cl_piecewise, m)?)?;
    m.add_function(wrap_pyfunction!(error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(recipe_names, m)?)?;
    m.add_function(wrap_pyfunction!(variant_names, m)?)?;
    m.add_function(wrap_pyfunction!(recipe_eval, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(count_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}

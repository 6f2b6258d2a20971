//! Python bindings.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use nqac_core::datasets::{generate_bas as bas, ideal_bas_ll as bas_ll, BasSpec, BinaryDataset};
use nqac_core::metrics::{estimate_beta_eff as fit_beta, MetricRecord};
use nqac_core::nqac::{nest as nest_problem, replica_count as replicas, resource_count as resources, NestingConfig};
use nqac_core::samplers::{sqa_sample, svmc_sample, AnnealSchedule, Bath, Protocol, QuenchSpec, SqaConfig, SvmcConfig};
use nqac_core::trainer::{train as train_model, TrainConfig};
use nqac_core::{enumerate_gibbs, Error, Level, SampleSet, SpinVector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Network(_) | Error::Auth(_) | Error::Protocol(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn spins(x: Vec<i8>) -> PyResult<SpinVector> {
    SpinVector::new(x).map_err(py_err)
}

/// Ising problem `E(x) = sum_i h_i x_i + sum_{i<j} J_ij x_i x_j`.
#[pyclass(name = "IsingProblem", module = "nqac", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyIsingProblem(nqac_core::IsingProblem);

#[pymethods]
impl PyIsingProblem {
    #[new]
    #[pyo3(signature = (fields, couplers = Vec::new()))]
    fn new(fields: Vec<f64>, couplers: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        nqac_core::IsingProblem::from_parts(fields, couplers)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.0.n_vars()
    }

    #[getter]
    fn fields(&self) -> Vec<f64> {
        self.0.fields().to_vec()
    }

    #[getter]
    fn couplers(&self) -> Vec<(usize, usize, f64)> {
        self.0.couplers().collect()
    }

    fn energy(&self, x: Vec<i8>) -> PyResult<f64> {
        self.0.energy(&spins(x)?).map_err(py_err)
    }

    fn scale(&self, alpha: f64) -> PyResult<Self> {
        self.0.scale(alpha).map(Self).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("IsingProblem(n_vars={}, couplers={})", self.0.n_vars(), self.0.n_couplers())
    }
}

/// Gibbs probabilities of every state; bit `i` of the index set means spin `i` is +1.
#[pyfunction]
fn gibbs_probabilities(problem: &PyIsingProblem, beta: f64) -> PyResult<Vec<f64>> {
    Ok(enumerate_gibbs(&problem.0, beta).map_err(py_err)?.probabilities().to_vec())
}

#[pyfunction]
fn exact_log_likelihood(problem: &PyIsingProblem, beta: f64, data: Vec<Vec<i8>>) -> PyResult<f64> {
    let data = data.into_iter().map(spins).collect::<PyResult<Vec<_>>>()?;
    nqac_core::exact_log_likelihood(&problem.0, beta, &data).map_err(py_err)
}

/// Code problem of a `level`-fold nesting with penalty `gamma1`.
#[pyfunction]
fn nest(problem: &PyIsingProblem, level: usize, gamma1: f64) -> PyResult<PyIsingProblem> {
    let cfg = NestingConfig::new(level, gamma1).map_err(py_err)?;
    Ok(PyIsingProblem(nest_problem(&problem.0, cfg).map_err(py_err)?.problem().clone()))
}

#[pyfunction]
fn resource_count(c: usize, n: usize, chain_length: usize) -> usize {
    resources(c, n, chain_length, None).formula
}

#[pyfunction]
#[pyo3(signature = (c, n, shore = 4))]
fn replica_count(c: usize, n: usize, shore: usize) -> usize {
    replicas(c, n, shore)
}

#[pyfunction]
#[pyo3(signature = (d, size, seed = 0))]
fn generate_bas(d: usize, size: usize, seed: u64) -> PyResult<Vec<Vec<i8>>> {
    let data = bas(&BasSpec { d, size, seed }).map_err(py_err)?;
    Ok(data.vectors().iter().map(|x| x.as_slice().to_vec()).collect())
}

#[pyfunction]
fn ideal_bas_ll(d: usize) -> f64 {
    bas_ll(d)
}

/// Monte Carlo reads of `problem` as a dict from spin tuples to counts.
/// `s_hold` fixes the anneal parameter; otherwise a full linear anneal runs.
#[pyfunction]
#[pyo3(signature = (problem, sampler, beta, sweeps, n_reads, seed = 0, s_hold = None, n_slices = 32))]
#[allow(clippy::too_many_arguments)]
fn sample<'py>(
    py: Python<'py>,
    problem: &PyIsingProblem,
    sampler: &str,
    beta: f64,
    sweeps: u64,
    n_reads: usize,
    seed: u64,
    s_hold: Option<f64>,
    n_slices: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let schedule = AnnealSchedule::linear();
    let protocol = match s_hold {
        Some(s) => Protocol::Hold { s },
        None => Protocol::Anneal {
            quench: QuenchSpec::full(),
        },
    };
    let bath = Bath::Beta(beta);
    let set = py.detach(|| match sampler {
        "svmc" => svmc_sample(&problem.0, &schedule, protocol, &SvmcConfig { bath, sweeps, seed }, n_reads),
        "sqa" => sqa_sample(
            &problem.0,
            &schedule,
            protocol,
            &SqaConfig {
                n_slices,
                bath,
                sweeps,
                seed,
            },
            n_reads,
        ),
        other => Err(Error::Config(format!("unknown sampler `{other}`; use sqa or svmc"))),
    })
    .map_err(py_err)?;
    let out = PyDict::new(py);
    for (x, c) in set.iter() {
        out.set_item(PyTuple::new(py, x.as_slice())?, c)?;
    }
    Ok(out)
}

/// Fit an effective inverse temperature to samples of `problem`.
#[pyfunction]
fn estimate_beta_eff<'py>(
    py: Python<'py>,
    problem: &PyIsingProblem,
    samples: Vec<Vec<i8>>,
) -> PyResult<Bound<'py, PyDict>> {
    let states = samples.into_iter().map(spins).collect::<PyResult<Vec<_>>>()?;
    let set = SampleSet::from_states(Level::Logical, problem.0.n_vars(), states).map_err(py_err)?;
    let est = fit_beta(&set, &problem.0).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("beta_eff", est.beta_eff)?;
    out.set_item("tvd", est.distance_at_min)?;
    out.set_item("beta_hat", est.dimensionless)?;
    Ok(out)
}

fn record_dict<'py>(py: Python<'py>, r: &MetricRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("epoch", r.epoch)?;
    d.set_item("update", r.update)?;
    for (k, v) in [
        ("beta_eff", r.beta_eff),
        ("beta_hat", r.beta_hat),
        ("tvd_gibbs", r.tvd_gibbs),
        ("d_data", r.d_data),
        ("emp_ll", r.emp_ll),
        ("acc", r.acc),
        ("exact_ll", r.exact_ll),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Train on `data` with a TOML training config. Returns the model and one
/// metric dict per update.
#[pyfunction]
fn train<'py>(
    py: Python<'py>,
    config_toml: &str,
    data: Vec<Vec<i8>>,
) -> PyResult<(PyIsingProblem, Vec<Bound<'py, PyDict>>)> {
    let cfg: TrainConfig = toml::from_str(config_toml).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let width = data.first().map_or(0, Vec::len);
    let vectors = data.into_iter().map(spins).collect::<PyResult<Vec<_>>>()?;
    let dataset = BinaryDataset::new(width, vectors).map_err(py_err)?;
    let state = py.detach(|| train_model(&cfg, &dataset)).map_err(py_err)?;
    let trace = state.trace.iter().map(|r| record_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    Ok((PyIsingProblem(state.model), trace))
}

#[pymodule]
fn nqac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIsingProblem>()?;
    m.add_function(wrap_pyfunction!(gibbs_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(exact_log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(nest, m)?)?;
    m.add_function(wrap_pyfunction!(resource_count, m)?)?;
    m.add_function(wrap_pyfunction!(replica_count, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bas, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_bas_ll, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_beta_eff, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}

//! Python bindings: family states, scenario runs, transcripts and batteries.
//!
//! Particles are 0-based here, as in the Rust API. Statistics, transcripts
//! and suite reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use qpc_core::config::ConfigDocument;
use qpc_core::ghz::{sample_measurement, Basis, GhzSpec};
use qpc_core::harness::{self, HarnessError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_error<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_error(e: HarnessError) -> PyErr {
    if e.is_config_error() || matches!(e, HarnessError::UnknownSuite(_) | HarnessError::UnknownClosedForm(_)) {
        value_error(e)
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_basis(basis: &str) -> PyResult<Basis> {
    match basis {
        "Z" | "z" => Ok(Basis::Z),
        "X" | "x" => Ok(Basis::X),
        other => Err(PyValueError::new_err(format!("unknown basis `{other}` (expected Z or X)"))),
    }
}

fn to_dict<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

/// One member of the GHZ family on `n` particles.
#[pyclass(name = "GhzState", module = "qpc", frozen)]
struct PyGhzState {
    spec: GhzSpec,
}

#[pymethods]
impl PyGhzState {
    #[new]
    fn new(index: u64, n: usize) -> PyResult<Self> {
        GhzSpec::from_index(index, n).map(|spec| Self { spec }).map_err(value_error)
    }

    #[staticmethod]
    fn from_bits(q: Vec<bool>, delta: bool) -> PyResult<Self> {
        GhzSpec::new(&q, delta).map(|spec| Self { spec }).map_err(value_error)
    }

    #[getter]
    fn index(&self) -> u64 {
        self.spec.index()
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n()
    }

    #[getter]
    fn delta(&self) -> bool {
        self.spec.delta()
    }

    #[getter]
    fn q(&self) -> Vec<bool> {
        self.spec.q_bits()
    }

    fn t_xor(&self, i: usize, j: usize) -> PyResult<bool> {
        self.spec.t_xor(i, j).map_err(value_error)
    }

    /// `[(sign_string, ±1), ...]` in the X basis.
    fn x_expansion(&self) -> Vec<(String, i8)> {
        self.spec.x_expansion().iter().map(|t| (t.xstring(), t.sign())).collect()
    }

    /// Measures `positions` in one basis; returns the bits in the order given.
    #[pyo3(signature = (positions, basis = "Z", seed = 0))]
    fn measure(&self, positions: Vec<usize>, basis: &str, seed: u64) -> PyResult<Vec<bool>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = sample_measurement(&self.spec, &positions, parse_basis(basis)?, &mut rng).map_err(value_error)?;
        Ok(positions.iter().map(|&p| out.get(p).unwrap_or_default()).collect())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.spec == other.spec
    }

    fn __repr__(&self) -> String {
        format!("GhzState(index={}, n={}, '{}')", self.spec.index(), self.spec.n(), self.spec)
    }
}

#[pyfunction]
fn closed_form(kind: &str, l: u64) -> PyResult<f64> {
    harness::closed_form(kind, l).map_err(harness_error)
}

#[pyfunction]
fn wilson(k: u64, n: u64) -> (f64, f64) {
    harness::wilson(k, n)
}

fn scenario(config: &str, trials: Option<u64>, seed: Option<u64>) -> PyResult<harness::Scenario> {
    let mut doc = ConfigDocument::parse(config).map_err(value_error)?;
    if let Some(t) = trials {
        doc.trials = t;
    }
    if seed.is_some() {
        doc.seed = seed;
    }
    doc.to_scenario(rand::random()).map_err(value_error)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the scenario in a JSON config document and returns its statistics.
#[pyfunction]
#[pyo3(signature = (config, trials = None, seed = None, jobs = None))]
fn run<'py>(
    py: Python<'py>,
    config: &str,
    trials: Option<u64>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let s = scenario(config, trials, seed)?;
    let jobs = jobs.unwrap_or_else(default_jobs);
    let stats = py.detach(|| harness::run_scenario(&s, jobs)).map_err(harness_error)?;
    to_dict(py, &stats.to_json().map_err(value_error)?)
}

/// Transcript of the first trial of a config.
#[pyfunction]
#[pyo3(signature = (config, seed = None))]
fn transcript<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let s = scenario(config, Some(1), seed)?;
    let run = harness::run_trial(&s, 0).map_err(harness_error)?;
    let out = PyDict::new(py);
    out.set_item("secrets", run.secrets.iter().map(|b| b.to_string()).collect::<Vec<_>>())?;
    out.set_item("transcript", to_dict(py, &run.transcript.to_json().map_err(value_error)?)?)?;
    Ok(out.into_any())
}

/// Runs a built-in battery; `passed` is false when any row fails.
#[pyfunction]
#[pyo3(signature = (name, seed, jobs = None))]
fn suite<'py>(py: Python<'py>, name: &str, seed: u64, jobs: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let jobs = jobs.unwrap_or_else(default_jobs);
    let report = py.detach(|| harness::run_suite(name, seed, jobs)).map_err(harness_error)?;
    let out = to_dict(py, &report.to_json().map_err(value_error)?)?;
    out.set_item("passed", report.passed())?;
    Ok(out)
}

#[pymodule]
fn qpc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGhzState>()?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(wilson, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(transcript, m)?)?;
    m.add_function(wrap_pyfunction!(suite, m)?)?;
    m.add("SUITES", harness::SUITES.to_vec())?;
    m.add("CLOSED_FORMS", harness::CLOSED_FORMS.to_vec())?;
    Ok(())
}

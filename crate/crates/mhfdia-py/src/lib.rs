//! Python bindings: configuration, deterministic runs, and sweeps.
//!
//! ```python
//! import mhfdia_py as mhfdia
//! cfg = mhfdia.RunConfig("synthetic")
//! cfg.attack = "mh"
//! trace = mhfdia.run(cfg)
//! print(trace.column("effectiveness")[-1])
//! ```

use std::str::FromStr;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mhfdia::baselines::AttackKind;
use mhfdia::harness::{self, RunConfig, Scenario, SimTrace, SweepParam, SweepSpec, SweepSummary};
use mhfdia::vehicle::PathKind;
use mhfdia::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Dimension(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// One run's configuration; constructed from a scenario name or TOML text,
/// with the most common knobs exposed as attributes.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// `RunConfig("grid" | "vehicle" | "synthetic")` with scenario defaults.
    #[new]
    fn new(scenario: &str) -> PyResult<Self> {
        let scenario = Scenario::from_str(scenario).map_err(to_py_err)?;
        Ok(Self { inner: RunConfig::for_scenario(scenario) })
    }

    /// Parse a TOML configuration string (same schema as the CLI).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::from_toml_str(text).map_err(to_py_err)? })
    }

    #[getter]
    fn scenario(&self) -> String {
        self.inner.scenario.to_string()
    }

    #[getter]
    fn get_attack(&self) -> String {
        self.inner.attack.to_string()
    }

    #[setter]
    fn set_attack(&mut self, attack: &str) -> PyResult<()> {
        self.inner.attack = AttackKind::from_str(attack).map_err(to_py_err)?;
        Ok(())
    }

    #[getter]
    fn get_path(&self) -> String {
        self.inner.path.to_string()
    }

    #[setter]
    fn set_path(&mut self, path: &str) -> PyResult<()> {
        self.inner.path = PathKind::from_str(path).map_err(to_py_err)?;
        Ok(())
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn get_duration(&self) -> f64 {
        self.inner.duration
    }

    #[setter]
    fn set_duration(&mut self, duration: f64) {
        self.inner.duration = duration;
    }

    #[getter]
    fn get_attack_start(&self) -> f64 {
        self.inner.attack_start
    }

    #[setter]
    fn set_attack_start(&mut self, attack_start: f64) {
        self.inner.attack_start = attack_start;
    }

    #[getter]
    fn get_lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[setter]
    fn set_lambda0(&mut self, lambda0: f64) {
        self.inner.lambda0 = lambda0;
    }

    #[getter]
    fn get_max_iters(&self) -> usize {
        self.inner.max_iters
    }

    #[setter]
    fn set_max_iters(&mut self, max_iters: usize) {
        self.inner.max_iters = max_iters;
    }

    #[getter]
    fn get_support(&self) -> Vec<usize> {
        self.inner.support.clone()
    }

    #[setter]
    fn set_support(&mut self, support: Vec<usize>) {
        self.inner.support = support;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(scenario={}, attack={}, seed={})",
            self.inner.scenario, self.inner.attack, self.inner.seed
        )
    }
}

/// Column-oriented trace of one run.
#[pyclass(name = "SimTrace")]
struct PySimTrace {
    inner: SimTrace,
}

#[pymethods]
impl PySimTrace {
    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns.clone()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows.clone()
    }

    #[getter]
    fn scenario(&self) -> String {
        self.inner.meta.scenario.clone()
    }

    #[getter]
    fn attack(&self) -> String {
        self.inner.meta.attack.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.meta.seed
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.meta.epsilon
    }

    #[getter]
    fn diverged(&self) -> bool {
        self.inner.meta.diverged
    }

    /// All values of one named column.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .column(name)
            .ok_or_else(|| PyValueError::new_err(format!("no column '{name}'")))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SimTrace({} x {}, scenario={}, attack={})",
            self.inner.rows.len(),
            self.inner.columns.len(),
            self.inner.meta.scenario,
            self.inner.meta.attack
        )
    }
}

/// Aggregated sweep results; one dict per swept value.
#[pyclass(name = "SweepSummary")]
struct PySweepSummary {
    inner: SweepSummary,
}

#[pymethods]
impl PySweepSummary {
    #[getter]
    fn param(&self) -> String {
        self.inner.param.clone()
    }

    #[getter]
    fn reps(&self) -> usize {
        self.inner.reps
    }

    fn cells(&self, py: Python<'_>) -> PyResult<Vec<Py<PyAny>>> {
        self.inner
            .cells
            .iter()
            .map(|c| {
                let dict = pyo3::types::PyDict::new(py);
                dict.set_item("value", c.value)?;
                dict.set_item("mean_effectiveness", c.mean_effectiveness)?;
                dict.set_item("min_effectiveness", c.min_effectiveness)?;
                dict.set_item("q1_effectiveness", c.q1_effectiveness)?;
                dict.set_item("median_effectiveness", c.median_effectiveness)?;
                dict.set_item("q3_effectiveness", c.q3_effectiveness)?;
                dict.set_item("max_effectiveness", c.max_effectiveness)?;
                dict.set_item("mean_stealthiness", c.mean_stealthiness)?;
                dict.set_item("max_stealthiness", c.max_stealthiness)?;
                dict.set_item("alarms", c.alarms)?;
                Ok(dict.into_any().unbind())
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "SweepSummary(param={}, values={}, reps={})",
            self.inner.param,
            self.inner.cells.len(),
            self.inner.reps
        )
    }
}

/// Execute one deterministic closed-loop run.
#[pyfunction]
fn run(config: &PyRunConfig) -> PyResult<PySimTrace> {
    let trace = harness::run(&config.inner).map_err(to_py_err)?;
    Ok(PySimTrace { inner: trace })
}

/// Repeat runs across a swept parameter (`"M"`, `"support"`, `"lambda0"`,
/// or `"T"`) and aggregate the attack metrics.
#[pyfunction]
fn sweep(config: &PyRunConfig, param: &str, values: Vec<f64>, reps: usize) -> PyResult<PySweepSummary> {
    let spec = SweepSpec {
        param: SweepParam::from_str(param).map_err(to_py_err)?,
        values,
        reps,
    };
    let summary = harness::sweep(&spec, &config.inner).map_err(to_py_err)?;
    Ok(PySweepSummary { inner: summary })
}

#[pymodule]
fn mhfdia_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PySimTrace>()?;
    m.add_class::<PySweepSummary>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

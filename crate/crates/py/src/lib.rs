//! Python bindings: configure and run simulated spin-photon time-bin
//! entanglement experiments in-process.
//!
//! Usage from Python:
//!
//!     import timebin
//!     cfg = timebin.Config("telecom-zz")
//!     cfg.set("conversion.snr", "6.25")
//!     result = timebin.run(cfg, trials=10_000, seed=7)
//!     print(result.e_z, result.fidelity)

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use timebin_core::config::ExperimentConfig;
use timebin_core::report::{events_to_csv, sweep_to_csv};
use timebin_core::runner;
use timebin_core::tomography::ContrastEstimate;
use timebin_core::Error;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::UnknownParameter(_) | Error::Parse(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Experiment configuration. Starts from a scenario preset; individual keys
/// can be overridden with the same `section.key` paths the config file uses.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: ExperimentConfig,
}

#[pymethods]
impl Config {
    /// Build the preset for a scenario: red-zz, telecom-zz, telecom-x,
    /// telecom-y, or noise-budget.
    #[new]
    fn new(scenario: &str) -> PyResult<Self> {
        let scenario = scenario.parse().map_err(to_py_err)?;
        Ok(Self {
            inner: ExperimentConfig::preset(scenario),
        })
    }

    /// Parse a flat key-value config file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let inner = ExperimentConfig::from_file(std::path::Path::new(path)).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Set one key from its string representation, e.g.
    /// `cfg.set("protocol.p_reexc", "0.04")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set_key(key, value).map_err(to_py_err)
    }

    #[getter]
    fn scenario(&self) -> String {
        self.inner.scenario.to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.inner.trials
    }

    #[setter]
    fn set_trials(&mut self, trials: u64) {
        self.inner.trials = trials;
    }

    #[getter]
    fn parallel(&self) -> bool {
        self.inner.parallel
    }

    #[setter]
    fn set_parallel(&mut self, parallel: bool) {
        self.inner.parallel = parallel;
    }

    /// The full configuration in the flat config-file format.
    fn to_flat(&self) -> String {
        self.inner.to_flat_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(scenario={}, seed={}, trials={})",
            self.inner.scenario, self.inner.seed, self.inner.trials
        )
    }
}

fn contrast_tuple(c: &Option<ContrastEstimate>) -> Option<(f64, f64)> {
    c.as_ref().map(|c| (c.value, c.std))
}

/// Result of one scenario run.
#[pyclass]
struct RunResult {
    output: timebin_core::RunOutput,
}

#[pymethods]
impl RunResult {
    /// (value, std) of the X contrast, or None if the basis was not
    /// measured.
    #[getter]
    fn e_x(&self) -> Option<(f64, f64)> {
        contrast_tuple(&self.output.report.tomography.e_x)
    }

    #[getter]
    fn e_y(&self) -> Option<(f64, f64)> {
        contrast_tuple(&self.output.report.tomography.e_y)
    }

    #[getter]
    fn e_z(&self) -> Option<(f64, f64)> {
        contrast_tuple(&self.output.report.tomography.e_z)
    }

    /// (value, std, sigma_above_classical), or None without all three bases.
    #[getter]
    fn fidelity(&self) -> Option<(f64, f64, f64)> {
        self.output
            .report
            .tomography
            .fidelity
            .map(|f| (f.value, f.std, f.sigma_above_classical))
    }

    #[getter]
    fn heralds(&self) -> u64 {
        self.output.report.counts.heralds
    }

    #[getter]
    fn events(&self) -> u64 {
        self.output.report.counts.events
    }

    /// Full report as a JSON string.
    fn report_json(&self) -> PyResult<String> {
        self.output.report.to_json().map_err(to_py_err)
    }

    /// Event list in the CSV interchange format.
    fn events_csv(&self) -> String {
        events_to_csv(&self.output.records)
    }

    /// Phase-trace CSV (interferometer scenarios only).
    fn phase_trace_csv(&self) -> Option<String> {
        self.output.phase_trace.as_ref().map(|t| t.to_csv())
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(scenario={}, heralds={}, events={})",
            self.output.report.scenario,
            self.output.report.counts.heralds,
            self.output.report.counts.events
        )
    }
}

/// Run one scenario; `seed`, `trials` and `parallel` override the config.
#[pyfunction]
#[pyo3(signature = (config, seed=None, trials=None, parallel=None))]
fn run(
    config: &Config,
    seed: Option<u64>,
    trials: Option<u64>,
    parallel: Option<bool>,
) -> PyResult<RunResult> {
    let mut cfg = config.inner.clone();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    if let Some(parallel) = parallel {
        cfg.parallel = parallel;
    }
    let output = runner::run_scenario(&cfg).map_err(to_py_err)?;
    Ok(RunResult { output })
}

/// Run the scenario once per value of `param`; returns one result per value.
#[pyfunction]
fn sweep(config: &Config, param: &str, values: Vec<f64>) -> PyResult<Vec<RunResult>> {
    let rows = runner::sweep(&config.inner, param, &values).map_err(to_py_err)?;
    Ok(rows
        .into_iter()
        .map(|row| RunResult { output: row.output })
        .collect())
}

/// Sweep and render the table CSV in one call.
#[pyfunction]
fn sweep_csv(config: &Config, param: &str, values: Vec<f64>) -> PyResult<String> {
    let rows = runner::sweep(&config.inner, param, &values).map_err(to_py_err)?;
    Ok(sweep_to_csv(&rows))
}

/// Exercise only the stabilization scheduler; returns the phase-trace CSV.
#[pyfunction]
fn phase_trace(config: &Config, cycles: u64) -> PyResult<String> {
    let trace = runner::run_phase_trace(&config.inner, cycles).map_err(to_py_err)?;
    Ok(trace.to_csv())
}

/// F = (1 + E_X + E_Y + E_Z)/4 with errors in quadrature; returns
/// (value, std, sigma_above_classical).
#[pyfunction]
#[pyo3(signature = (e_x, e_y, e_z, std_x=0.0, std_y=0.0, std_z=0.0))]
fn fidelity_from_contrasts(
    e_x: f64,
    e_y: f64,
    e_z: f64,
    std_x: f64,
    std_y: f64,
    std_z: f64,
) -> (f64, f64, f64) {
    let f = timebin_core::tomography::fidelity_from_contrasts(
        (e_x, std_x),
        (e_y, std_y),
        (e_z, std_z),
    );
    (f.value, f.std, f.sigma_above_classical)
}

/// Maximum observable contrast for a perfectly correlated signal diluted by
/// bin-uniform noise: snr/(snr + 1).
#[pyfunction]
fn max_contrast_from_snr(snr: f64) -> PyResult<f64> {
    timebin_core::conversion::max_contrast_from_snr(snr).map_err(to_py_err)
}

#[pymodule]
fn timebin(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Config>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(phase_trace, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_from_contrasts, m)?)?;
    m.add_function(wrap_pyfunction!(max_contrast_from_snr, m)?)?;
    Ok(())
}

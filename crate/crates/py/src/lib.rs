//! Python bindings for the triplet-qubit simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tripletsim::cli_io::{self, OutputFormat};
use tripletsim::coherence_sensing as cs;
use tripletsim::fitting::{self, FitModel, FitOptions};
use tripletsim::photokinetics as pk;
use tripletsim::pulse_engine::{self as pe, PulseEngine, SystemParams};
use tripletsim::spin_model::{self as sm, Axis, FieldVector, GyroRatio, TransitionPair};
use tripletsim::Error;

fn to_py(e: Error) -> PyErr {
    match e.kind() {
        "invalid-parameter" | "config" | "flat-data" => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn axis(s: &str) -> PyResult<Axis> {
    match s {
        "x" | "X" => Ok(Axis::X),
        "y" | "Y" => Ok(Axis::Y),
        "z" | "Z" => Ok(Axis::Z),
        _ => Err(PyValueError::new_err(format!(
            "axis must be x, y or z, got '{s}'"
        ))),
    }
}

/// Zero-field splitting parameters in Hz.
#[pyclass(from_py_object, name = "ZfsParams", frozen)]
#[derive(Clone, Copy)]
struct PyZfs(sm::ZfsParams);

#[pymethods]
impl PyZfs {
    #[new]
    fn new(d: f64, e: f64) -> PyResult<Self> {
        sm::ZfsParams::new(d, e).map(PyZfs).map_err(to_py)
    }

    #[staticmethod]
    fn pentacene() -> Self {
        PyZfs(sm::ZfsParams::pentacene())
    }

    #[getter]
    fn d(&self) -> f64 {
        self.0.d
    }

    #[getter]
    fn e(&self) -> f64 {
        self.0.e
    }

    /// Transition frequencies (XY, YZ, XZ) in Hz at field (bx, by, bz) tesla.
    #[pyo3(signature = (bx=0.0, by=0.0, bz=0.0, gamma=GyroRatio::ELECTRON.hz_per_tesla()))]
    fn transition_frequencies(&self, bx: f64, by: f64, bz: f64, gamma: f64) -> PyResult<[f64; 3]> {
        let field = FieldVector::new(bx, by, bz).map_err(to_py)?;
        let h = sm::build_hamiltonian(self.0, field, GyroRatio::new(gamma).map_err(to_py)?)
            .map_err(to_py)?;
        let eig = sm::eigensystem(&h).map_err(to_py)?;
        Ok(sm::transition_frequencies(&eig).map(|t| t.frequency))
    }

    /// Branch-tracked transition frequencies along one axis: one
    /// `[f_xy, f_yz, f_xz]` row per field value.
    #[pyo3(signature = (axis_name, b_values, gamma=GyroRatio::ELECTRON.hz_per_tesla()))]
    fn field_sweep(
        &self,
        axis_name: &str,
        b_values: Vec<f64>,
        gamma: f64,
    ) -> PyResult<Vec<[f64; 3]>> {
        let rows = sm::field_sweep_spectrum(
            self.0,
            axis(axis_name)?,
            &b_values,
            GyroRatio::new(gamma).map_err(to_py)?,
        )
        .map_err(to_py)?;
        Ok(rows
            .iter()
            .map(|r| TransitionPair::ALL.map(|p| r.frequency(p)))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("ZfsParams(d={}, e={})", self.0.d, self.0.e)
    }
}

/// Photophysical rates of the singlet/triplet cycle (SI units).
#[pyclass(from_py_object, name = "KineticRates", frozen)]
#[derive(Clone, Copy)]
struct PyKinetics(pk::KineticRates);

#[pymethods]
impl PyKinetics {
    /// Rates reproducing steady-state triplet populations and lifetimes (s).
    #[new]
    fn new(populations: [f64; 3], lifetimes: [f64; 3]) -> PyResult<Self> {
        pk::KineticRates::from_steady_state(populations, lifetimes)
            .map(PyKinetics)
            .map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        match name {
            "4K" => Ok(PyKinetics(pk::KineticRates::cryogenic())),
            "295K" => Ok(PyKinetics(pk::KineticRates::ambient())),
            _ => Err(PyValueError::new_err(format!(
                "unknown preset '{name}' (use 4K or 295K)"
            ))),
        }
    }

    #[getter]
    fn isc_branching(&self) -> [f64; 3] {
        self.0.isc_branching
    }

    #[getter]
    fn triplet_lifetimes(&self) -> [f64; 3] {
        self.0.triplet_lifetimes
    }

    #[getter]
    fn pump_rate(&self) -> f64 {
        self.0.pump_rate
    }

    /// Laser-on steady state as `[s0, s1, x, y, z]`.
    fn steady_state(&self) -> PyResult<[f64; 5]> {
        let p = pk::steady_state(&self.0).map_err(to_py)?;
        Ok([p.s0, p.s1, p.x, p.y, p.z])
    }

    fn t1_relaxation_curve(&self, delays: Vec<f64>) -> PyResult<Vec<f64>> {
        pk::t1_relaxation_curve(&self.0, &delays).map_err(to_py)
    }

    /// Pulsed ODMR contrast at each microwave frequency (Hz).
    #[pyo3(signature = (freqs, multilevel=false, rabi_freq=5e6, seed=0))]
    fn pulsed_odmr(
        &self,
        freqs: Vec<f64>,
        multilevel: bool,
        rabi_freq: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let engine = PulseEngine::new(SystemParams::new(sm::ZfsParams::pentacene(), self.0))
            .map_err(to_py)?;
        let protocol = pe::OdmrProtocol {
            multilevel,
            rabi_freq,
            ..Default::default()
        };
        pe::pulsed_odmr_sweep(&engine, &freqs, &protocol, seed).map_err(to_py)
    }
}

/// Result of a least-squares fit.
#[pyclass(name = "FitResult", frozen, get_all)]
struct PyFitResult {
    model: String,
    names: Vec<String>,
    params: Vec<f64>,
    std_errors: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    rss: f64,
    converged: bool,
    iterations: usize,
}

#[pymethods]
impl PyFitResult {
    fn __getitem__(&self, name: &str) -> PyResult<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.params[k])
            .ok_or_else(|| PyValueError::new_err(format!("no parameter '{name}'")))
    }

    fn __repr__(&self) -> String {
        let body: Vec<String> = self
            .names
            .iter()
            .zip(&self.params)
            .map(|(n, p)| format!("{n}={p:.6e}"))
            .collect();
        format!(
            "FitResult({}, {}, rss={:.3e})",
            self.model,
            body.join(", "),
            self.rss
        )
    }
}

/// Ensemble Rabi trace (transferred population) at each drive time (s).
#[pyfunction]
fn simulate_rabi(
    transition: &str,
    rabi_freq: f64,
    durations: Vec<f64>,
    t2_star: f64,
) -> PyResult<Vec<f64>> {
    pe::simulate_rabi(parse(transition)?, rabi_freq, &durations, t2_star).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (t2, nu, times, eseem=None))]
fn echo_envelope(
    t2: f64,
    nu: f64,
    times: Vec<f64>,
    eseem: Option<(f64, f64, f64)>,
) -> PyResult<Vec<f64>> {
    let mut m = cs::CoherenceModel::new(t2, nu).map_err(to_py)?;
    if let Some((a, b, omega)) = eseem {
        m = m.with_eseem(cs::Eseem { a, b, omega }).map_err(to_py)?;
    }
    cs::echo_trace(&m, &times).map_err(to_py)
}

#[pyfunction]
fn dd_t2_scaling(t2_1: f64, nu: f64, t1_rho: f64, n_pulses: u32) -> PyResult<f64> {
    cs::dd_t2_scaling(&cs::DdScalingParams { t2_1, nu, t1_rho }, n_pulses).map_err(to_py)
}

#[pyfunction]
fn nmr_frequency(gamma_n: f64, b: f64) -> PyResult<f64> {
    cs::nmr_frequency(
        &cs::NuclearSpecies::new("nucleus", gamma_n).map_err(to_py)?,
        b,
    )
    .map_err(to_py)
}

#[pyfunction]
fn model_eval(model: &str, params: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
    fitting::model_eval(parse::<FitModel>(model)?, &params, &x).map_err(to_py)
}

/// Fits `model` to `(x, y)`; without an initial guess one is estimated.
#[pyfunction]
#[pyo3(signature = (model, x, y, initial_guess=None, max_iter=500, tol=1e-10))]
fn fit(
    model: &str,
    x: Vec<f64>,
    y: Vec<f64>,
    initial_guess: Option<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> PyResult<PyFitResult> {
    let m: FitModel = parse(model)?;
    let options = FitOptions { max_iter, tol };
    let r = match initial_guess {
        Some(g) => fitting::fit(m, &x, &y, &g, &options),
        None => fitting::fit_auto(m, &x, &y, &options),
    }
    .map_err(to_py)?;
    Ok(PyFitResult {
        model: m.name().to_string(),
        names: m.param_names().iter().map(|s| s.to_string()).collect(),
        params: r.params,
        std_errors: r.std_errors,
        covariance: r.covariance,
        rss: r.rss,
        converged: r.converged,
        iterations: r.iterations,
    })
}

/// Runs an experiment from JSON config text and returns the serialized trace.
#[pyfunction]
#[pyo3(signature = (config, format="csv"))]
fn run_experiment(config: &str, format: &str) -> PyResult<String> {
    let format = match format {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        _ => return Err(PyValueError::new_err("format must be 'csv' or 'json'")),
    };
    let cfg = cli_io::parse_config(config).map_err(to_py)?;
    let record = cli_io::run_experiment(&cfg).map_err(to_py)?;
    let bytes = cli_io::emit(&record, format).map_err(to_py)?;
    Ok(String::from_utf8(bytes).expect("emitted traces are UTF-8"))
}

#[pymodule]
fn tripletsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli_io::VERSION)?;
    m.add_class::<PyZfs>()?;
    m.add_class::<PyKinetics>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(simulate_rabi, m)?)?;
    m.add_function(wrap_pyfunction!(echo_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(dd_t2_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(nmr_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(model_eval, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

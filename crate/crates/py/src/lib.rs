//! Python bindings: configuration, stepping simulations, and the
//! hypotrochoid analysis helpers.

use flagsim::analysis;
use flagsim::config::{config_from_toml, resolved_toml, ExperimentPreset, Profile};
use flagsim::error::Error;
use flagsim::output::run_to_dir;
use flagsim::sim::{SimConfig, Simulation};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::InvalidParameters(_) | Error::Config(_) | Error::ContractViolation(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Simulation configuration (wave, material, fluid, coupling, flux,
/// numerics).
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    /// Build from a preset name like "planar/no-ca" with profile
    /// "full" or "coarse".
    #[staticmethod]
    #[pyo3(signature = (name, profile = "full"))]
    fn preset(name: &str, profile: &str) -> PyResult<Self> {
        let profile = Profile::parse(profile).map_err(to_py_err)?;
        let preset = ExperimentPreset::parse(name).map_err(to_py_err)?;
        Ok(PyConfig {
            inner: preset.config(profile),
        })
    }

    /// Parse a TOML config string.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: config_from_toml(text).map_err(to_py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        resolved_toml(&self.inner)
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.numerics.duration
    }

    #[setter]
    fn set_duration(&mut self, value: f64) {
        self.inner.numerics.duration = value;
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.numerics.dt
    }

    #[getter]
    fn ds(&self) -> f64 {
        self.inner.numerics.ds
    }

    #[getter]
    fn points(&self) -> usize {
        self.inner.intervals() + 1
    }

    /// Scale the bending/twist moduli a_i.
    fn scale_moduli(&mut self, factor: f64) -> PyResult<()> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(PyValueError::new_err("moduli scale must be positive"));
        }
        self.inner.material = self.inner.material.scaled_bending(factor);
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(A0={}, B0={}, mode={:?}, ds={}, dt={}, duration={})",
            self.inner.wave.a0,
            self.inner.wave.b0,
            self.inner.coupling.mode,
            self.inner.numerics.ds,
            self.inner.numerics.dt,
            self.inner.numerics.duration
        )
    }
}

/// A stepping simulation of the coupled rod–fluid–calcium system.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    inner: Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(cfg: PyConfig) -> PyResult<Self> {
        Ok(PySimulation {
            inner: Simulation::new(cfg.inner).map_err(to_py_err)?,
        })
    }

    /// Advance `n` steps.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, n: u64) -> PyResult<()> {
        for _ in 0..n {
            self.inner.step().map_err(to_py_err)?;
        }
        Ok(())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn step_index(&self) -> u64 {
        self.inner.step_index()
    }

    /// Rod point positions as a list of (x, y, z).
    fn positions(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .rod()
            .points
            .iter()
            .map(|p| (p.x, p.y, p.z))
            .collect()
    }

    fn first_point(&self) -> (f64, f64, f64) {
        let p = self.inner.rod().points[0];
        (p.x, p.y, p.z)
    }

    /// Calcium concentrations per point (μM).
    fn calcium(&self) -> Vec<f64> {
        self.inner.calcium().ca.clone()
    }

    /// Energy, total-load residuals, strain and orthonormality drift.
    fn diagnostics<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rec = self.inner.record().map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("energy", rec.diag.energy)?;
        d.set_item("total_force_rel", rec.diag.total_force_rel)?;
        d.set_item("total_torque_rel", rec.diag.total_torque_rel)?;
        d.set_item("max_strain", rec.diag.max_strain)?;
        d.set_item("ortho_drift", rec.diag.ortho_drift)?;
        Ok(d)
    }
}

/// Run a configuration to completion, writing the run directory.
#[pyfunction]
fn run(cfg: PyConfig, out_dir: PathBuf) -> PyResult<f64> {
    let sim = run_to_dir(cfg.inner, &out_dir).map_err(to_py_err)?;
    Ok(sim.time())
}

/// All experiment preset names.
#[pyfunction]
fn preset_names() -> Vec<String> {
    ExperimentPreset::all_names()
}

/// Amplitude factor f(Ca) of the sigmoidal calcium coupling.
#[pyfunction]
fn coupling_factor(ca: f64, c1: f64, c2: f64, ca_hat: f64) -> f64 {
    let params = flagsim::calcium::CouplingParams {
        mode: flagsim::calcium::CouplingMode::CaSym,
        c1,
        c2p: c2,
        c2n: c2,
        ca_hat,
    };
    flagsim::calcium::coupling_f(ca, &params, c2)
}

/// Blob (regularized delta) density at distance r for radius epsilon.
#[pyfunction]
fn blob(r: f64, epsilon: f64) -> f64 {
    flagsim::hydro::blob_eval(
        &flagsim::Vec3::new(r, 0.0, 0.0),
        &flagsim::Vec3::zeros(),
        epsilon,
    )
}

/// Hypotrochoid samples (gamma, y, z) over one parameter turn.
#[pyfunction]
fn gen_hypotrochoid(
    r_tilde: f64,
    d: f64,
    omega_ratio: f64,
    samples: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let fc = analysis::gen_hypotrochoid(r_tilde, d, omega_ratio, samples).map_err(to_py_err)?;
    Ok((fc.times, fc.y, fc.z))
}

/// Fit a recentered f-curve; returns a dict with r_tilde, d, omega1,
/// omega2, n, big_r, small_r and circle_like.
#[pyfunction]
#[pyo3(signature = (times, y, z, smooth_width = 3))]
fn fit_hypotrochoid<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    smooth_width: usize,
) -> PyResult<Bound<'py, PyDict>> {
    if times.len() != y.len() || y.len() != z.len() {
        return Err(PyValueError::new_err("times, y, z must have equal length"));
    }
    let fc = analysis::FCurve { times, y, z };
    let fit = analysis::fit_hypotrochoid(&fc, smooth_width).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("r_tilde", fit.r_tilde)?;
    d.set_item("d", fit.d)?;
    d.set_item("omega1", fit.omega1)?;
    d.set_item("omega2", fit.omega2)?;
    d.set_item("n", fit.n)?;
    d.set_item("big_r", fit.big_r)?;
    d.set_item("small_r", fit.small_r)?;
    d.set_item("circle_like", fit.circle_like)?;
    Ok(d)
}

#[pymodule]
fn flagsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_factor, m)?)?;
    m.add_function(wrap_pyfunction!(blob, m)?)?;
    m.add_function(wrap_pyfunction!(gen_hypotrochoid, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hypotrochoid, m)?)?;
    Ok(())
}

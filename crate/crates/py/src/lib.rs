//! Python module `vtolctl`. Structured values cross the boundary as JSON
//! text so the Python side depends only on the stdlib `json` module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vtolctl_core::airframe::AircraftParams;
use vtolctl_core::allocation::{allocate as allocate_exact, allocate_saturating, AllocConfig};
use vtolctl_core::frame::alpha_min_thrust as alpha_min;
use vtolctl_core::geom3::Vec3;
use vtolctl_core::sim::{self, ScenarioConfig};
use vtolctl_core::stability::prop1_montecarlo;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn params_or_default(params_json: Option<&str>) -> PyResult<AircraftParams> {
    params_json.map_or_else(|| Ok(AircraftParams::eflite_like()), |s| AircraftParams::from_json_str(s).map_err(value_err))
}

/// Scenario document for a preset: "circle_mission", "hover" or "cruise".
#[pyfunction]
#[pyo3(signature = (preset = "circle_mission"))]
fn default_config(preset: &str) -> PyResult<String> {
    let c = match preset {
        "circle_mission" => ScenarioConfig::circle_mission(),
        "hover" => ScenarioConfig::hover(),
        "cruise" => ScenarioConfig::cruise(),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    to_json(&c)
}

/// Runs a scenario; returns `(csv_text, metrics_json)`.
#[pyfunction]
fn run_scenario(py: Python<'_>, config_json: &str) -> PyResult<(String, String)> {
    let cfg = ScenarioConfig::from_json_str(config_json).map_err(value_err)?;
    let out = py.detach(|| sim::run(&cfg)).map_err(value_err)?;
    Ok((out.csv_string(), to_json(&out.metrics)?))
}

/// Actuator set as JSON. The exact solver raises `ValueError` on an
/// infeasible command; `saturate=True` clamps instead.
#[pyfunction]
#[pyo3(signature = (thrust, tilt, torque, airspeed = 0.0, params_json = None, saturate = false))]
fn allocate(
    thrust: f64,
    tilt: f64,
    torque: (f64, f64, f64),
    airspeed: f64,
    params_json: Option<&str>,
    saturate: bool,
) -> PyResult<String> {
    let params = params_or_default(params_json)?;
    let g = Vec3::new(torque.0, torque.1, torque.2);
    let cfg = AllocConfig::default();
    let solve = if saturate { allocate_saturating } else { allocate_exact };
    let set = solve(thrust, tilt, &g, airspeed, &params, &cfg).map_err(value_err)?;
    to_json(&set)
}

/// Minimum-thrust angle of attack for mass-normalized demand `a` and air velocity `v_a`.
#[pyfunction]
#[pyo3(signature = (a, v_a, params_json = None))]
fn alpha_min_thrust(a: (f64, f64, f64), v_a: (f64, f64, f64), params_json: Option<&str>) -> PyResult<f64> {
    let params = params_or_default(params_json)?;
    Ok(alpha_min(&Vec3::new(a.0, a.1, a.2), &Vec3::new(v_a.0, v_a.1, v_a.2), &params))
}

/// Kinematic Monte-Carlo report as JSON.
#[pyfunction]
fn verify_prop1(py: Python<'_>, trials: usize, seed: u64) -> PyResult<String> {
    if trials == 0 {
        return Err(PyValueError::new_err("trials must be >= 1"));
    }
    let report = py.detach(|| prop1_montecarlo(trials, seed));
    to_json(&report)
}

#[pymodule]
fn vtolctl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("LOG_VERSION", sim::LOG_VERSION)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_min_thrust, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prop1, m)?)?;
    Ok(())
}

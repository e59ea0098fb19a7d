//! Python bindings. Parameter and config dictionaries use the same keys as
//! the JSON files read by the command-line tool.

use std::path::PathBuf;

use fluxloss_core::fitting::{fit_simultaneous, FitConfig};
use fluxloss_core::io::{read_curve, read_qdataset, FitReport};
use fluxloss_core::model::{self, MaterialParams, PinningParams};
use fluxloss_core::pipeline::{self, DecayOptions, DecayTrace, MatchOptions, Measured, SensitivityCurve};
use fluxloss_core::synth::{self, SynthSpec};
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_py<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let Some(obj) = obj else { return Ok(T::default()) };
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn material(obj: Option<&Bound<'_, PyAny>>) -> PyResult<MaterialParams> {
    let mp: MaterialParams = from_py(obj)?;
    mp.validate().map_err(value_err)?;
    Ok(mp)
}

fn pinning(omega0: f64, alpha: f64, f: f64) -> PyResult<PinningParams> {
    PinningParams::new(omega0, alpha, f).map_err(value_err)
}

/// `(S, S')` in Ω/T at temperature `t` (K) and the material's frequency.
#[pyfunction]
#[pyo3(signature = (t, omega0=2.22e10, alpha=0.701, f=1.0, material=None))]
fn sensitivity_model(
    t: f64,
    omega0: f64,
    alpha: f64,
    f: f64,
    material: Option<&Bound<'_, PyAny>>,
) -> PyResult<(f64, f64)> {
    let mp = self::material(material)?;
    let s = model::sensitivity_model(t, mp.omega(), &mp, &pinning(omega0, alpha, f)?).map_err(value_err)?;
    Ok((s.s, s.s_prime))
}

#[pyfunction]
#[pyo3(signature = (t, omega0=2.22e10, alpha=0.701))]
fn depinning_frequency(t: f64, omega0: f64, alpha: f64) -> PyResult<f64> {
    Ok(model::depinning_frequency(t, &pinning(omega0, alpha, 1.0)?))
}

/// Complex surface impedance (Ω).
#[pyfunction]
#[pyo3(signature = (t, b_trap, omega0=2.22e10, alpha=0.701, material=None))]
fn surface_impedance(
    t: f64,
    b_trap: f64,
    omega0: f64,
    alpha: f64,
    material: Option<&Bound<'_, PyAny>>,
) -> PyResult<Complex64> {
    let mp = self::material(material)?;
    model::surface_impedance(t, b_trap, mp.omega(), &mp, &pinning(omega0, alpha, 1.0)?).map_err(value_err)
}

#[pyfunction]
fn scale_sensitivity_frequency(s: f64, f_from: f64, f_to: f64) -> PyResult<f64> {
    model::scale_sensitivity_frequency(s, f_from, f_to).map_err(value_err)
}

/// T₁ bound (s); `q_ox0=None` for an oxide-free surface.
#[pyfunction]
#[pyo3(signature = (s, b_trap, q_ox0=None, material=None))]
fn t1_bound(s: f64, b_trap: f64, q_ox0: Option<f64>, material: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
    model::t1_bound(q_ox0, s, b_trap, &self::material(material)?).map_err(value_err)
}

#[pyfunction]
fn q0_from_ql(q_l: f64, q1: f64) -> PyResult<f64> {
    pipeline::q0_from_ql(q_l, q1).map_err(value_err)
}

/// `(ratio, sigma)` of two flux-gate readings.
#[pyfunction]
fn flux_trapping_ratio(b_nc: f64, b_nc_err: f64, b_sc: f64, b_sc_err: f64) -> PyResult<(f64, f64)> {
    let r = pipeline::flux_trapping_ratio(Measured::new(b_nc, b_nc_err), Measured::new(b_sc, b_sc_err))
        .map_err(value_err)?;
    Ok((r.value, r.sigma))
}

/// Per-window `(time_s, power_w, q_l)` from a ringdown.
#[pyfunction]
#[pyo3(signature = (times, powers, f0, window=21, noise_floor_w=0.0))]
fn ql_from_decay(
    times: Vec<f64>,
    powers: Vec<f64>,
    f0: f64,
    window: usize,
    noise_floor_w: f64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    if times.len() != powers.len() {
        return Err(PyValueError::new_err("times and powers differ in length"));
    }
    let trace = DecayTrace::new(times.into_iter().zip(powers).collect(), f0, 0.0, "python").map_err(value_err)?;
    let red = pipeline::ql_from_decay(&trace, &DecayOptions { window, noise_floor_w }).map_err(value_err)?;
    Ok(red.points.iter().map(|p| (p.time_s, p.power_w, p.q_l)).collect())
}

fn curve_dict<'py>(py: Python<'py>, c: &SensitivityCurve) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("cooldown_id", &c.cooldown_id)?;
    d.set_item("b_trap_tesla", c.b_trap)?;
    d.set_item("temperature_k", c.points.iter().map(|p| p.temperature_k).collect::<Vec<_>>())?;
    d.set_item("field_v_per_m", c.points.iter().map(|p| p.field_v_per_m).collect::<Vec<_>>())?;
    d.set_item("s", c.points.iter().map(|p| p.s).collect::<Vec<_>>())?;
    d.set_item("s_err", c.points.iter().map(|p| p.s_err).collect::<Vec<_>>())?;
    d.set_item("s_prime", c.points.iter().map(|p| p.s_prime).collect::<Vec<_>>())?;
    d.set_item("s_prime_err", c.points.iter().map(|p| p.s_prime_err).collect::<Vec<_>>())?;
    Ok(d)
}

/// Sensitivity curve from two Q₀ table files (CSV with JSON sidecars).
#[pyfunction]
#[pyo3(signature = (reference, flux, material=None, temperature_tol_k=0.010, interpolate=false))]
fn extract_sensitivity<'py>(
    py: Python<'py>,
    reference: PathBuf,
    flux: PathBuf,
    material: Option<&Bound<'py, PyAny>>,
    temperature_tol_k: f64,
    interpolate: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let r = read_qdataset(&reference).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let f = read_qdataset(&flux).map_err(|e| PyOSError::new_err(e.to_string()))?;
    let opts = MatchOptions {
        temperature_tol_k,
        interpolate,
        ..MatchOptions::default()
    };
    let c = pipeline::extract_sensitivity(&r, &f, &self::material(material)?, &opts).map_err(value_err)?;
    curve_dict(py, &c)
}

/// Sensitivity curves generated from a synthetic spec dictionary.
#[pyfunction]
fn generate_sensitivity_curves<'py>(py: Python<'py>, spec: &Bound<'py, PyAny>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let text: String = py.import("json")?.call_method1("dumps", (spec,))?.extract()?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(value_err)?;
    let curves = synth::generate_sensitivity_curves(&spec).map_err(value_err)?;
    curves.iter().map(|c| curve_dict(py, c)).collect()
}

/// Simultaneous fit of curve files; returns the fit report as a dict.
#[pyfunction]
#[pyo3(signature = (curves, config=None, material=None))]
fn fit_curves<'py>(
    py: Python<'py>,
    curves: Vec<PathBuf>,
    config: Option<&Bound<'py, PyAny>>,
    material: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: FitConfig = from_py(config)?;
    let mp = self::material(material)?;
    let data = curves
        .iter()
        .map(|p| read_curve(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PyOSError::new_err(e.to_string()))?;
    let result = py.detach(|| fit_simultaneous(&data, &mp, &cfg)).map_err(value_err)?;
    to_py(py, &FitReport::new(&result, &data))
}

#[pymodule]
fn fluxloss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("RNG_ALGORITHM", synth::RNG_ALGORITHM)?;
    m.add_function(wrap_pyfunction!(sensitivity_model, m)?)?;
    m.add_function(wrap_pyfunction!(depinning_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(surface_impedance, m)?)?;
    m.add_function(wrap_pyfunction!(scale_sensitivity_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(t1_bound, m)?)?;
    m.add_function(wrap_pyfunction!(q0_from_ql, m)?)?;
    m.add_function(wrap_pyfunction!(flux_trapping_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(ql_from_decay, m)?)?;
    m.add_function(wrap_pyfunction!(extract_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sensitivity_curves, m)?)?;
    m.add_function(wrap_pyfunction!(fit_curves, m)?)?;
    Ok(())
}

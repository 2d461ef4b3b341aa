use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;
use tdlocate::greens::{self, WaveContext};
use tdlocate::imaging::{peak_metrics, td_multi};
use tdlocate::scenario::Scenario;
use tdlocate::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Parse(_) | Error::InvalidArgument(_) | Error::Singularity { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn wave(kappa: f64, eps0: f64) -> PyResult<WaveContext> {
    WaveContext::new(kappa, eps0).map_err(to_py)
}

fn rows<T: Copy>(m: [[T; 3]; 3]) -> Vec<Vec<T>> {
    m.iter().map(|r| r.to_vec()).collect()
}

/// e^{iκr}/(4πr).
#[pyfunction]
#[pyo3(signature = (x, y, kappa = 1.0, eps0 = 1.0))]
fn scalar_green(x: [f64; 3], y: [f64; 3], kappa: f64, eps0: f64) -> PyResult<Complex64> {
    greens::scalar_green(&wave(kappa, eps0)?, x, y).map_err(to_py)
}

/// Dyadic Green's function as a 3x3 nested list of complex numbers.
#[pyfunction]
#[pyo3(signature = (x, y, kappa = 1.0, eps0 = 1.0))]
fn dyadic_green(x: [f64; 3], y: [f64; 3], kappa: f64, eps0: f64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(rows(greens::dyadic_green(&wave(kappa, eps0)?, x, y).map_err(to_py)?))
}

/// Imaginary part of the dyadic Green's function; finite at x = y.
#[pyfunction]
#[pyo3(signature = (x, y, kappa = 1.0, eps0 = 1.0))]
fn im_dyadic_green(x: [f64; 3], y: [f64; 3], kappa: f64, eps0: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(greens::im_dyadic_green(&wave(kappa, eps0)?, x, y)))
}

/// Noise-free imaging map of a scenario file.
///
/// Returns a dict with `points`, `values`, `peak`, `localization_error`
/// and `fwhm` (the last three absent when the map is flat).
#[pyfunction]
#[pyo3(signature = (path, seed = None))]
fn image<'py>(py: Python<'py>, path: PathBuf, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let (map, metrics, z_d) = py.detach(|| -> tdlocate::Result<_> {
        let s = Scenario::load(&path, seed)?;
        let data = tdlocate::forward::synthesize_all(&s.materials, &s.inclusion, &s.mesh, &s.incidences.incidences())?;
        let map = td_multi(&data, &s.grid, &s.materials, &s.trial)?;
        let metrics = peak_metrics(&map, s.inclusion.center).ok();
        Ok((map, metrics, s.inclusion.center))
    })
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("points", map.grid.points())?;
    d.set_item("values", map.values)?;
    d.set_item("inclusion", z_d)?;
    if let Some(m) = metrics {
        d.set_item("peak", m.location)?;
        d.set_item("localization_error", m.localization_error)?;
        d.set_item("fwhm", m.fwhm)?;
        d.set_item("sidelobe_ratio", m.sidelobe_ratio)?;
    }
    Ok(d)
}

#[pymodule]
pub fn pytdlocate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(scalar_green, m)?)?;
    m.add_function(wrap_pyfunction!(dyadic_green, m)?)?;
    m.add_function(wrap_pyfunction!(im_dyadic_green, m)?)?;
    m.add_function(wrap_pyfunction!(image, m)?)?;
    Ok(())
}

use num_complex::Complex64;
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module<R>(f: impl FnOnce(&Bound<'_, PyModule>) -> R) -> R {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "pytdlocate").unwrap();
        pytdlocate::pytdlocate(&m).unwrap();
        f(&m)
    })
}

#[test]
fn scalar_green_matches_closed_form() {
    with_module(|m| {
        let g: Complex64 = m.getattr("scalar_green").unwrap().call1(([0.0, 0.0, 0.0], [0.0, 3.0, 4.0])).unwrap().extract().unwrap();
        let want = Complex64::new(0.0, 5.0).exp() / (4.0 * std::f64::consts::PI * 5.0);
        assert!((g - want).norm() < 1e-15);
    });
}

#[test]
fn coincident_points_raise_value_error() {
    with_module(|m| {
        let err = m.getattr("dyadic_green").unwrap().call1(([0.0; 3], [0.0; 3])).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
        let im: Vec<Vec<f64>> = m.getattr("im_dyadic_green").unwrap().call1(([0.0; 3], [0.0; 3])).unwrap().extract().unwrap();
        assert!((im[1][1] + 1.0 / (6.0 * std::f64::consts::PI)).abs() < 1e-15);
    });
}

#[test]
fn missing_scenario_raises_io_error() {
    with_module(|m| {
        let err = m.getattr("image").unwrap().call1(("/nonexistent/s.toml",)).unwrap_err();
        Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyIOError>(py)));
    });
}

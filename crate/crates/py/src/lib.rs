//! Python bindings: potentials, WKB estimate, domain layout, propagation,
//! rate fitting, absorber reflection and config-driven experiments.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wmqt::absorber::{self, DomainLayout, Sides};
use wmqt::analysis;
use wmqt::experiment::{self, Mode, RunOptions};
use wmqt::potentials::{self, WashboardParams};
use wmqt::propagator::{self, Drive, SolverConfig, TimeSeries};
use wmqt::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::LayerOutsideGrid(_) => {
            PyValueError::new_err(err.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_sides(s: &str) -> PyResult<Sides> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown sides '{s}'")))
}

/// Tilted washboard `U(x) = -V0 (cos x + gamma x)`.
#[pyclass(name = "Washboard", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyWashboard {
    inner: WashboardParams,
}

#[pymethods]
impl PyWashboard {
    #[new]
    fn new(v0: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: WashboardParams::new(v0, gamma).map_err(to_py)?,
        })
    }

    #[getter]
    fn v0(&self) -> f64 {
        self.inner.v0
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __call__(&self, x: f64) -> f64 {
        potentials::washboard_eval(&self.inner, x)
    }

    fn barrier_height(&self) -> PyResult<f64> {
        potentials::barrier_height_washboard(&self.inner).map_err(to_py)
    }

    /// `(x_min, x_top)` of the principal well.
    fn well_extrema(&self) -> PyResult<(f64, f64)> {
        potentials::well_extrema(&self.inner).map_err(to_py)
    }

    fn plasma_frequency(&self) -> PyResult<f64> {
        potentials::plasma_frequency(&self.inner).map_err(to_py)
    }

    /// `(g, omega_p)` of the cubic with the same curvature and barrier.
    fn cubic_fit(&self) -> PyResult<(f64, f64)> {
        let c = potentials::cubic_fit_from_washboard(&self.inner).map_err(to_py)?;
        Ok((c.g, c.omega_p))
    }

    fn wkb_rate(&self) -> PyResult<f64> {
        analysis::wkb_rate(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Washboard(v0={}, gamma={})", self.inner.v0, self.inner.gamma)
    }
}

/// Grid and absorbing layer placed around the principal well.
#[pyclass(name = "Layout", frozen)]
struct PyLayout {
    inner: DomainLayout,
}

#[pymethods]
impl PyLayout {
    #[staticmethod]
    #[pyo3(signature = (washboard, dx = 0.05, sides = "right"))]
    fn around_well(washboard: &PyWashboard, dx: f64, sides: &str) -> PyResult<Self> {
        let inner = DomainLayout::around_well(&washboard.inner, dx, parse_sides(sides)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn x_min(&self) -> f64 {
        self.inner.grid.x_min()
    }

    #[getter]
    fn x_max(&self) -> f64 {
        self.inner.grid.x_max()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.grid.dx()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.grid.n_points()
    }

    /// Onset of the right absorbing layer.
    #[getter]
    fn pml_x0(&self) -> f64 {
        self.inner.pml.x0
    }

    /// `(lo, hi)` of the absorber-free region.
    fn free_region(&self) -> (f64, f64) {
        let r = self.inner.pml.free_region(&self.inner.grid);
        (r.lo, r.hi)
    }

    /// Absorber strength `W(x)`.
    fn absorber(&self, x: f64) -> f64 {
        absorber::absorber_profile(&self.inner.pml, x)
    }
}

fn series_dict<'py>(py: Python<'py>, ts: &TimeSeries) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", ts.times.clone())?;
    d.set_item("gamma", ts.gamma.clone())?;
    d.set_item("survival", ts.survival.clone())?;
    d.set_item("norm_full", ts.norm_full.clone())?;
    d.set_item("x_mean", ts.x_mean.clone())?;
    d.set_item("flux_at_xstar", ts.flux_at_xstar.clone())?;
    Ok(d)
}

fn fit_dict<'py>(py: Python<'py>, f: &analysis::DecayFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rate", f.rate)?;
    d.set_item("intercept", f.intercept)?;
    d.set_item("window", f.window)?;
    d.set_item("residual_rms", f.residual_rms)?;
    Ok(d)
}

/// Propagates the relaxed (or Gaussian) well state at fixed bias and returns
/// the sampled observables as lists.
#[pyfunction]
#[pyo3(signature = (washboard, layout, dt = 0.005, t_end = 100.0, observe_every = 200, initial = "relaxed"))]
fn evolve<'py>(
    py: Python<'py>,
    washboard: &PyWashboard,
    layout: &PyLayout,
    dt: f64,
    t_end: f64,
    observe_every: usize,
    initial: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let w = washboard.inner;
    let lay = layout.inner;
    let cfg = SolverConfig {
        dt,
        t_end,
        observe_every,
        stop_survival: None,
    };
    let relaxed = match initial {
        "relaxed" => true,
        "gaussian" => false,
        other => return Err(PyValueError::new_err(format!("unknown initial state '{other}'"))),
    };
    let ev = py
        .detach(|| -> wmqt::Result<_> {
            let psi0 = if relaxed {
                let relax = SolverConfig {
                    dt: 0.005,
                    t_end: 200.0,
                    ..SolverConfig::default()
                };
                propagator::imaginary_time_relax(&w, &lay.grid, propagator::default_relax_region(&w)?, &relax)?
            } else {
                propagator::gaussian_ground_state(&w, &lay.grid)?
            };
            propagator::evolve(&psi0, &Drive::Static(w), &lay.pml, &cfg)
        })
        .map_err(to_py)?;
    series_dict(py, &ev.series)
}

/// Log-linear fit of `survival` over `window = (lo, hi)`.
#[pyfunction]
fn fit_decay_rate<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    survival: Vec<f64>,
    window: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    if t.len() != survival.len() {
        return Err(PyValueError::new_err("t and survival differ in length"));
    }
    let ts = TimeSeries::from_survival(t, survival);
    let fit = analysis::fit_decay_rate(&ts, window).map_err(to_py)?;
    fit_dict(py, &fit)
}

/// Fit over the late, post-transient part of a survival curve.
#[pyfunction]
fn fit_asymptotic<'py>(py: Python<'py>, t: Vec<f64>, survival: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    if t.len() != survival.len() {
        return Err(PyValueError::new_err("t and survival differ in length"));
    }
    let ts = TimeSeries::from_survival(t, survival);
    let fit = analysis::fit_asymptotic(&ts).map_err(to_py)?;
    fit_dict(py, &fit)
}

#[pyfunction]
fn wkb_rate(v0: f64, gamma: f64) -> PyResult<f64> {
    let w = WashboardParams::new(v0, gamma).map_err(to_py)?;
    analysis::wkb_rate(&w).map_err(to_py)
}

/// Fraction of a Gaussian packet with momentum `k` returned by the layer.
#[pyfunction]
#[pyo3(signature = (k, amplitude = 1e-3, decay_length = 1e3, width = 1e3, dx = 0.05))]
fn reflection_coefficient(
    py: Python<'_>,
    k: f64,
    amplitude: f64,
    decay_length: f64,
    width: f64,
    dx: f64,
) -> PyResult<f64> {
    py.detach(|| {
        let lay = DomainLayout::for_reflection(amplitude, decay_length, width, Sides::Right, dx, k)?;
        absorber::reflection_coefficient(&lay.pml, k, &lay.grid)
    })
    .map_err(to_py)
}

/// Runs an experiment from config text; returns the paths written.
#[pyfunction]
#[pyo3(signature = (config, out = None, threads = None))]
fn run_config(py: Python<'_>, config: &str, out: Option<PathBuf>, threads: Option<usize>) -> PyResult<Vec<PathBuf>> {
    let cfg = experiment::parse_config(config, None::<Mode>).map_err(to_py)?;
    let opts = RunOptions {
        threads,
        output_dir: out,
    };
    let report = py
        .detach(|| experiment::run_experiment_with(&cfg, &opts))
        .map_err(to_py)?;
    Ok(report.files)
}

#[pymodule]
fn pywmqt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWashboard>()?;
    m.add_class::<PyLayout>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(wkb_rate, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}

//! Python bindings: `import canvas_lab`.

use std::str::FromStr;

use canvas_core::fem::{assemble_forms, imex_stochastic_run, L2Comparator};
use canvas_core::harness::{
    canvas_error_study, det_space_rate_study, det_time_rate_study, etdr_mc, sdr_rate_study,
    tdr_rate_study, total_error_study, ErrorTable, StudyConfig, StudyKind,
};
use canvas_core::oracle::{canvas_solution, exact_etdr, exact_theta, timediscrete_solution};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: canvas_core::Error) -> PyErr {
    match e {
        canvas_core::Error::InvalidMode(_) | canvas_core::Error::StepOutOfRange { .. } => {
            PyIndexError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(canvas_core::Model);

#[pymethods]
impl PyModel {
    #[new]
    fn new(mu: f64) -> PyResult<Self> {
        canvas_core::Model::new(mu).map(Self).map_err(err)
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    /// `(λ_k, κ_k)`.
    fn rates(&self, k: usize) -> PyResult<(f64, f64)> {
        let r = self.0.eigen(k).map_err(err)?;
        Ok((r.lambda, r.kappa))
    }

    fn tail_bound(&self, k_cut: usize) -> f64 {
        self.0.tail_bound(k_cut)
    }

    fn __repr__(&self) -> String {
        format!("Model(mu={})", self.0.mu())
    }
}

#[pyclass(name = "NoiseGrid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyNoiseGrid(canvas_core::NoiseGrid);

#[pymethods]
impl PyNoiseGrid {
    #[new]
    fn new(t_final: f64, slabs: usize, modes: usize) -> PyResult<Self> {
        canvas_core::NoiseGrid::new(t_final, slabs, modes).map(Self).map_err(err)
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.0.t_final()
    }

    #[getter]
    fn slabs(&self) -> usize {
        self.0.slabs()
    }

    #[getter]
    fn modes(&self) -> usize {
        self.0.modes()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    fn __repr__(&self) -> String {
        format!("NoiseGrid(t_final={}, slabs={}, modes={})", self.0.t_final(), self.0.slabs(), self.0.modes())
    }
}

#[pyclass(name = "NoiseMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNoiseMatrix(canvas_core::NoiseMatrix);

#[pymethods]
impl PyNoiseMatrix {
    #[staticmethod]
    fn sample(grid: PyNoiseGrid, seed: u64) -> Self {
        Self(canvas_core::NoiseMatrix::sample(grid.0, seed))
    }

    #[staticmethod]
    fn zeros(grid: PyNoiseGrid) -> Self {
        Self(canvas_core::NoiseMatrix::zeros(grid.0))
    }

    /// Row-major increments `R[slab][mode]`.
    #[staticmethod]
    fn from_increments(grid: PyNoiseGrid, increments: Vec<f64>) -> PyResult<Self> {
        canvas_core::NoiseMatrix::from_increments(grid.0, increments).map(Self).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyNoiseGrid {
        PyNoiseGrid(*self.0.grid())
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.0.seed()
    }

    fn get(&self, slab: usize, mode: usize) -> PyResult<f64> {
        let g = self.0.grid();
        if !(1..=g.slabs()).contains(&slab) || !(1..=g.modes()).contains(&mode) {
            return Err(PyIndexError::new_err(format!("no increment ({slab}, {mode})")));
        }
        Ok(self.0.get(slab, mode))
    }

    fn increments(&self) -> Vec<f64> {
        self.0.increments().to_vec()
    }

    /// Sine coefficients of `∂ₓ𝒲` on one slab.
    fn dxw(&self, slab: usize) -> PyResult<PySpectralField> {
        self.0.dxw_coefficients(slab).map(PySpectralField).map_err(err)
    }

    fn dump(&self) -> PyResult<Vec<u8>> {
        let mut out = Vec::new();
        self.0.write_dump(&mut out).map_err(err)?;
        Ok(out)
    }

    #[staticmethod]
    fn load(data: &[u8]) -> PyResult<Self> {
        canvas_core::NoiseMatrix::read_dump(data).map(Self).map_err(err)
    }
}

#[pyclass(name = "SpectralField", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpectralField(canvas_core::SpectralField);

#[pymethods]
impl PySpectralField {
    #[new]
    fn new(coeffs: Vec<f64>) -> Self {
        Self(canvas_core::SpectralField::new(coeffs))
    }

    fn coeffs(&self) -> Vec<f64> {
        self.0.coeffs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.modes()
    }

    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.0.evaluate(x).map_err(err)
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn hdot_norm(&self, s: i32) -> f64 {
        self.0.hdot_norm(s)
    }

    fn semigroup(&self, model: &PyModel, t: f64) -> PyResult<Self> {
        self.0.semigroup_apply(&model.0, t).map(Self).map_err(err)
    }

    fn apply_te(&self) -> Self {
        Self(self.0.apply_te())
    }

    fn apply_tb(&self) -> Self {
        Self(self.0.apply_tb())
    }
}

/// The exact canvas solution `𝗌u(t)`.
#[pyfunction]
fn canvas_path(model: &PyModel, noise: &PyNoiseMatrix, t: f64) -> PyResult<PySpectralField> {
    canvas_solution(&model.0, &noise.0, t).map(PySpectralField).map_err(err)
}

/// `U^m` of the spectral IMEX time-discrete scheme with `steps` steps.
#[pyfunction]
fn timediscrete_path(model: &PyModel, noise: &PyNoiseMatrix, steps: usize, m: usize) -> PyResult<PySpectralField> {
    timediscrete_solution(&model.0, &noise.0, steps, m).map(PySpectralField).map_err(err)
}

/// `Θ(t)²`, split as `(resolved, truncated, tail_bound)`.
#[pyfunction]
#[pyo3(signature = (model, grid, t, k_cut = 4096))]
fn theta_squared(model: &PyModel, grid: &PyNoiseGrid, t: f64, k_cut: usize) -> PyResult<(f64, f64, f64)> {
    let th = exact_theta(&model.0, &grid.0, t, k_cut).map_err(err)?;
    Ok((th.resolved, th.truncated, th.tail_bound))
}

/// Exact `E‖𝗌u(τ_m) − U^m‖²`.
#[pyfunction]
fn etdr(model: &PyModel, grid: &PyNoiseGrid, steps: usize, m: usize) -> PyResult<f64> {
    exact_etdr(&model.0, &grid.0, steps, m).map_err(err)
}

/// Monte Carlo estimate of the same quantity: `(mean, stderr)`.
#[pyfunction]
fn etdr_monte_carlo(model: &PyModel, grid: &PyNoiseGrid, steps: usize, m: usize, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let e = etdr_mc(&model.0, &grid.0, steps, m, samples, seed).map_err(err)?;
    Ok((e.mean, e.stderr))
}

/// IMEX finite element path on `elements` cells of degree `degree`.
///
/// Returns the coefficient vectors `U_h^0..=U_h^steps` and, per step, the L² distance to
/// the spectral time-discrete solution driven by the same noise.
#[pyfunction]
#[pyo3(signature = (model, noise, steps, elements, degree = 3))]
fn fem_path(
    model: &PyModel,
    noise: &PyNoiseMatrix,
    steps: usize,
    elements: usize,
    degree: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let space = canvas_core::SplineSpace::new(elements, degree).map_err(err)?;
    let forms = assemble_forms(&space);
    let fields = imex_stochastic_run(&forms, &model.0, &noise.0, steps).map_err(err)?;
    let cmp = L2Comparator::new(&space, noise.0.grid().modes());
    let spectral = canvas_core::oracle::timediscrete_trajectory(&model.0, &noise.0, steps).map_err(err)?;
    let dist = fields
        .iter()
        .zip(&spectral)
        .map(|(u, s)| cmp.distance_sq(s, u.values()).sqrt())
        .collect();
    Ok((fields.into_iter().map(|f| f.into_values()).collect(), dist))
}

fn table_dict<'py>(py: Python<'py>, t: &ErrorTable) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("parameter", &t.parameter)?;
    d.set_item("params", t.rows.iter().map(|r| r.param).collect::<Vec<_>>())?;
    d.set_item("errors", t.errors())?;
    d.set_item("stderr", t.rows.iter().map(|r| r.mc_stderr).collect::<Vec<_>>())?;
    d.set_item("slope", t.slope())?;
    Ok(d)
}

/// Runs a named study with keyword overrides of its default configuration.
///
/// Returns a dict of tables, each with `params`, `errors`, `stderr` and `slope`.
#[pyfunction]
#[pyo3(signature = (name, **overrides))]
fn run_study<'py>(py: Python<'py>, name: &str, overrides: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let kind = StudyKind::from_str(name).map_err(err)?;
    let mut cfg = StudyConfig::for_study(kind);
    if let Some(o) = overrides {
        for (k, v) in o.iter() {
            let key: String = k.extract()?;
            match key.as_str() {
                "t_final" => cfg.t_final = v.extract()?,
                "mu" => cfg.mu = v.extract()?,
                "degree" => cfg.degree = v.extract()?,
                "w0" => cfg.w0 = v.extract()?,
                "steps_sweep" => cfg.steps_sweep = v.extract()?,
                "elements_sweep" => cfg.elements_sweep = v.extract()?,
                "steps" => cfg.steps = v.extract()?,
                "modes_sweep" => cfg.modes_sweep = v.extract()?,
                "slabs_sweep" => cfg.slabs_sweep = v.extract()?,
                "slabs" => cfg.slabs = v.extract()?,
                "modes" => cfg.modes = v.extract()?,
                "samples" => cfg.samples = v.extract()?,
                "seed" => cfg.seed = v.extract()?,
                "k_cut" => cfg.k_cut = v.extract()?,
                other => return Err(PyValueError::new_err(format!("unknown config key '{other}'"))),
            }
        }
    }
    let out = PyDict::new(py);
    let result = py.detach(|| -> canvas_core::Result<Vec<(&'static str, ErrorTable)>> {
        Ok(match kind {
            StudyKind::DetTime => vec![("time", det_time_rate_study(&cfg)?)],
            StudyKind::DetSpace => vec![("space", det_space_rate_study(&cfg)?)],
            StudyKind::Canvas => {
                let c = canvas_error_study(&cfg)?;
                vec![("modes", c.modes), ("slabs", c.slabs), ("truncated", c.truncated)]
            }
            StudyKind::Tdr => vec![("tdr", tdr_rate_study(&cfg)?)],
            StudyKind::Sdr => vec![("sdr", sdr_rate_study(&cfg)?)],
            StudyKind::Total => vec![("sdr", total_error_study(&cfg)?.sdr)],
        })
    });
    for (label, t) in result.map_err(err)? {
        out.set_item(label, table_dict(py, &t)?)?;
    }
    Ok(out)
}

#[pymodule]
fn canvas_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyNoiseGrid>()?;
    m.add_class::<PyNoiseMatrix>()?;
    m.add_class::<PySpectralField>()?;
    m.add_function(wrap_pyfunction!(canvas_path, m)?)?;
    m.add_function(wrap_pyfunction!(timediscrete_path, m)?)?;
    m.add_function(wrap_pyfunction!(theta_squared, m)?)?;
    m.add_function(wrap_pyfunction!(etdr, m)?)?;
    m.add_function(wrap_pyfunction!(etdr_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(fem_path, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! Python bindings for the `layerfield` crate.

use std::path::PathBuf;

use layerfield::cli::{run_evolution, ExperimentConfig};
use layerfield::epr::{correlation, correlation_at, Singlet};
use layerfield::{
    verify, Lattice3D, Layer as CoreLayer, MultiLayerState as CoreState, OneParticleField, ParticleSpec as CoreSpec, SiteIndex,
    Statistics, Symmetry, Tolerance, TruncatedFock,
};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: layerfield::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn statistics(name: &str) -> PyResult<Statistics> {
    match name {
        "distinguishable" => Ok(Statistics::Distinguishable),
        "boson" => Ok(Statistics::Boson),
        "fermion" => Ok(Statistics::Fermion),
        other => Err(PyValueError::new_err(format!("unknown statistics {other:?}"))),
    }
}

fn symmetry(name: &str) -> PyResult<Symmetry> {
    match name {
        "none" => Ok(Symmetry::None),
        "symmetric" => Ok(Symmetry::Symmetric),
        "antisymmetric" => Ok(Symmetry::Antisymmetric),
        other => Err(PyValueError::new_err(format!("unknown symmetry {other:?}"))),
    }
}

#[pyclass(name = "Lattice", frozen, from_py_object)]
#[derive(Clone)]
pub struct Lattice(Lattice3D);

#[pymethods]
impl Lattice {
    #[new]
    #[pyo3(signature = (dims, spacing = 1.0))]
    fn new(dims: [usize; 3], spacing: f64) -> PyResult<Self> {
        Lattice3D::new(dims, spacing).map(Self).map_err(err)
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        Lattice3D::ring(n).map(Self).map_err(err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn site_count(&self) -> usize {
        self.0.site_count()
    }

    fn position(&self, site: usize) -> PyResult<[f64; 3]> {
        self.0.position(SiteIndex(site)).map_err(err)
    }

    fn distance(&self, a: usize, b: usize) -> PyResult<f64> {
        self.0.distance(SiteIndex(a), SiteIndex(b)).map_err(err)
    }

    fn neighbors(&self, site: usize) -> PyResult<Vec<usize>> {
        Ok(self.0.neighbors(SiteIndex(site)).map_err(err)?.into_iter().map(|s| s.0).collect())
    }

    fn laplacian(&self, values: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.laplacian_apply(&values).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Lattice(dims={:?}, spacing={:?})", self.0.dims(), self.0.spacing())
    }
}

#[pyclass(name = "ParticleSpec", frozen, from_py_object)]
#[derive(Clone)]
pub struct ParticleSpec(CoreSpec);

#[pymethods]
impl ParticleSpec {
    #[new]
    #[pyo3(signature = (label, internal_dim = 1, statistics = "distinguishable", mass = 1.0))]
    fn new(label: String, internal_dim: usize, statistics: &str, mass: f64) -> PyResult<Self> {
        CoreSpec::new(label, internal_dim, self::statistics(statistics)?, mass).map(Self).map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label.clone()
    }

    #[getter]
    fn internal_dim(&self) -> usize {
        self.0.internal_dim
    }
}

#[pyclass(name = "Field", frozen, from_py_object)]
#[derive(Clone)]
pub struct Field(OneParticleField);

#[pymethods]
impl Field {
    /// Amplitudes are site-major: `amplitudes[site * internal_dim + k]`.
    #[new]
    fn new(lattice: &Lattice, spec: &ParticleSpec, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        OneParticleField::from_amplitudes(lattice.0, spec.0.clone(), amplitudes).map(Self).map_err(err)
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn inner(&self, other: &Field) -> PyResult<Complex64> {
        self.0.inner(&other.0).map_err(err)
    }
}

#[pyclass(name = "Layer", frozen, from_py_object)]
#[derive(Clone)]
pub struct Layer(CoreLayer);

#[pymethods]
impl Layer {
    /// Canonical layer representing the product of `fields`.
    #[new]
    fn new(fields: Vec<Field>) -> PyResult<Self> {
        CoreLayer::from_fields(fields.into_iter().map(|f| f.0).collect()).map(Self).map_err(err)
    }

    #[getter]
    fn amplitude(&self) -> Complex64 {
        self.0.amplitude()
    }

    #[getter]
    fn factors(&self) -> Vec<Field> {
        self.0.factors().iter().cloned().map(Field).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn is_canonical(&self, tol: f64) -> bool {
        self.0.is_canonical(tol)
    }

    #[pyo3(signature = (other, tol = 1e-10))]
    fn equals(&self, other: &Layer, tol: f64) -> PyResult<bool> {
        self.0.equals(&other.0, Tolerance::uniform(tol)).map_err(err)
    }

    fn scale(&self, c: Complex64) -> Self {
        Self(self.0.scale(c))
    }
}

#[pyclass(name = "MultiLayerState", frozen, from_py_object)]
#[derive(Clone)]
pub struct MultiLayerState(CoreState);

#[pymethods]
impl MultiLayerState {
    #[staticmethod]
    fn from_layer(layer: &Layer) -> PyResult<Self> {
        CoreState::from_layer(&layer.0).map(Self).map_err(err)
    }

    /// `a * self + b * other`.
    fn add(&self, a: Complex64, b: Complex64, other: &MultiLayerState) -> PyResult<Self> {
        CoreState::add(a, &self.0, b, &other.0).map(Self).map_err(err)
    }

    fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.scaled(c))
    }

    fn inner(&self, other: &MultiLayerState) -> PyResult<Complex64> {
        self.0.inner(&other.0).map_err(err)
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn symmetrize(&self, symmetry: &str) -> PyResult<Self> {
        self.0.symmetrize(self::symmetry(symmetry)?).map(Self).map_err(err)
    }

    /// Nonzero coefficients keyed by slot index tuples.
    fn terms<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (idx, c) in self.0.terms() {
            out.set_item(pyo3::types::PyTuple::new(py, idx.slots())?, *c)?;
        }
        Ok(out)
    }

    fn to_dense(&self) -> PyResult<Vec<Complex64>> {
        self.0.to_dense_vec().map_err(err)
    }

    #[pyo3(signature = (rel_tol = 1e-10))]
    fn schmidt_layers(&self, rel_tol: f64) -> PyResult<Vec<Layer>> {
        Ok(self.0.schmidt_layers(rel_tol).map_err(err)?.into_iter().map(Layer).collect())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Run one verification suite, or `"all"`, and return its reports.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = 0))]
fn run_verify<'py>(py: Python<'py>, suite: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py_json(py, &verify::run(suite, seed).map_err(err)?)
}

/// Singlet spin correlation at tilt `theta`, or along explicit axes `a` and `b`.
#[pyfunction]
#[pyo3(signature = (theta = None, a = None, b = None))]
fn epr<'py>(py: Python<'py>, theta: Option<f64>, a: Option<[f64; 3]>, b: Option<[f64; 3]>) -> PyResult<Bound<'py, PyAny>> {
    let singlet = Singlet::new().map_err(err)?;
    let row = match (theta, a, b) {
        (Some(t), None, None) => correlation_at(&singlet, t),
        (None, Some(a), Some(b)) => correlation(&singlet, a, b),
        _ => return Err(PyValueError::new_err("pass either theta or both a and b")),
    }
    .map_err(err)?;
    to_py_json(py, &row)
}

/// Commutator deviations of the truncated Fock ladder operators on an `modes`-site ring.
#[pyfunction]
#[pyo3(signature = (modes, cutoff = 3))]
fn fock_ccr<'py>(py: Python<'py>, modes: usize, cutoff: usize) -> PyResult<Bound<'py, PyAny>> {
    let fock = TruncatedFock::ring(modes, cutoff).map_err(err)?;
    to_py_json(py, &fock.ccr_check().map_err(err)?)
}

/// Run the experiment described by a TOML config and return the recorded observables.
#[pyfunction]
fn evolve<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::load(&config).map_err(err)?;
    to_py_json(py, &run_evolution(&cfg).map_err(err)?)
}

#[pymodule]
#[pyo3(name = "layerfield")]
fn layerfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lattice>()?;
    m.add_class::<ParticleSpec>()?;
    m.add_class::<Field>()?;
    m.add_class::<Layer>()?;
    m.add_class::<MultiLayerState>()?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(epr, m)?)?;
    m.add_function(wrap_pyfunction!(fock_ccr, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}

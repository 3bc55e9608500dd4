//! Python bindings. Matrices cross the boundary as nested lists of
//! `complex`; reports come back as dictionaries.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use rri_core::bombardment::{self, BombardmentSpec};
use rri_core::channels::Superoperator as CoreSuperoperator;
use rri_core::cli::{self, config::ModelConfig, RunConfig};
use rri_core::interpolation::{self, LiouvillianSeries as CoreSeries};
use rri_core::{lindblad, ComplexMatrix, DensityMatrix, Error, Tolerances};

create_exception!(rri, BranchCutError, PyArithmeticError);

type Rows = Vec<Vec<Complex64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::BranchCutViolation { .. } | Error::SingularInput { .. } => {
            BranchCutError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_rows(m: &ComplexMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: Rows) -> PyResult<ComplexMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A collision-model specification.
#[pyclass(module = "rri", frozen, skip_from_py_object)]
struct Spec {
    inner: BombardmentSpec,
}

#[pymethods]
impl Spec {
    /// Builds a named preset with default parameters, optionally overriding
    /// fields given as keyword arguments (e.g. `dt=0.01`).
    #[staticmethod]
    #[pyo3(signature = (name, **params))]
    fn preset(py: Python<'_>, name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let json = py.import("json")?;
        let extra: String = match params {
            Some(p) => json.call_method1("dumps", (p,))?.extract()?,
            None => "{}".into(),
        };
        let mut value: serde_json::Value =
            serde_json::from_str(&extra).map_err(|e| PyValueError::new_err(e.to_string()))?;
        value["name"] = serde_json::Value::from(name);
        Self::from_model(value)
    }

    /// Parses a model object: a preset `{"name": ...}` or an inline spec.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Self::from_model(value)
    }

    #[getter]
    fn dim_s(&self) -> usize {
        self.inner.dim_s
    }

    #[getter]
    fn dim_a(&self) -> usize {
        self.inner.dim_a
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn with_dt(&self, dt: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_dt(dt).map_err(py_err)?,
        })
    }

    /// The update map φ(dt) at the spec's time step.
    fn update_map(&self) -> PyResult<Superoperator> {
        Ok(Superoperator {
            inner: bombardment::build_update_map(&self.inner).map_err(py_err)?,
        })
    }

    /// Coefficients φ₁ … φ_k of the update map's series in dt.
    fn phi_series(&self, k: usize) -> PyResult<Vec<Superoperator>> {
        let s = bombardment::phi_series(&self.inner, k).map_err(py_err)?;
        Ok(s.terms
            .into_iter()
            .map(|inner| Superoperator { inner })
            .collect())
    }

    /// Liouvillian series L₀ … L_{k−1} built from k φ coefficients.
    #[pyo3(signature = (k = 4))]
    fn liouvillian_series(&self, k: usize) -> PyResult<LiouvillianSeries> {
        Ok(LiouvillianSeries {
            inner: bombardment::liouvillian_series(&self.inner, k).map_err(py_err)?,
        })
    }

    /// Leading-order image `L₁[I]` from the closed form.
    fn l1_identity_action(&self) -> PyResult<Rows> {
        bombardment::l1_identity_action(&self.inner.interaction, &self.inner.rho_a)
            .map(|m| to_rows(&m))
            .map_err(py_err)
    }

    #[pyo3(signature = (tol = 1e-8))]
    fn gen_cond<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = bombardment::gen_cond_check(&self.inner.interaction, &self.inner.rho_a, tol)
            .map_err(py_err)?;
        to_dict(py, &r)
    }

    /// Purification order with the unitality sweep over `dts`.
    #[pyo3(signature = (k = 4, tol = 1e-8, dts = None))]
    fn purification_report<'py>(
        &self,
        py: Python<'py>,
        k: usize,
        tol: f64,
        dts: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let dts = dts.unwrap_or_else(|| rri_core::fit::logspace(1e-3, 1e-1, 9));
        let r = bombardment::purification_report(&self.inner, k, tol, &dts).map_err(py_err)?;
        to_dict(py, &r)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec(dim_s={}, dim_a={}, dt={})",
            self.inner.dim_s, self.inner.dim_a, self.inner.dt
        )
    }
}

impl Spec {
    fn from_model(value: serde_json::Value) -> PyResult<Self> {
        let model: ModelConfig =
            serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: model.build().map_err(py_err)?,
        })
    }
}

/// A linear map on d×d matrices in column-stacking representation.
#[pyclass(module = "rri", frozen, skip_from_py_object)]
struct Superoperator {
    inner: CoreSuperoperator,
}

#[pymethods]
impl Superoperator {
    #[new]
    fn new(dim: usize, rep: Rows) -> PyResult<Self> {
        Ok(Self {
            inner: CoreSuperoperator::new(dim, from_rows(rep)?).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_kraus(kraus: Vec<Rows>) -> PyResult<Self> {
        let ks = kraus
            .into_iter()
            .map(from_rows)
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: CoreSuperoperator::from_kraus(&ks).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn rep(&self) -> Rows {
        to_rows(self.inner.rep())
    }

    fn apply(&self, x: Rows) -> PyResult<Rows> {
        self.inner
            .apply(&from_rows(x)?)
            .map(|m| to_rows(&m))
            .map_err(py_err)
    }

    /// `self ∘ first`.
    fn after(&self, first: &Superoperator) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.after(&first.inner).map_err(py_err)?,
        })
    }

    /// `(unital, ‖φ[I] − I‖_F)`.
    #[pyo3(signature = (tol = 1e-10))]
    fn is_unital(&self, tol: f64) -> (bool, f64) {
        self.inner.is_unital(tol)
    }

    fn verify_cptp<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.verify_cptp())
    }

    fn kraus_operators(&self) -> PyResult<Vec<Rows>> {
        let ks = self
            .inner
            .kraus_operators(&Tolerances::default())
            .map_err(py_err)?;
        Ok(ks.iter().map(to_rows).collect())
    }

    /// `(1/dt) log φ` on the principal branch.
    fn effective_liouvillian(&self, dt: f64) -> PyResult<Self> {
        Ok(Self {
            inner: interpolation::effective_liouvillian(&self.inner, dt).map_err(py_err)?,
        })
    }

    /// GKS decomposition into a Hamiltonian and rated jump operators.
    fn lindblad_decompose<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &lindblad::decompose(&self.inner).map_err(py_err)?)
    }

    /// `(dP/dt, Tr(L[I] ρ²), bound holds)` for this generator.
    fn purity_bound(&self, rho: Rows) -> PyResult<(f64, f64, bool)> {
        let rho = DensityMatrix::new(from_rows(rho)?).map_err(py_err)?;
        let b = lindblad::purity_bound_check(&self.inner, &rho).map_err(py_err)?;
        Ok((b.lhs, b.rhs, b.holds))
    }

    fn __repr__(&self) -> String {
        format!("Superoperator(dim={})", self.inner.dim())
    }
}

#[pyclass(module = "rri", frozen)]
struct LiouvillianSeries {
    inner: CoreSeries,
}

#[pymethods]
impl LiouvillianSeries {
    #[getter]
    fn truncation_order(&self) -> usize {
        self.inner.truncation_order()
    }

    fn coeff(&self, k: usize) -> Option<Superoperator> {
        self.inner
            .coeff(k)
            .map(|c| Superoperator { inner: c.clone() })
    }

    /// `L_k[I]` for every k.
    fn identity_images(&self) -> Vec<Rows> {
        self.inner.identity_images().iter().map(to_rows).collect()
    }

    fn evaluate(&self, dt: f64) -> Superoperator {
        Superoperator {
            inner: self.inner.evaluate(dt),
        }
    }

    #[pyo3(signature = (tol = 1e-8))]
    fn purification_order<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = interpolation::purification_order(&self.inner, tol);
        to_dict(py, &r.order)
    }
}

fn config_and_spec(config: &str) -> PyResult<(RunConfig, BombardmentSpec)> {
    let cfg = RunConfig::parse(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let spec = cfg
        .model
        .build()
        .and_then(|s| cli::config::rescale(&s, cfg.hbar))
        .map_err(py_err)?;
    Ok((cfg, spec))
}

fn cli_err(e: cli::CliError) -> PyErr {
    match e {
        cli::CliError::Numeric(e) => py_err(e),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Runs the `analyze` command on a JSON run configuration.
#[pyfunction]
fn analyze<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let (cfg, spec) = config_and_spec(config)?;
    to_dict(py, &cli::analyze(&cfg, &spec).map_err(cli_err)?)
}

/// Runs the `sweep` command on a JSON run configuration.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let (cfg, spec) = config_and_spec(config)?;
    let a = &cfg.analysis;
    to_dict(
        py,
        &cli::sweep(&spec, &a.dt_sweep, a.max_order, a.tolerance).map_err(cli_err)?,
    )
}

/// Runs the `simulate` command; returns the trajectory rows.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let (cfg, spec) = config_and_spec(config)?;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| PyValueError::new_err("configuration has no `simulate` block"))?;
    let traj = cli::simulate(
        &spec,
        sim.steps,
        sim.record_every,
        sim.initial_state.as_ref(),
    )
    .map_err(cli_err)?;
    to_dict(py, &traj)
}

#[pymodule]
fn rri(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli::VERSION)?;
    m.add("BranchCutError", m.py().get_type::<BranchCutError>())?;
    m.add_class::<Spec>()?;
    m.add_class::<Superoperator>()?;
    m.add_class::<LiouvillianSeries>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

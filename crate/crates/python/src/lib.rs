//! Python bindings. Matrices cross the boundary as lists of rows and series
//! as lists of observations (each a list of `N` floats).

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use meta_smooth::error::Error;
use meta_smooth::linalg::Matrix;
use meta_smooth::model::matrix_to_rows;
use meta_smooth::series::{SeriesKind, SeriesMatrix};
use meta_smooth::{bench, forecast, meta, ml, model, simulate as sim};

create_exception!(meta_smooth_py, EstimationError, PyException, "An estimator could not produce a fit.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::EstimationFailed { .. } | Error::DegenerateSeries | Error::NotRepresentable { .. } => {
            EstimationError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty square list of rows")));
    }
    Ok(Matrix::from_row_slice(n, n, &rows.concat()))
}

fn series(rows: Vec<Vec<f64>>, kind: SeriesKind) -> PyResult<SeriesMatrix> {
    SeriesMatrix::from_rows(kind, &rows).map_err(to_py)
}

fn series_rows(s: &SeriesMatrix) -> Vec<Vec<f64>> {
    s.row_iter().map(<[f64]>::to_vec).collect()
}

/// Noise covariances of the local-level model `y_t = μ_t + ε_t`, `μ_t = μ_{t-1} + η_t`.
#[pyclass(name = "StructuralParams", module = "meta_smooth_py", frozen)]
struct PyStructural {
    inner: model::StructuralParams,
}

#[pymethods]
impl PyStructural {
    #[new]
    fn new(sigma_eta: Vec<Vec<f64>>, sigma_eps: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = model::StructuralParams::new(matrix(sigma_eta, "sigma_eta")?, matrix(sigma_eps, "sigma_eps")?)
            .map_err(to_py)?;
        Ok(PyStructural { inner })
    }

    /// One of the four built-in models.
    #[staticmethod]
    fn preset(model: u32) -> PyResult<Self> {
        Ok(PyStructural {
            inner: sim::preset(model).map_err(to_py)?,
        })
    }

    #[getter]
    fn sigma_eta(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.sigma_eta)
    }

    #[getter]
    fn sigma_eps(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.sigma_eps)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    fn to_reduced(&self) -> PyResult<PyReduced> {
        Ok(PyReduced {
            inner: model::structural_to_reduced(&self.inner).map_err(to_py)?,
        })
    }

    /// Simulated levels, `len` rows.
    #[pyo3(signature = (len, seed = 0))]
    fn simulate(&self, len: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let y = sim::simulate(&sim::SimulationSpec::new(self.inner.clone(), len, seed)).map_err(to_py)?;
        Ok(series_rows(&y))
    }

    fn __repr__(&self) -> String {
        format!("StructuralParams(sigma_eta={:?}, sigma_eps={:?})", self.sigma_eta(), self.sigma_eps())
    }
}

/// `(Θ, Σ_u)` of `Δy_t = u_t − Θ u_{t−1}`.
#[pyclass(name = "ReducedParams", module = "meta_smooth_py", frozen)]
struct PyReduced {
    inner: model::ReducedParams,
}

#[pymethods]
impl PyReduced {
    #[new]
    fn new(theta: Vec<Vec<f64>>, sigma_u: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = model::ReducedParams::new(matrix(theta, "theta")?, matrix(sigma_u, "sigma_u")?).map_err(to_py)?;
        Ok(PyReduced { inner })
    }

    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.theta)
    }

    #[getter]
    fn sigma_u(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.sigma_u)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    fn to_structural(&self) -> PyResult<PyStructural> {
        Ok(PyStructural {
            inner: model::reduced_to_structural(&self.inner).map_err(to_py)?,
        })
    }

    /// `(gamma0, gamma1)` of the differenced process.
    fn autocov(&self) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let a = model::params_to_autocov(&self.inner).map_err(to_py)?;
        Ok((matrix_to_rows(&a.gamma0), matrix_to_rows(&a.gamma1)))
    }

    /// Negative log-likelihood of differenced data (constants dropped).
    fn nll(&self, z: Vec<Vec<f64>>) -> PyResult<f64> {
        ml::vma_nll(&series(z, SeriesKind::Differences)?, &self.inner).map_err(to_py)
    }

    /// One-step-ahead forecast after the given level observations.
    fn forecast(&self, levels: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        forecast::forecast_after(&self.inner.theta, &series(levels, SeriesKind::Levels)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("ReducedParams(theta={:?}, sigma_u={:?})", self.theta(), self.sigma_u())
    }
}

type Aggregate = (String, f64, f64);

#[pyclass(name = "MetaFit", module = "meta_smooth_py", frozen)]
struct PyMetaFit {
    report: meta::MetaFitReport,
}

#[pymethods]
impl PyMetaFit {
    #[getter]
    fn reduced(&self) -> PyReduced {
        PyReduced {
            inner: self.report.reduced.clone(),
        }
    }

    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.report.reduced.theta)
    }

    #[getter]
    fn sigma_u(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.report.reduced.sigma_u)
    }

    #[getter]
    fn sigma_eta(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.report.structural.sigma_eta)
    }

    #[getter]
    fn sigma_eps(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.report.structural.sigma_eps)
    }

    #[getter]
    fn structural_valid(&self) -> bool {
        self.report.diagnostics.structural_valid
    }

    #[getter]
    fn boundary_weights(&self) -> Vec<String> {
        self.report.diagnostics.boundary_weights.clone()
    }

    /// `(weight, psi, sigma)` for every aggregate, in fitting order.
    #[getter]
    fn aggregates(&self) -> Vec<Aggregate> {
        self.report
            .per_weight
            .iter()
            .map(|w| (w.weight.to_string(), w.fit.params.psi, w.fit.params.sigma))
            .collect()
    }

    /// The full report as a JSON string.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.report).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Differences of a level series.
#[pyfunction]
fn difference(levels: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(series_rows(&sim::difference(&series(levels, SeriesKind::Levels)?).map_err(to_py)?))
}

/// Aggregation estimator on differenced data.
#[pyfunction]
fn meta_fit(z: Vec<Vec<f64>>) -> PyResult<PyMetaFit> {
    let report = meta::meta_fit(&series(z, SeriesKind::Differences)?).map_err(to_py)?;
    Ok(PyMetaFit { report })
}

/// Sample-moment estimator on differenced data.
#[pyfunction]
fn mom_fit(z: Vec<Vec<f64>>) -> PyResult<PyReduced> {
    let inner = meta::mom_fit(&series(z, SeriesKind::Differences)?).map_err(to_py)?;
    Ok(PyReduced { inner })
}

/// Gaussian maximum likelihood on differenced data; `init` is `"moment"` or `"meta"`.
#[pyfunction]
#[pyo3(signature = (z, init = "moment", max_iterations = 500))]
fn ml_fit(z: Vec<Vec<f64>>, init: &str, max_iterations: usize) -> PyResult<PyReduced> {
    let init = match init {
        "moment" => ml::MlInit::Moment,
        "meta" => ml::MlInit::Meta,
        other => return Err(PyValueError::new_err(format!("unknown init {other:?}"))),
    };
    let cfg = ml::MlConfig {
        init,
        max_iterations,
        ..ml::MlConfig::default()
    };
    let fit = ml::ml_fit(&series(z, SeriesKind::Differences)?, &cfg).map_err(to_py)?;
    Ok(PyReduced { inner: fit.reduced })
}

/// Relative Frobenius error `‖est − truth‖ / ‖truth‖`.
#[pyfunction]
fn rmse(estimate: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<f64> {
    bench::rmse(&matrix(estimate, "estimate")?, &matrix(truth, "truth")?).map_err(to_py)
}

#[pymodule]
fn meta_smooth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStructural>()?;
    m.add_class::<PyReduced>()?;
    m.add_class::<PyMetaFit>()?;
    m.add_function(wrap_pyfunction!(difference, m)?)?;
    m.add_function(wrap_pyfunction!(meta_fit, m)?)?;
    m.add_function(wrap_pyfunction!(mom_fit, m)?)?;
    m.add_function(wrap_pyfunction!(ml_fit, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add("EstimationError", m.py().get_type::<EstimationError>())?;
    Ok(())
}

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use klmin::{DiagSpectrum, GapReport, McEstimate, PropertyReport};

fn to_py(e: klmin::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn spd(rows: Vec<Vec<f64>>) -> PyResult<klmin::SpdMatrix> {
    klmin::validate_spd(&rows).map_err(to_py)
}

fn diag(v: Vec<f64>) -> PyResult<DiagSpectrum> {
    DiagSpectrum::new(v).map_err(to_py)
}

fn gap_dict<'py>(py: Python<'py>, g: &GapReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("kl_exact", g.kl_exact.0)?;
    d.set_item("bound", g.bound.0)?;
    d.set_item("gap", g.gap)?;
    d.set_item("raw_gap", g.raw_gap)?;
    d.set_item("clamped", g.clamped)?;
    Ok(d)
}

fn estimate_dict<'py>(py: Python<'py>, e: &McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", e.value.0)?;
    d.set_item("std_error", e.std_error)?;
    d.set_item("n_samples", e.n_samples)?;
    d.set_item("seed", e.seed)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &PropertyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("proposition", r.proposition.as_str())?;
    d.set_item("trials", r.trials)?;
    d.set_item("violations", r.violations)?;
    d.set_item("equality_violations", r.equality_violations)?;
    d.set_item("worst_margin", r.worst_margin)?;
    d.set_item("roundoff_negatives", r.roundoff_negatives)?;
    d.set_item("config_digest", &r.config_digest)?;
    Ok(d)
}

/// Symmetric positive-definite matrix.
#[pyclass(name = "SpdMatrix", frozen)]
struct PySpdMatrix {
    inner: klmin::SpdMatrix,
}

#[pymethods]
impl PySpdMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PySpdMatrix { inner: spd(rows)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.inner.dim()).map(|i| self.inner.get(i, i)).collect()
    }

    fn log_det(&self) -> PyResult<f64> {
        Ok(klmin::cholesky(&self.inner).map_err(to_py)?.log_det())
    }

    fn __repr__(&self) -> String {
        format!("SpdMatrix({:?})", self.inner.to_rows())
    }
}

/// Zero-mean Gaussian or two-component Gaussian mixture.
#[pyclass(name = "DensityModel", frozen)]
struct PyDensityModel {
    inner: klmin::DensityModel,
}

#[pymethods]
impl PyDensityModel {
    #[staticmethod]
    fn gaussian(covariance: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = klmin::DensityModel::gaussian(&spd(covariance)?).map_err(to_py)?;
        Ok(PyDensityModel { inner })
    }

    #[staticmethod]
    fn mixture(weight: f64, first: Vec<Vec<f64>>, second: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = klmin::DensityModel::mixture(weight, &spd(first)?, &spd(second)?).map_err(to_py)?;
        Ok(PyDensityModel { inner })
    }

    #[staticmethod]
    fn matched_mixture(target: Vec<Vec<f64>>, weight: f64, spread: f64) -> PyResult<Self> {
        let inner = klmin::build_matched_mixture(&spd(target)?, weight, spread).map_err(to_py)?;
        Ok(PyDensityModel { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            klmin::ModelKind::Gaussian => "gaussian",
            klmin::ModelKind::TwoComponentMixture => "two-component-mixture",
        }
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance().to_rows()
    }

    fn log_density(&self, point: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density(&point).map_err(to_py)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.inner.sample(n, seed)
    }
}

#[pyfunction]
fn validate_spd(rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(spd(rows)?.to_rows())
}

/// Returns `(lower, log_det)`.
#[pyfunction]
fn cholesky(rows: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let f = klmin::cholesky(&spd(rows)?).map_err(to_py)?;
    Ok((f.lower_rows(), f.log_det()))
}

#[pyfunction]
fn trace_ratio(sy: Vec<Vec<f64>>, sx: Vec<Vec<f64>>) -> PyResult<f64> {
    let fx = klmin::cholesky(&spd(sx)?).map_err(to_py)?;
    klmin::trace_ratio(&spd(sy)?, &fx).map_err(to_py)
}

#[pyfunction]
fn random_spd(dim: usize, seed: u64, condition_target: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(klmin::random_spd(dim, seed, condition_target).map_err(to_py)?.to_rows())
}

#[pyfunction]
fn kl_gaussian(sx: Vec<Vec<f64>>, sy: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(klmin::kl_gaussian(&spd(sx)?, &spd(sy)?).map_err(to_py)?.0)
}

#[pyfunction]
fn kl_scalar(var_x: f64, var_y: f64) -> PyResult<f64> {
    Ok(klmin::kl_scalar(var_x, var_y).map_err(to_py)?.0)
}

#[pyfunction]
fn kl_diagonal(lx: Vec<f64>, ly: Vec<f64>) -> PyResult<f64> {
    Ok(klmin::kl_diagonal(&diag(lx)?, &diag(ly)?).map_err(to_py)?.0)
}

#[pyfunction]
fn diagonal_lower_bound(lx: Vec<f64>, sy: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(klmin::diagonal_lower_bound(&diag(lx)?, &spd(sy)?).map_err(to_py)?.0)
}

#[pyfunction]
fn kl_gap_diagonal(py: Python<'_>, lx: Vec<f64>, sy: Vec<Vec<f64>>) -> PyResult<Py<PyDict>> {
    let g = klmin::kl_gap_diagonal(&diag(lx)?, &spd(sy)?).map_err(to_py)?;
    Ok(gap_dict(py, &g)?.unbind())
}

#[pyfunction]
fn gaussian_entropy(covariance: Vec<Vec<f64>>) -> PyResult<f64> {
    let f = klmin::cholesky(&spd(covariance)?).map_err(to_py)?;
    Ok(klmin::gaussian_entropy(&f).0)
}

#[pyfunction]
fn mc_kl(py: Python<'_>, p_y: &PyDensityModel, p_x: &PyDensityModel, n: usize, seed: u64) -> PyResult<Py<PyDict>> {
    let e = py
        .detach(|| klmin::mc_kl(&p_y.inner, &p_x.inner, n, seed))
        .map_err(to_py)?;
    Ok(estimate_dict(py, &e)?.unbind())
}

#[pyfunction]
#[pyo3(signature = (proposition, trials, dim, seed, condition_target = 1e4, n_samples = 100_000))]
fn verify(
    py: Python<'_>,
    proposition: &str,
    trials: usize,
    dim: usize,
    seed: u64,
    condition_target: f64,
    n_samples: usize,
) -> PyResult<Py<PyDict>> {
    let report = py
        .detach(|| match proposition {
            "p1" => klmin::check_prop1(trials, dim, seed, n_samples),
            "p2" => klmin::check_prop2_random(trials, dim..=dim, seed, condition_target),
            "p3" => klmin::check_prop3(trials, dim, seed, condition_target),
            "c1" => klmin::check_c1(trials, dim, seed, n_samples),
            other => Err(klmin::Error::InvalidArgument(format!("unknown proposition {other:?}"))),
        })
        .map_err(to_py)?;
    Ok(report_dict(py, &report)?.unbind())
}

#[pymodule]
fn klmin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpdMatrix>()?;
    m.add_class::<PyDensityModel>()?;
    m.add_function(wrap_pyfunction!(validate_spd, m)?)?;
    m.add_function(wrap_pyfunction!(cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(trace_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(random_spd, m)?)?;
    m.add_function(wrap_pyfunction!(kl_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(kl_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(kl_diagonal, m)?)?;
    m.add_function(wrap_pyfunction!(diagonal_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kl_gap_diagonal, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(mc_kl, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

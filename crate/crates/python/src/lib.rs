//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (row-major); Hermitian inputs are symmetrized on entry.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use moi_core::ddiff::{dd_simplex_oracle, divided_difference as dd, NodeList};
use moi_core::experiment::{run, Command, ExperimentConfig, ReportRow};
use moi_core::funcmodel::{FunctionModel, FunctionSpec};
use moi_core::linalg::{schatten_norm as schatten, ComplexMatrix, EigenDecomposition, HermitianMatrix, SchattenIndex};
use moi_core::moi::{moi_apply as apply, MoiKernel};
use moi_core::perturb::{self, PerturbationPath};
use moi_core::Error;

type Rows = Vec<Vec<Complex64>>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Rows) -> PyResult<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    ComplexMatrix::new(r, c, rows.into_iter().flatten().collect()).map_err(to_py)
}

fn hermitian(rows: Rows) -> PyResult<HermitianMatrix> {
    HermitianMatrix::new(matrix(rows)?).map_err(to_py)
}

fn rows_of(m: &ComplexMatrix) -> Rows {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

fn index(p: f64) -> PyResult<SchattenIndex> {
    SchattenIndex::new(p).map_err(to_py)
}

/// A scalar function with analytic derivatives.
#[pyclass(name = "FunctionModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyFunctionModel {
    inner: FunctionModel,
}

#[pymethods]
impl PyFunctionModel {
    /// Parses `kind:params`, e.g. `exp:1`, `invquad`, `poly:1,0,0` (x²).
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let spec: FunctionSpec = spec.parse().map_err(to_py)?;
        Ok(PyFunctionModel {
            inner: spec.to_model().map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn exp(scale: f64) -> Self {
        PyFunctionModel {
            inner: FunctionModel::exp(scale),
        }
    }

    #[staticmethod]
    fn sin(frequency: f64) -> Self {
        PyFunctionModel {
            inner: FunctionModel::sin(frequency),
        }
    }

    #[staticmethod]
    fn cos(frequency: f64) -> Self {
        PyFunctionModel {
            inner: FunctionModel::cos(frequency),
        }
    }

    #[staticmethod]
    fn inv_quad() -> Self {
        PyFunctionModel {
            inner: FunctionModel::inv_quad(),
        }
    }

    #[staticmethod]
    fn sqrt_eps(eps: f64) -> PyResult<Self> {
        Ok(PyFunctionModel {
            inner: FunctionModel::sqrt_eps(eps).map_err(to_py)?,
        })
    }

    /// Polynomial with coefficients in ascending degree.
    #[staticmethod]
    fn polynomial(coefficients: Vec<f64>) -> Self {
        PyFunctionModel {
            inner: FunctionModel::polynomial(coefficients),
        }
    }

    #[getter]
    fn max_order(&self) -> Option<usize> {
        let m = self.inner.max_order();
        (m != moi_core::funcmodel::UNBOUNDED_ORDER).then_some(m)
    }

    fn eval(&self, x: f64) -> PyResult<f64> {
        self.inner.eval(x).map_err(to_py)
    }

    fn eval_deriv(&self, order: usize, x: f64) -> PyResult<f64> {
        self.inner.eval_deriv(order, x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("FunctionModel({})", self.inner)
    }
}

/// Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix.
#[pyfunction]
fn eigh(a: Rows) -> PyResult<(Vec<f64>, Rows)> {
    let e = hermitian(a)?.eigh().map_err(to_py)?;
    Ok((e.eigenvalues.clone(), rows_of(&e.unitary)))
}

/// Schatten p-norm; `p = float('inf')` gives the operator norm.
#[pyfunction]
fn schatten_norm(x: Rows, p: f64) -> PyResult<f64> {
    schatten(&matrix(x)?, index(p)?).map_err(to_py)
}

#[pyfunction]
fn divided_difference(f: &PyFunctionModel, nodes: Vec<f64>) -> PyResult<f64> {
    dd(&f.inner, &NodeList::new(nodes).map_err(to_py)?).map_err(to_py)
}

/// Simplex-quadrature value of the divided difference (orders up to 3).
#[pyfunction]
fn divided_difference_quadrature(f: &PyFunctionModel, nodes: Vec<f64>) -> PyResult<f64> {
    dd_simplex_oracle(&f.inner, &NodeList::new(nodes).map_err(to_py)?).map_err(to_py)
}

fn decompose(hs: Vec<Rows>) -> PyResult<Vec<EigenDecomposition>> {
    hs.into_iter().map(|h| hermitian(h)?.eigh().map_err(to_py)).collect()
}

fn operands(xs: Vec<Rows>) -> PyResult<Vec<ComplexMatrix>> {
    xs.into_iter().map(matrix).collect()
}

/// Multiple operator integral of the divided difference `f^[n]` with
/// `n = len(operands)` over the spectra of `hermitians` (`n + 1` matrices).
#[pyfunction]
fn moi_apply(f: &PyFunctionModel, hermitians: Vec<Rows>, xs: Vec<Rows>) -> PyResult<Rows> {
    let es = decompose(hermitians)?;
    let sp: Vec<&EigenDecomposition> = es.iter().collect();
    let ops = operands(xs)?;
    let kernel = MoiKernel::divided_difference(f.inner.clone(), ops.len());
    Ok(rows_of(&apply(&kernel, &sp, &ops).map_err(to_py)?))
}

/// Multiple operator integral of a tensor-product kernel, each factor given
/// by its values on the eigenvalues (ascending) of the matching matrix.
#[pyfunction]
fn moi_apply_tensor(factors: Vec<Vec<Complex64>>, hermitians: Vec<Rows>, xs: Vec<Rows>) -> PyResult<Rows> {
    let es = decompose(hermitians)?;
    let sp: Vec<&EigenDecomposition> = es.iter().collect();
    let ops = operands(xs)?;
    Ok(rows_of(&apply(&MoiKernel::TensorProduct(factors), &sp, &ops).map_err(to_py)?))
}

fn path(f: &PyFunctionModel, a: Rows, k: Rows) -> PyResult<PerturbationPath> {
    PerturbationPath::new(hermitian(a)?, hermitian(k)?, f.inner.clone()).map_err(to_py)
}

/// `f(A + tK) − f(A)`.
#[pyfunction]
fn phi(f: &PyFunctionModel, a: Rows, k: Rows, t: f64) -> PyResult<Rows> {
    Ok(rows_of(&perturb::phi(&path(f, a, k)?, t).map_err(to_py)?))
}

/// k-th derivative of `t ↦ f(A + tK)` through the multiple operator integral.
#[pyfunction]
fn derivative_moi(f: &PyFunctionModel, a: Rows, k: Rows, order: usize, t: f64) -> PyResult<Rows> {
    Ok(rows_of(&perturb::derivative_moi(&path(f, a, k)?, order, t).map_err(to_py)?))
}

/// Richardson-extrapolated central difference of `t ↦ f(A + tK)`.
#[pyfunction]
#[pyo3(signature = (f, a, k, order, t, h=None))]
fn derivative_fd(f: &PyFunctionModel, a: Rows, k: Rows, order: usize, t: f64, h: Option<f64>) -> PyResult<Rows> {
    let p = path(f, a, k)?;
    let h = match h {
        Some(h) => h,
        None => p.default_fd_step(order).map_err(to_py)?,
    };
    Ok(rows_of(&perturb::derivative_fd(&p, order, t, h).map_err(to_py)?))
}

/// Residual dict of the perturbation formula for slot `j` (1-based).
#[pyfunction]
#[pyo3(signature = (f, background, a, b, operands, j, p=2.0))]
#[allow(clippy::too_many_arguments)]
fn perturbation_formula_residual<'py>(
    py: Python<'py>,
    f: &PyFunctionModel,
    background: Vec<Rows>,
    a: Rows,
    b: Rows,
    operands: Vec<Rows>,
    j: usize,
    p: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let bg: Vec<HermitianMatrix> = background.into_iter().map(hermitian).collect::<PyResult<_>>()?;
    let ks: Vec<ComplexMatrix> = operands.into_iter().map(matrix).collect::<PyResult<_>>()?;
    let n = bg.len() + 1;
    let r = perturb::perturbation_formula_residual(&bg, &hermitian(a)?, &hermitian(b)?, &f.inner, n, j, &ks, index(p)?)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lhs_norm", r.lhs_norm)?;
    d.set_item("rhs_norm", r.rhs_norm)?;
    d.set_item("abs_err", r.abs_err)?;
    d.set_item("rel_err", r.rel_err())?;
    Ok(d)
}

/// Taylor remainder of order `n` computed directly and as an integral.
#[pyfunction]
#[pyo3(signature = (f, a, k, n, p=2.0))]
fn taylor_remainder<'py>(py: Python<'py>, f: &PyFunctionModel, a: Rows, k: Rows, n: usize, p: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = perturb::taylor_remainder(&path(f, a, k)?, n, index(p)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("direct", rows_of(&r.direct))?;
    d.set_item("moi", rows_of(&r.moi))?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("rel_err", r.residual.rel_err())?;
    Ok(d)
}

fn command(name: &str) -> PyResult<Command> {
    Command::ALL
        .into_iter()
        .chain([Command::Suite])
        .find(|c| c.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command '{name}'")))
}

/// Runs an experiment and returns its report rows as dicts.
#[pyfunction]
#[pyo3(signature = (name, config_json="{}"))]
fn run_experiment<'py>(py: Python<'py>, name: &str, config_json: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut rows: Vec<ReportRow> = Vec::new();
    run(command(name)?, &cfg, &mut rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("trial", r.trial)?;
            d.set_item("check", r.check)?;
            d.set_item("lhs_norm", r.lhs_norm)?;
            d.set_item("rhs_norm", r.rhs_norm)?;
            d.set_item("abs_err", r.abs_err)?;
            d.set_item("rel_err", r.rel_err)?;
            d.set_item("tolerance", r.tolerance)?;
            d.set_item("pass", r.pass)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn moi_calculus(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFunctionModel>()?;
    m.add_function(wrap_pyfunction!(eigh, m)?)?;
    m.add_function(wrap_pyfunction!(schatten_norm, m)?)?;
    m.add_function(wrap_pyfunction!(divided_difference, m)?)?;
    m.add_function(wrap_pyfunction!(divided_difference_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(moi_apply, m)?)?;
    m.add_function(wrap_pyfunction!(moi_apply_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_moi, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_fd, m)?)?;
    m.add_function(wrap_pyfunction!(perturbation_formula_residual, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_remainder, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

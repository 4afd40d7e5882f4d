//! Python bindings. Braid words are lists whose items are `k` (move k),
//! `-k` (inverse move k) or a list of +-1 (sign change).

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ttstar_core::ade::{cartan_seed as core_seed, detect_ade, CartanType};
use ttstar_core::braid::{self, BraidWord, Generator, Unitriangular};
use ttstar_core::isomonodromy::{nearest_index, verify_isomonodromy, IsoOptions};
use ttstar_core::linalg::CMat;
use ttstar_core::rational::Q;
use ttstar_core::rh_kernel::{f_minimize as core_fmin, positivity_certificate, SampleOptions};
use ttstar_core::rh_solver::{self, SolverOptions};
use ttstar_core::{io, spectrum, Error, C64};

fn err(e: Error) -> PyErr {
    match e {
        Error::SolveFailure { .. }
        | Error::StiffnessFailure(_)
        | Error::SingularMetric
        | Error::NearContour(_)
        | Error::CertificationMissing(_)
        | Error::StructureViolation { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn cmat_rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn word_from_py(items: &Bound<'_, PyList>) -> PyResult<BraidWord> {
    let mut w = Vec::with_capacity(items.len());
    for it in items.iter() {
        if let Ok(k) = it.extract::<i64>() {
            if k == 0 {
                return Err(PyValueError::new_err("move index 0 is not a generator"));
            }
            let l = k.unsigned_abs() as usize;
            w.push(if k > 0 { Generator::Move(l) } else { Generator::MoveInv(l) });
        } else {
            w.push(Generator::Sign(it.extract::<Vec<i8>>()?));
        }
    }
    Ok(BraidWord(w))
}

fn word_to_py<'py>(py: Python<'py>, w: &BraidWord) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for g in &w.0 {
        match g {
            Generator::Move(l) => out.append(*l as i64)?,
            Generator::MoveInv(l) => out.append(-(*l as i64))?,
            Generator::Sign(e) => out.append(e.clone())?,
        }
    }
    Ok(out)
}

/// Pairwise distinct points u_1..u_n in the plane.
#[pyclass(name = "Spectrum", frozen, from_py_object)]
#[derive(Clone)]
struct PySpectrum(spectrum::Spectrum);

#[pymethods]
impl PySpectrum {
    #[new]
    fn new(u: Vec<C64>) -> PyResult<Self> {
        spectrum::Spectrum::new(u).map(Self).map_err(err)
    }

    #[staticmethod]
    fn roots_of_unity(n: usize) -> Self {
        Self(spectrum::Spectrum::roots_of_unity(n))
    }

    #[getter]
    fn u(&self) -> Vec<C64> {
        self.0.u().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn is_admissibly_ordered(&self) -> bool {
        self.0.is_admissibly_ordered()
    }

    fn admissible_order(&self) -> PyResult<Vec<usize>> {
        spectrum::admissible_order(&self.0, None).map_err(err)
    }

    fn is_pd(&self) -> bool {
        spectrum::check_pd(&self.0)
    }

    /// Separating rays as (theta, (j, l)) with 1-based labels, theta in [0, 2pi).
    fn separating_rays(&self) -> PyResult<Vec<(f64, (usize, usize))>> {
        let arr = spectrum::stokes_rays(&self.0, false).map_err(err)?;
        Ok(arr.separating.iter().map(|s| (s.theta, s.pair)).collect())
    }

    fn delta(&self) -> PyResult<f64> {
        spectrum::choose_delta(&self.0).map_err(err)
    }

    fn delta_interval(&self) -> PyResult<(f64, f64)> {
        spectrum::delta_interval(&self.0).map_err(err)
    }

    fn crossing_sequence(&self, phi: f64) -> PyResult<Vec<usize>> {
        spectrum::crossing_sequence(&self.0, phi).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Spectrum({:?})", self.0.u())
    }
}

/// Upper unitriangular matrix with exact rational entries.
#[pyclass(name = "StokesMatrix", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyStokes(Unitriangular);

#[pymethods]
impl PyStokes {
    /// Rows of ints or strings such as "-3/2".
    #[new]
    fn new(rows: Vec<Vec<Bound<'_, PyAny>>>) -> PyResult<Self> {
        let mut text = String::from("[");
        for (i, r) in rows.iter().enumerate() {
            text.push_str(if i == 0 { "[" } else { ",[" });
            for (j, v) in r.iter().enumerate() {
                let q: Q = v.str()?.to_str()?.trim().parse().map_err(|e| PyValueError::new_err(format!("{v}: {e}")))?;
                text.push_str(&format!("{}\"{q}\"", if j == 0 { "" } else { "," }));
            }
            text.push(']');
        }
        text.push(']');
        io::parse_unitriangular(&text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_upper(n: usize, upper: Vec<i64>) -> PyResult<Self> {
        if upper.len() != n * (n.saturating_sub(1)) / 2 {
            return Err(PyValueError::new_err("need n(n-1)/2 entries"));
        }
        Ok(Self(Unitriangular::from_upper(n, &upper)))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    /// Entries as strings, exact.
    fn entries(&self) -> Vec<Vec<String>> {
        (0..self.0.n()).map(|i| (0..self.0.n()).map(|j| self.0.entry(i, j).to_string()).collect()).collect()
    }

    fn to_float(&self) -> Vec<Vec<f64>> {
        let m = self.0.to_f64();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn sigma(&self, l: usize) -> PyResult<Self> {
        braid::sigma_l(&self.0, l).map(Self).map_err(err)
    }

    fn sigma_inv(&self, l: usize) -> PyResult<Self> {
        braid::sigma_l_inv(&self.0, l).map(Self).map_err(err)
    }

    fn sign_change(&self, eps: Vec<i8>) -> PyResult<Self> {
        braid::sigma_eps(&self.0, &eps).map(Self).map_err(err)
    }

    fn apply_word(&self, word: &Bound<'_, PyList>) -> PyResult<Self> {
        braid::apply_word(&self.0, &word_from_py(word)?).map(Self).map_err(err)
    }

    /// Word w of length <= bound with w(self) == target, or None.
    #[pyo3(signature = (target, bound = braid::DEFAULT_ORBIT_DEPTH))]
    fn orbit_search<'py>(&self, py: Python<'py>, target: &Self, bound: usize) -> PyResult<Option<Bound<'py, PyList>>> {
        braid::orbit_search(&self.0, &target.0, bound).map(|w| word_to_py(py, &w)).transpose()
    }

    /// Distinct matrices from sign changes and full-turn rotations.
    fn stokes_data(&self, spec: &PySpectrum) -> PyResult<Vec<Self>> {
        let set = braid::stokes_data(&self.0, &spec.0).map_err(err)?;
        Ok(set.matrices.into_iter().map(Self).collect())
    }

    fn charges(&self) -> Vec<C64> {
        braid::charges(&self.0)
    }

    /// Coefficients of the characteristic polynomial of S (S^-1)^t, constant term first.
    fn charge_polynomial(&self) -> Vec<String> {
        braid::charge_polynomial(&self.0).iter().map(|q| q.to_string()).collect()
    }

    /// (type, witness word) or None.
    #[pyo3(signature = (bound = braid::DEFAULT_ORBIT_DEPTH, permuted = false))]
    fn detect_ade<'py>(&self, py: Python<'py>, bound: usize, permuted: bool) -> PyResult<Option<(String, Bound<'py, PyList>)>> {
        match detect_ade(&self.0, bound, permuted) {
            Some((t, w)) => Ok(Some((t.to_string(), word_to_py(py, &w)?))),
            None => Ok(None),
        }
    }

    fn __repr__(&self) -> String {
        format!("StokesMatrix({:?})", self.entries())
    }
}

/// Metric G(x) on a grid with per-point diagnostics.
#[pyclass(name = "MetricCurve", frozen, skip_from_py_object)]
struct PyCurve(rh_solver::MetricCurve);

#[pymethods]
impl PyCurve {
    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.0.xs.clone()
    }

    fn g(&self, i: usize) -> PyResult<Vec<Vec<C64>>> {
        self.0.g.get(i).map(cmat_rows).ok_or_else(|| PyValueError::new_err("index out of range"))
    }

    fn gx(&self, i: usize) -> PyResult<Vec<Vec<C64>>> {
        self.0.gx.get(i).map(cmat_rows).ok_or_else(|| PyValueError::new_err("index out of range"))
    }

    fn diagnostics<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyDict>> {
        let p = self.0.points.get(i).ok_or_else(|| PyValueError::new_err("index out of range"))?;
        let d = PyDict::new(py);
        d.set_item("x", p.x)?;
        d.set_item("method", &p.method)?;
        d.set_item("nodes", p.nodes)?;
        d.set_item("jump_residual", p.jump_residual)?;
        d.set_item("normalization_residual", p.normalization_residual)?;
        d.set_item("symmetry_neg", p.symmetry.neg)?;
        d.set_item("symmetry_refl", p.symmetry.refl)?;
        d.set_item("hermitian", p.hermitian)?;
        d.set_item("orthogonality", p.orthogonality)?;
        d.set_item("det_error", p.det_error)?;
        d.set_item("cholesky_ok", p.cholesky_ok)?;
        Ok(d)
    }

    fn tt_residual(&self) -> PyResult<f64> {
        rh_solver::tt_residual(&self.0).map(|t| t.sup).map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let tt = rh_solver::tt_residual(&self.0).ok();
        let f = std::fs::File::create(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        rh_solver::write_curve_csv(&self.0, tt.as_ref(), f).map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf, spec: &PySpectrum) -> PyResult<Self> {
        rh_solver::read_curve_csv(&path, &spec.0).map(Self).map_err(err)
    }

    /// Recovers Stokes data at the grid points nearest to `at` and compares them.
    #[pyo3(signature = (at, input = None, tol_iso = 1e-4))]
    fn verify<'py>(&self, py: Python<'py>, at: Vec<f64>, input: Option<&PyStokes>, tol_iso: f64) -> PyResult<Bound<'py, PyDict>> {
        let mut idx: Vec<usize> = at.iter().map(|&x| nearest_index(&self.0.xs, x)).collect();
        idx.sort_unstable();
        idx.dedup();
        let opts = IsoOptions { tol_iso, strict: false, ..Default::default() };
        let rep = py.detach(|| verify_isomonodromy(&self.0, &idx, input.map(|s| &s.0), &opts)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("deviation", rep.deviation)?;
        d.set_item("input_error", rep.input_error)?;
        d.set_item("halfturn_ok", rep.halfturn_ok)?;
        d.set_item("structure_ok", rep.structure_ok)?;
        d.set_item("pass", rep.pass)?;
        let xs: Vec<f64> = rep.per_x.iter().map(|r| r.x).collect();
        let s_rec: Vec<Vec<Vec<C64>>> = rep.per_x.iter().map(|r| cmat_rows(&r.s_rec)).collect();
        d.set_item("x", xs)?;
        d.set_item("s_rec", s_rec)?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.0.xs.len()
    }
}

#[pyfunction]
fn cartan_seed(family: &str) -> PyResult<PyStokes> {
    let t: CartanType = family.parse().map_err(err)?;
    core_seed(t).map(PyStokes).map_err(err)
}

/// (min, argmin, attained_on_boundary) of the E-family determinant.
#[pyfunction]
#[pyo3(signature = (family, step = 0.05))]
fn f_minimize(py: Python<'_>, family: &str, step: f64) -> PyResult<(f64, Vec<f64>, bool)> {
    let t: CartanType = family.parse().map_err(err)?;
    let r = py.detach(|| core_fmin(t, step, 1e-12)).map_err(err)?;
    Ok((r.min, r.argmin, r.attained_on_boundary))
}

/// Positivity verdict as a dict.
#[pyfunction]
#[pyo3(signature = (spec, s, analytic_only = false))]
fn certify<'py>(py: Python<'py>, spec: &PySpectrum, s: &PyStokes, analytic_only: bool) -> PyResult<Bound<'py, PyDict>> {
    let opts = SampleOptions { analytic_only, ..Default::default() };
    let r = py.detach(|| positivity_certificate(&spec.0, &s.0, &opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("verdict", format!("{:?}", r.verdict))?;
    d.set_item("certified", r.certified())?;
    d.set_item("method", &r.method)?;
    d.set_item("cartan_type", r.cartan_type.map(|t| t.to_string()))?;
    d.set_item("worst_min_eigenvalue", r.worst_min_eigenvalue)?;
    d.set_item("witness_x", r.witness_x)?;
    d.set_item("samples", r.samples)?;
    Ok(d)
}

/// Solves the Riemann-Hilbert problem at each x.
#[pyfunction]
#[pyo3(signature = (spec, s, xs, tol_jump = 1e-10, force = false))]
fn solve(py: Python<'_>, spec: &PySpectrum, s: &PyStokes, xs: Vec<f64>, tol_jump: f64, force: bool) -> PyResult<PyCurve> {
    let opts = SolverOptions { tol_jump, force, ..Default::default() };
    py.detach(|| rh_solver::metric_curve(&spec.0, &s.0, &xs, &opts)).map(PyCurve).map_err(err)
}

#[pyfunction]
fn log_grid(x_min: f64, x_max: f64, count: usize) -> Vec<f64> {
    rh_solver::log_grid(x_min, x_max, count)
}

#[pymodule]
pub fn ttstar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", io::VERSION)?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyStokes>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(cartan_seed, m)?)?;
    m.add_function(wrap_pyfunction!(f_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(log_grid, m)?)?;
    Ok(())
}

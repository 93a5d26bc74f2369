//! Python bindings for the spectral-average toolkit.  The module exposes
//! the half-integral forms and dominant classes as classes, and the main
//! operations — matrix enumeration, archimedean factor, local p-adic
//! integrals, geometric sums, exact normalized averages, Weyl characters,
//! and density grids — as functions returning plain Python data.

use num_bigint::BigInt;
use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use petersson_core::{arch_coeff, error_bound, geom_side, local_gsp4, measure, padic_cartan};
use petersson_core::{root_data, Error};

fn py_err(e: Error) -> PyErr {
    match &e {
        Error::Invalid(_) | Error::Dim(_) => PyValueError::new_err(e.to_string()),
        Error::Unsupported(_) => PyNotImplementedError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn int_to_i64(x: &BigInt) -> PyResult<i64> {
    i64::try_from(x).map_err(|_| PyValueError::new_err(format!("{x} does not fit in 64 bits")))
}

/// Positive definite half-integral symmetric form, stored doubled.
#[pyclass(name = "Form", skip_from_py_object)]
#[derive(Clone)]
struct PyForm {
    inner: geom_side::HalfIntegralSymMat,
}

#[pymethods]
impl PyForm {
    /// Build from the doubled Gram matrix, e.g. Form([[2,1],[1,4]]).
    #[new]
    fn new(two_sigma: Vec<Vec<i64>>) -> PyResult<Self> {
        Ok(PyForm {
            inner: geom_side::HalfIntegralSymMat::new(two_sigma).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        PyForm { inner: geom_side::HalfIntegralSymMat::identity(n) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Doubled Gram matrix entries.
    fn two_sigma(&self) -> Vec<Vec<i64>> {
        self.inner.two_sigma().clone()
    }

    /// Exact determinant of the (half-integral) form, as a string.
    fn det(&self) -> String {
        self.inner.det_sigma().to_string()
    }

    fn label(&self) -> String {
        self.inner.canonical_label()
    }

    /// Whether p stays away from the discriminant (p odd, p coprime to
    /// 4 det).
    fn is_regular_at(&self, p: u64) -> PyResult<bool> {
        Ok(self.inner.to_quad_form().map_err(py_err)?.is_regular_at(p))
    }

    fn __repr__(&self) -> String {
        format!("Form({:?})", self.inner.two_sigma())
    }
}

/// Dominant cocharacter class in chart coordinates (l0, 0, l2, ..., ln).
#[pyclass(name = "DominantClass", skip_from_py_object)]
#[derive(Clone)]
struct PyClass {
    inner: root_data::Coweight,
}

#[pymethods]
impl PyClass {
    #[new]
    fn new(coords: Vec<i64>) -> PyResult<Self> {
        let inner = root_data::Coweight::new(coords).map_err(py_err)?;
        Ok(PyClass { inner })
    }

    fn coords(&self) -> Vec<i64> {
        self.inner.coords().to_vec()
    }

    #[getter]
    fn ell0(&self) -> i64 {
        self.inner.ell0()
    }

    fn is_dominant(&self) -> bool {
        self.inner.is_dominant()
    }

    /// Dimension of the irreducible representation with this highest
    /// (co)weight.
    fn dimension(&self) -> PyResult<i64> {
        let dim = measure::weyl_dimension(&self.inner).map_err(py_err)?;
        if !dim.is_integer() {
            return Err(PyRuntimeError::new_err("dimension is not an integer"));
        }
        int_to_i64(&dim.to_integer())
    }

    fn __repr__(&self) -> String {
        format!("DominantClass({:?})", self.inner.coords())
    }
}

fn to_spec(primes: Vec<(u64, Vec<i64>)>) -> PyResult<geom_side::SimilitudeSpec> {
    let mut entries = Vec::with_capacity(primes.len());
    for (p, coords) in primes {
        let lam = root_data::Coweight::new(coords).map_err(py_err)?;
        if !lam.is_dominant() {
            return Err(PyValueError::new_err(format!(
                "class {:?} at prime {p} is not dominant",
                lam.coords()
            )));
        }
        entries.push((p, lam.ell0(), lam));
    }
    geom_side::SimilitudeSpec::new(entries).map_err(py_err)
}

/// Integral matrices A with A^T s1 A = r s2, as entry lists.
#[pyfunction]
fn enumerate_a(sigma1: &PyForm, sigma2: &PyForm, r: i64) -> PyResult<Vec<Vec<Vec<i64>>>> {
    let sols = geom_side::enumerate_a(&sigma1.inner, &sigma2.inner, r).map_err(py_err)?;
    Ok(sols.into_iter().map(|a| a.entries().clone()).collect())
}

/// Closed-form archimedean factor.
#[pyfunction]
fn arch_factor(sigma1: &PyForm, sigma2: &PyForm, kappa: i64) -> PyResult<f64> {
    geom_side::arch_factor(&sigma1.inner, &sigma2.inner, kappa, sigma1.inner.n()).map_err(py_err)
}

fn local_value_dict<'py>(
    py: Python<'py>,
    v: &local_gsp4::LocalIntegralValue,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("num", v.value.numer().to_string())?;
    d.set_item("den", v.value.denom().to_string())?;
    d.set_item("value", local_gsp4::rational_to_f64(&v.value))?;
    d.set_item("provenance", v.provenance.as_str())?;
    Ok(d)
}

/// One local p-adic integral.  `mode` is "explicit", "oracle", or "both";
/// the result dict carries `explicit`, `oracle`, and `match` entries.
#[pyfunction]
#[pyo3(signature = (p, tau, t, alpha, beta, form=(1, 0, 1), mode="both", margin=1))]
#[allow(clippy::too_many_arguments)]
fn local_integral(
    py: Python<'_>,
    p: u64,
    tau: i64,
    t: i64,
    alpha: i64,
    beta: i64,
    form: (i64, i64, i64),
    mode: &str,
    margin: u32,
) -> PyResult<Py<PyAny>> {
    let spec = local_gsp4::LocalSpec::new(p, tau, t).map_err(py_err)?;
    let quad = local_gsp4::QuadForm::new(form.0, form.1, form.2);
    if !quad.is_regular_at(p) {
        return Err(PyNotImplementedError::new_err(format!(
            "prime {p} divides the discriminant of the local form"
        )));
    }
    let d = local_gsp4::DiagData::new(alpha, beta, quad).map_err(py_err)?;
    let (explicit, oracle) = match mode {
        "explicit" => (Some(local_gsp4::local_integral_explicit(&spec, &d).map_err(py_err)?), None),
        "oracle" => (None, Some(local_gsp4::local_integral_oracle(&spec, &d, margin).map_err(py_err)?)),
        "both" => (
            Some(local_gsp4::local_integral_explicit(&spec, &d).map_err(py_err)?),
            Some(local_gsp4::local_integral_oracle(&spec, &d, margin).map_err(py_err)?),
        ),
        other => {
            return Err(PyValueError::new_err(format!(
                "mode {other} is not one of explicit | oracle | both"
            )))
        }
    };
    let out = PyDict::new(py);
    match &explicit {
        None => out.set_item("explicit", py.None())?,
        Some(None) => {
            let d = PyDict::new(py);
            d.set_item("covered", false)?;
            out.set_item("explicit", d)?;
        }
        Some(Some(v)) => {
            let d = local_value_dict(py, v)?;
            d.set_item("covered", true)?;
            out.set_item("explicit", d)?;
        }
    }
    match &oracle {
        None => out.set_item("oracle", py.None())?,
        Some(v) => out.set_item("oracle", local_value_dict(py, v)?)?,
    }
    match (&explicit, &oracle) {
        (Some(Some(e)), Some(o)) => out.set_item("match", e.value == o.value)?,
        _ => out.set_item("match", py.None())?,
    }
    Ok(out.into_any().unbind())
}

/// The assembled geometric side for one similitude datum.
#[pyfunction]
fn geometric_side(
    py: Python<'_>,
    sigma1: &PyForm,
    sigma2: &PyForm,
    primes: Vec<(u64, Vec<i64>)>,
    kappa: i64,
) -> PyResult<Py<PyAny>> {
    let spec = to_spec(primes)?;
    let result =
        geom_side::geometric_side(&sigma1.inner, &sigma2.inner, &spec, kappa).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("total", result.total)?;
    let mut terms = Vec::with_capacity(result.terms.len());
    for term in &result.terms {
        let d = PyDict::new(py);
        d.set_item("entries", term.a.entries().clone())?;
        d.set_item("arch", term.arch)?;
        d.set_item("value", term.value)?;
        let locals: Vec<(u64, String, String, &str)> = term
            .locals
            .iter()
            .map(|(p, v)| {
                (*p, v.value.numer().to_string(), v.value.denom().to_string(), v.provenance.as_str())
            })
            .collect();
        d.set_item("locals", locals)?;
        terms.push(d);
    }
    out.set_item("terms", terms)?;
    Ok(out.into_any().unbind())
}

/// Exact normalized geometric average: (numerator, denominator, float).
#[pyfunction]
fn normalized_l(sigma: &PyForm, primes: Vec<(u64, Vec<i64>)>) -> PyResult<(String, String, f64)> {
    let spec = to_spec(primes)?;
    let v = geom_side::normalized_l_exact(&sigma.inner, &spec).map_err(py_err)?;
    Ok((
        v.numer().to_string(),
        v.denom().to_string(),
        local_gsp4::rational_to_f64(&v),
    ))
}

/// The spectral-average functional applied to a product of characters.
#[pyfunction]
fn l_of_f(primes: Vec<(u64, Vec<i64>)>, sigma: &PyForm, kappa: i64) -> PyResult<f64> {
    let mut lams = Vec::with_capacity(primes.len());
    for (p, coords) in primes {
        lams.push((p, root_data::Coweight::new(coords).map_err(py_err)?));
    }
    let cache = measure::LValueCache::new();
    measure::l_of_f(&lams, &sigma.inner, kappa, &cache).map_err(py_err)
}

/// Truncated spectral density on a tensor grid.  Returns a dict with
/// `samples` (angles, density, imag), `tail_bound`, and `coefficients`.
#[pyfunction]
fn measure_density(
    py: Python<'_>,
    sigma: &PyForm,
    kappa: i64,
    primes: Vec<u64>,
    truncation: i64,
    grid: usize,
) -> PyResult<Py<PyAny>> {
    let cache = measure::LValueCache::new();
    let expansion = measure::measure_expansion(&sigma.inner, kappa, &primes, truncation, &cache)
        .map_err(py_err)?;
    let samples = measure::density_samples(&expansion, grid).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("tail_bound", expansion.tail_bound)?;
    out.set_item("coefficients", expansion.coeffs.len())?;
    let rows: Vec<(Vec<f64>, f64, f64)> = samples
        .into_iter()
        .map(|s| (s.angles, s.density, s.imag))
        .collect();
    out.set_item("samples", rows)?;
    Ok(out.into_any().unbind())
}

/// All dominant classes with leading coordinate at most the bound.
#[pyfunction]
fn dominant_up_to(n: usize, lambda_max: i64) -> Vec<PyClass> {
    measure::dominant_up_to(n, lambda_max)
        .into_iter()
        .map(|inner| PyClass { inner })
        .collect()
}

/// Weyl character as (doubled exponent key, integer coefficient) pairs.
#[pyfunction]
fn character_table(lam: &PyClass) -> PyResult<Vec<(Vec<i64>, String)>> {
    let chi = measure::weyl_character(&lam.inner).map_err(py_err)?;
    Ok(chi
        .terms()
        .map(|(key, coeff)| (key.clone(), coeff.to_string()))
        .collect())
}

/// Character value at the torus point with the given angles: (re, im).
#[pyfunction]
fn char_eval(lam: &PyClass, angles: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = measure::TorusPoint::from_angles(angles).map_err(py_err)?;
    let v = measure::char_eval(&lam.inner, &t).map_err(py_err)?;
    Ok((v.re, v.im))
}

/// Equidistribution density relative to the flat measure on the angles.
#[pyfunction]
fn sato_tate_density(angles: Vec<f64>) -> PyResult<f64> {
    let t = measure::TorusPoint::from_angles(angles).map_err(py_err)?;
    Ok(measure::sato_tate_density(&t))
}

/// Kazhdan-Lusztig polynomial value at p, as an exact rational string.
#[pyfunction]
fn kl_polynomial(mu: &PyClass, lam: &PyClass, p: u64) -> PyResult<String> {
    let v = measure::kl_poly(&mu.inner, &lam.inner, p).map_err(py_err)?;
    Ok(v.to_string())
}

/// Ramanujan sum over units modulo p^m.
#[pyfunction]
fn ramanujan_sum(ell: i64, p: u64, m: u32) -> i64 {
    local_gsp4::ramanujan_sum(ell, p, m)
}

/// Cartan double-coset label of an integral similitude at p:
/// (chart coordinates, similitude valuation).
#[pyfunction]
#[pyo3(signature = (entries, p, denom_exp=0))]
fn classify_coset(entries: Vec<Vec<i64>>, p: u64, denom_exp: u32) -> PyResult<(Vec<i64>, i64)> {
    let num = padic_cartan::IntMat::from_rows(&entries).map_err(py_err)?;
    let g = padic_cartan::PadicMat { num, denom_exp };
    let label = padic_cartan::classify_coset(&g, p).map_err(py_err)?;
    Ok((label.lam.coords().to_vec(), label.r_exponent))
}

/// Integral representative of the Cartan cell with the given exponents.
#[pyfunction]
fn cartan_representative(p: u64, exponents: Vec<i64>) -> PyResult<(Vec<Vec<i64>>, u32)> {
    let g = padic_cartan::cartan_representative(p, &exponents);
    let mut rows = Vec::with_capacity(g.num.rows());
    for i in 0..g.num.rows() {
        let mut row = Vec::with_capacity(g.num.cols());
        for j in 0..g.num.cols() {
            row.push(int_to_i64(g.num.get(i, j))?);
        }
        rows.push(row);
    }
    Ok((rows, g.denom_exp))
}

/// Formal degree of the discrete series, as an exact rational string.
#[pyfunction]
fn formal_degree(kappa: i64, n: usize) -> PyResult<String> {
    Ok(arch_coeff::formal_degree(kappa, n).map_err(py_err)?.to_string())
}

/// Closed-form matrix-coefficient norm, as an exact rational string.
#[pyfunction]
fn lp_norm_closed(kappa: i64, ell: i64, n: usize) -> PyResult<String> {
    Ok(arch_coeff::lp_norm_closed(kappa, ell, n).map_err(py_err)?.to_string())
}

/// Off-diagonal error envelope for (weight, similitude norm, level).
#[pyfunction]
fn off_diagonal_bound(kappa: i64, r: u64, level: u64) -> PyResult<f64> {
    let params = error_bound::ErrorParams::new(kappa, r, level).map_err(py_err)?;
    Ok(error_bound::off_diagonal_bound(&params))
}

/// Grid quadrature of one pair of basis functions against the density:
/// close to 1 on the diagonal and 0 off it.
#[pyfunction]
fn orthonormality_check(lam: &PyClass, mu: &PyClass, grid: usize) -> PyResult<(f64, f64)> {
    let v = measure::orthonormality_check(&lam.inner, &mu.inner, grid).map_err(py_err)?;
    Ok((v.re, v.im))
}

#[pymodule]
fn petersson_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyForm>()?;
    m.add_class::<PyClass>()?;
    m.add_function(wrap_pyfunction!(enumerate_a, m)?)?;
    m.add_function(wrap_pyfunction!(arch_factor, m)?)?;
    m.add_function(wrap_pyfunction!(local_integral, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_side, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_l, m)?)?;
    m.add_function(wrap_pyfunction!(l_of_f, m)?)?;
    m.add_function(wrap_pyfunction!(measure_density, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_up_to, m)?)?;
    m.add_function(wrap_pyfunction!(character_table, m)?)?;
    m.add_function(wrap_pyfunction!(char_eval, m)?)?;
    m.add_function(wrap_pyfunction!(sato_tate_density, m)?)?;
    m.add_function(wrap_pyfunction!(kl_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(ramanujan_sum, m)?)?;
    m.add_function(wrap_pyfunction!(classify_coset, m)?)?;
    m.add_function(wrap_pyfunction!(cartan_representative, m)?)?;
    m.add_function(wrap_pyfunction!(formal_degree, m)?)?;
    m.add_function(wrap_pyfunction!(lp_norm_closed, m)?)?;
    m.add_function(wrap_pyfunction!(off_diagonal_bound, m)?)?;
    m.add_function(wrap_pyfunction!(orthonormality_check, m)?)?;
    Ok(())
}

//! Python bindings. Results come back as plain dicts and lists; every
//! probability is a dict with `ln_p`, `ln_q` and `value`.

// Keyword-heavy Python signatures; the PyErr lint fires inside pyo3 macros.
#![allow(clippy::too_many_arguments, clippy::useless_conversion)]

use flb::bounds::{self, BoundQuery, CodeSize, Constraint, Method, SweepMode, ThetaPolicy};
use flb::envelope;
use flb::ht_core;
use flb::saddlepoint::{self, SpVariant};
use flb::sim::{self, RingSpec};
use flb::{special_fn, Error, LogValue};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidParams(_) | Error::ConstraintViolation { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Adds `value` next to every `{ln_p, ln_q}` pair. A null log means −∞.
fn with_values(v: Value) -> Value {
    match v {
        Value::Object(mut map) => {
            if map.len() == 2 && map.contains_key("ln_p") && map.contains_key("ln_q") {
                // ln_p = −∞ serializes as null
                let v = map["ln_p"].as_f64().map_or(0.0, f64::exp);
                map.insert("value".into(), json!(v));
            }
            Value::Object(map.into_iter().map(|(k, v)| (k, with_values(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(with_values).collect()),
        other => other,
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<PyObject> {
    let value = with_values(serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?);
    let text = value.to_string();
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn code_size(m: Option<f64>, rate_bits: Option<f64>) -> PyResult<CodeSize> {
    match (m, rate_bits) {
        (Some(m), None) => Ok(CodeSize::Cardinality(m)),
        (None, Some(r)) => Ok(CodeSize::RateBits(r)),
        _ => Err(PyValueError::new_err("give exactly one of m and rate_bits")),
    }
}

fn ln_beta(beta: f64) -> PyResult<LogValue> {
    if beta > 0.0 && beta < 1.0 {
        Ok(LogValue::new(beta))
    } else {
        Err(PyValueError::new_err(format!("beta = {beta} must lie in (0, 1)")))
    }
}

/// The binary test between i.i.d. N(√γ, σ²) and N(0, θ²) in n dimensions.
#[pyclass(frozen, name = "TestParams")]
struct PyTestParams {
    inner: ht_core::TestParams,
}

#[pymethods]
impl PyTestParams {
    #[new]
    #[pyo3(signature = (n, gamma, theta2, sigma2 = 1.0))]
    fn new(n: u32, gamma: f64, theta2: f64, sigma2: f64) -> PyResult<Self> {
        Ok(PyTestParams { inner: ht_core::TestParams::new(n, gamma, sigma2, theta2).map_err(py_err)? })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn theta2(&self) -> f64 {
        self.inner.theta2
    }

    /// Smallest type-I error at type-II error `beta`.
    fn f(&self, py: Python<'_>, beta: f64) -> PyResult<f64> {
        let b = ln_beta(beta)?;
        py.allow_threads(|| ht_core::f_exact(&self.inner, b)).map(|p| p.value()).map_err(py_err)
    }

    /// As `f`, taking and returning natural logarithms.
    fn ln_f(&self, py: Python<'_>, ln_beta: f64) -> PyResult<f64> {
        py.allow_threads(|| ht_core::f_exact(&self.inner, LogValue::from_ln(ln_beta))).map(|p| p.ln_p).map_err(py_err)
    }

    fn threshold(&self, beta: f64) -> PyResult<f64> {
        ht_core::solve_t_for_beta(&self.inner, ln_beta(beta)?).map_err(py_err)
    }

    fn tradeoff(&self, py: Python<'_>, t: f64) -> PyResult<PyObject> {
        to_py(py, &ht_core::tradeoff_at(&self.inner, t).map_err(py_err)?)
    }

    fn derivatives(&self, py: Python<'_>, beta: f64) -> PyResult<PyObject> {
        to_py(py, &ht_core::f_derivatives(&self.inner, ln_beta(beta)?).map_err(py_err)?)
    }

    #[pyo3(signature = (beta, variant = "full"))]
    fn saddlepoint(&self, py: Python<'_>, beta: f64, variant: &str) -> PyResult<PyObject> {
        let v = match variant {
            "full" => SpVariant::Full,
            "hat" => SpVariant::Hat,
            other => return Err(PyValueError::new_err(format!("variant `{other}`: expected full or hat"))),
        };
        to_py(py, &saddlepoint::f_saddlepoint(&self.inner, ln_beta(beta)?, v).map_err(py_err)?)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("TestParams(n={}, gamma={}, theta2={}, sigma2={})", p.n, p.gamma, p.theta2, p.sigma2)
    }
}

#[pyfunction]
fn marcum_q(m: f64, a: f64, b: f64) -> PyResult<f64> {
    special_fn::marcum_q(m, a, b).map(|p| p.value()).map_err(py_err)
}

/// (ln Q, ln(1 − Q)).
#[pyfunction]
fn marcum_q_log(m: f64, a: f64, b: f64) -> PyResult<(f64, f64)> {
    special_fn::marcum_q(m, a, b).map(|p| (p.ln_p, p.ln_q)).map_err(py_err)
}

fn query(
    constraint: &str,
    n: u32,
    snr_db: f64,
    m: Option<f64>,
    rate_bits: Option<f64>,
    theta: &str,
    method: &str,
) -> PyResult<BoundQuery> {
    let mut q = BoundQuery::new(parse(constraint)?, n, code_size(m, rate_bits)?, snr_db);
    q.theta_policy = parse::<ThetaPolicy>(theta)?;
    q.method = parse::<Method>(method)?;
    Ok(q)
}

fn bound_dict(r: &bounds::BoundResult) -> Value {
    json!({
        "value": r.value.value(),
        "log10_value": r.value.ln_p / std::f64::consts::LN_10,
        "ln_value": r.value.ln_p,
        "bound": r.bound_name,
        "method_used": r.method_used,
        "s_star": r.s_star,
        "t_star": r.t_star,
        "theta2_used": r.theta2_used,
        "warnings": r.warnings,
    })
}

/// Converse bound on the error probability of an (n, M) code.
#[pyfunction]
#[pyo3(signature = (constraint, n, snr_db, *, m = None, rate_bits = None, theta = "capacity", method = "auto"))]
fn compute_bound(
    py: Python<'_>,
    constraint: &str,
    n: u32,
    snr_db: f64,
    m: Option<f64>,
    rate_bits: Option<f64>,
    theta: &str,
    method: &str,
) -> PyResult<PyObject> {
    let q = query(constraint, n, snr_db, m, rate_bits, theta, method)?;
    let r = py.allow_threads(|| bounds::compute_bound(&q)).map_err(py_err)?;
    to_py(py, &bound_dict(&r))
}

#[pyfunction]
#[pyo3(signature = (n, m, snr_db, maximal = false))]
fn cone_packing(py: Python<'_>, n: u32, m: f64, snr_db: f64, maximal: bool) -> PyResult<PyObject> {
    let u = bounds::snr_to_upsilon(snr_db);
    let r = if maximal {
        bounds::cone_packing_maximal(n, m, u, bounds::SIGMA2)
    } else {
        bounds::cone_packing(n, m, u, bounds::SIGMA2)
    }
    .map_err(py_err)?;
    to_py(py, &bound_dict(&r))
}

/// Bounds (mode "error") or largest rates at level eps (mode "maxrate")
/// along a list of blocklengths.
#[pyfunction]
#[pyo3(signature = (mode, ns, constraint, snr_db, *, m = None, rate_bits = None, eps = None, theta = "capacity", method = "auto", workers = 1))]
fn sweep(
    py: Python<'_>,
    mode: &str,
    ns: Vec<u32>,
    constraint: &str,
    snr_db: f64,
    m: Option<f64>,
    rate_bits: Option<f64>,
    eps: Option<f64>,
    theta: &str,
    method: &str,
    workers: usize,
) -> PyResult<PyObject> {
    let (mode, size) = match mode {
        "error" => (SweepMode::ErrorVsN, code_size(m, rate_bits)?),
        "maxrate" => {
            if eps.is_none() {
                return Err(PyValueError::new_err("maxrate needs eps"));
            }
            (SweepMode::MaxrateVsN, CodeSize::RateBits(1.0))
        }
        other => return Err(PyValueError::new_err(format!("mode `{other}`: expected error or maxrate"))),
    };
    let mut template = BoundQuery::new(parse(constraint)?, 1, size, snr_db);
    template.theta_policy = parse::<ThetaPolicy>(theta)?;
    template.method = parse::<Method>(method)?;
    let rows = py.allow_threads(|| bounds::sweep(mode, &ns, &template, eps, workers.max(1))).map_err(py_err)?;
    to_py(py, &rows)
}

/// Convex envelope of f at (β, Υ) and the chord that realizes it.
#[pyfunction]
#[pyo3(signature = (n, upsilon, theta2, beta, sigma2 = 1.0))]
fn f_envelope(py: Python<'_>, n: u32, upsilon: f64, theta2: f64, beta: f64, sigma2: f64) -> PyResult<PyObject> {
    let b = ln_beta(beta)?;
    let r = py.allow_threads(|| envelope::f_envelope(n, upsilon, sigma2, theta2, b)).map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (gamma, n, theta2, sigma2 = 1.0))]
fn envelope_endpoints(py: Python<'_>, gamma: f64, n: u32, theta2: f64, sigma2: f64) -> PyResult<PyObject> {
    to_py(py, &envelope::envelope_endpoints(gamma, n, sigma2, theta2).map_err(py_err)?)
}

/// Threshold cardinality above which the average-power bound equals f.
#[pyfunction]
#[pyo3(signature = (n, upsilon, theta2, sigma2 = 1.0))]
fn m_bar(py: Python<'_>, n: u32, upsilon: f64, theta2: f64, sigma2: f64) -> PyResult<PyObject> {
    to_py(py, &envelope::m_bar(n, upsilon, sigma2, theta2).map_err(py_err)?)
}

/// Sphere-packing exponent report; rates in bits, exponent in nats.
#[pyfunction]
fn sphere_packing(py: Python<'_>, rate_bits: f64, snr_db: f64) -> PyResult<PyObject> {
    let u = bounds::snr_to_upsilon(snr_db);
    let r = saddlepoint::sphere_packing(rate_bits * std::f64::consts::LN_2, u, bounds::SIGMA2).map_err(py_err)?;
    let bits = |x: f64| x / std::f64::consts::LN_2;
    to_py(
        py,
        &json!({
            "rate_bits": rate_bits,
            "s_star": r.s_star,
            "esp_nats": r.esp,
            "theta_tilde2": r.theta_tilde2,
            "augustin_bits": bits(r.augustin),
            "critical_rate_bits": bits(r.critical_rate_nats),
            "capacity_bits": 0.5 * u.log2_1p(),
        }),
    )
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Monte-Carlo ML error of an M-PSK or (M−1)-PSK-plus-origin code at n = 2.
#[pyfunction]
#[pyo3(signature = (family, m, snr_db, trials, seed = 1, constraint = "maximal", workers = 1))]
fn simulate(
    py: Python<'_>,
    family: &str,
    m: usize,
    snr_db: f64,
    trials: u64,
    seed: u64,
    constraint: &str,
    workers: usize,
) -> PyResult<PyObject> {
    let u = bounds::snr_to_upsilon(snr_db);
    let c = match family {
        "psk" => sim::make_psk(m, u),
        "apsk" => sim::make_apsk(&RingSpec::psk_plus_origin(m), u, parse::<Constraint>(constraint)?),
        other => return Err(PyValueError::new_err(format!("family `{other}`: expected psk or apsk"))),
    }
    .map_err(py_err)?;
    let est = py.allow_threads(|| sim::ml_error_mc(&c, bounds::SIGMA2, trials, seed, workers.max(1)));
    to_py(py, &json!({ "estimate": est, "points": c.points }))
}

/// Built-in consistency checks; each entry has name, passed and detail.
#[pyfunction]
#[pyo3(signature = (full = false))]
fn selftest(py: Python<'_>, full: bool) -> PyResult<PyObject> {
    let checks = py.allow_threads(|| flb::selftest::run(full));
    to_py(py, &checks)
}

#[pymodule]
fn awgn_flb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTestParams>()?;
    m.add_function(wrap_pyfunction!(marcum_q, m)?)?;
    m.add_function(wrap_pyfunction!(marcum_q_log, m)?)?;
    m.add_function(wrap_pyfunction!(compute_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cone_packing, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(f_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_endpoints, m)?)?;
    m.add_function(wrap_pyfunction!(m_bar, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_packing, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! Python bindings for the private retrieval laboratory.
//!
//! The module mirrors the command-line surface: build and verify
//! storage generators, run retrieval sessions end to end, and audit
//! rate and privacy. Reports come back as plain dicts and lists;
//! combination indices are 1-based at this boundary, and exact
//! rationals are rendered as `"numerator/denominator"` strings.

use pfr_core::field::{ratio, ratio_string};
use pfr_core::{
    encode_shards, lower_queries, run_session as core_run_session, InProcessTransport,
    IndexAssignment, MessageStore, PrimeField, QueryGenOptions, QuerySet, SchemeParams,
    SocketNodes, ViewKind,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

// ====================================================================
// Conversions
// ====================================================================

/// Caller mistakes become `ValueError`; integrity and transport
/// failures become `RuntimeError`.
fn to_py_err(e: pfr_core::Error) -> PyErr {
    use pfr_core::Error::*;
    match e {
        NotPrime(_) | FieldMismatch(..) | OutOfRange { .. } | InvalidParams(_)
        | CombinationIndex { .. } | Dimension(_) | GeneratorSearch { .. } | SignSearch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(x) => {
            if let Some(i) = x.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = x.as_u64() {
                u.into_py_any(py)
            } else {
                x.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, val) in map {
                dict.set_item(key, json_to_py(py, val)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization: {e}")))?;
    json_to_py(py, &json)
}

fn params_for(n: usize, k: usize, m: usize, q: u64) -> PyResult<SchemeParams> {
    SchemeParams::new(n, k, m, q).map_err(to_py_err)
}

fn check_nu(params: &SchemeParams, nu: usize) -> PyResult<usize> {
    if nu == 0 || nu > params.v {
        return Err(PyValueError::new_err(format!(
            "nu must lie in 1..={} for these parameters, got {nu}",
            params.v
        )));
    }
    Ok(nu - 1)
}

fn parse_view(view: &str) -> PyResult<ViewKind> {
    match view {
        "lead-row" => Ok(ViewKind::LeadRow),
        "order-trace" => Ok(ViewKind::OrderTrace),
        other => Err(PyValueError::new_err(format!(
            "view must be \"lead-row\" or \"order-trace\", got \"{other}\""
        ))),
    }
}

/// Full MDS generator when the field admits one, else the cyclic-window
/// construction the protocol can still decode against.
fn best_generator(
    n: usize,
    k: usize,
    q: u64,
) -> PyResult<(pfr_core::GeneratorMatrix, &'static str)> {
    match pfr_core::build_generator(n, k, q) {
        Ok(g) => Ok((g, "mds")),
        Err(first) => match pfr_core::build_cyclic_generator(n, k, q) {
            Ok((g, _)) => Ok((g, "cyclic-windows")),
            Err(e) => Err(PyValueError::new_err(format!(
                "no usable generator: {first}; cyclic fallback: {e}"
            ))),
        },
    }
}

// ====================================================================
// Parameters and combinations
// ====================================================================

/// Validated scheme parameters and their derived sizes.
#[pyfunction]
fn scheme_params(py: Python<'_>, n: usize, k: usize, m: usize, q: u64) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let dict = PyDict::new(py);
    dict.set_item("n", params.n)?;
    dict.set_item("k", params.k)?;
    dict.set_item("m", params.m_count)?;
    dict.set_item("q", params.q)?;
    dict.set_item("v", params.v)?;
    dict.set_item("l_tilde", params.l_tilde)?;
    dict.set_item("l", params.l())?;
    dict.set_item("rate", ratio_string(&pfr_core::achievable_rate(n, k, m)))?;
    dict.into_py_any(py)
}

/// Canonical combination coefficient vectors: the unit vectors first,
/// then the remaining representatives in lexicographic order.
#[pyfunction]
fn enumerate_combinations(py: Python<'_>, m: usize, q: u64) -> PyResult<Py<PyAny>> {
    let field = PrimeField::new(q).map_err(to_py_err)?;
    let combos = pfr_core::enumerate_combinations(&field, m);
    let list = PyList::empty(py);
    for combo in combos {
        list.append(combo.coeffs)?;
    }
    list.into_py_any(py)
}

/// Exact closed-form download rate as a `"numerator/denominator"` string.
#[pyfunction]
fn achievable_rate(n: usize, k: usize, m: usize) -> PyResult<String> {
    if k == 0 || n <= k {
        return Err(PyValueError::new_err(format!("need 1 <= K < N, got N={n} K={k}")));
    }
    Ok(ratio_string(&pfr_core::achievable_rate(n, k, m)))
}

// ====================================================================
// Storage code
// ====================================================================

/// Builds a generator matrix and verifies its invertibility profile.
#[pyfunction]
fn build_generator(py: Python<'_>, n: usize, k: usize, q: u64) -> PyResult<Py<PyAny>> {
    let (generator, profile) = best_generator(n, k, q)?;
    let verified = match profile {
        "mds" => pfr_core::verify_mds(&generator).map_err(to_py_err)?,
        _ => pfr_core::verify_cyclic_windows(&generator).map_err(to_py_err)?,
    };
    let rows: Vec<Vec<u64>> =
        (0..k).map(|r| (0..n).map(|c| generator.get(r, c)).collect()).collect();
    let dict = PyDict::new(py);
    dict.set_item("n", n)?;
    dict.set_item("k", k)?;
    dict.set_item("q", q)?;
    dict.set_item("rows", rows)?;
    dict.set_item("profile", profile)?;
    dict.set_item("verified", verified)?;
    dict.into_py_any(py)
}

// ====================================================================
// Sessions
// ====================================================================

/// Runs one private retrieval session end to end and returns the
/// summary: coefficients, download, exact rate, the decoded symbols,
/// and whether they match the plaintext combination.
#[pyfunction]
#[pyo3(signature = (n, k, m, q, nu, seed, transport = "inproc"))]
fn run_session(
    py: Python<'_>,
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    nu: usize,
    seed: u64,
    transport: &str,
) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let nu0 = check_nu(&params, nu)?;
    let field = PrimeField::new(q).map_err(to_py_err)?;
    let (generator, profile) = best_generator(n, k, q)?;
    // The same seed derivation as the command-line `run`, so the two
    // front ends reproduce each other.
    let store = MessageStore::random(&field, m, params.l_tilde, k, seed ^ 0x9e37_79b9);
    let shards = encode_shards(&store, &generator).map_err(to_py_err)?;

    let transcript = match transport {
        "inproc" => {
            let mut t = InProcessTransport::new(shards);
            core_run_session(&params, nu0, seed, &generator, &mut t, QueryGenOptions::default())
                .map_err(to_py_err)?
        }
        "socket" => {
            let nodes = SocketNodes::spawn(shards).map_err(to_py_err)?;
            let mut t = nodes.transport();
            let out = core_run_session(
                &params,
                nu0,
                seed,
                &generator,
                &mut t,
                QueryGenOptions::default(),
            );
            nodes.shutdown().map_err(to_py_err)?;
            out.map_err(to_py_err)?
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "transport must be \"inproc\" or \"socket\", got \"{other}\""
            )))
        }
    };

    let combos = pfr_core::enumerate_combinations(&field, m);
    let mut expected = Vec::with_capacity(params.l());
    for t in 0..params.l_tilde {
        expected
            .extend(pfr_core::virtual_symbol(&store, &combos[nu0], t).map_err(to_py_err)?);
    }
    let verified = transcript.decoded == expected;
    let per_db: Vec<usize> = transcript.answers.iter().map(|a| a.elements.len()).collect();

    let dict = PyDict::new(py);
    dict.set_item("nu", nu)?;
    dict.set_item("coefficients", transcript.coefficients.clone())?;
    dict.set_item("profile", profile)?;
    dict.set_item("transport", transport)?;
    dict.set_item("seed", seed)?;
    dict.set_item("assignment_seed", transcript.assignment_seed)?;
    dict.set_item("download", transcript.download)?;
    dict.set_item("per_db", per_db)?;
    dict.set_item("rate", transcript.rate.clone())?;
    dict.set_item("decoded", transcript.decoded.clone())?;
    dict.set_item("verified", verified)?;
    dict.into_py_any(py)
}

// ====================================================================
// Audits
// ====================================================================

/// Counts one generated session and verifies the download accounting
/// identity chain; returns the per-block census and exact rates.
#[pyfunction]
#[pyo3(signature = (n, k, m, q, nu = 1))]
fn rate_report(
    py: Python<'_>,
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    nu: usize,
) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let nu0 = check_nu(&params, nu)?;
    let set = QuerySet::generate(&params, nu0, QueryGenOptions::default()).map_err(to_py_err)?;
    let report = pfr_core::rate_report(&set).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Compares the per-database query fingerprints across every target
/// under the identity assignment; `uniform` means no database can tell
/// the targets apart structurally.
#[pyfunction]
#[pyo3(signature = (n, k, m, q, disable_m_sym = false))]
fn structural_privacy(
    py: Python<'_>,
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    disable_m_sym: bool,
) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let options = QueryGenOptions { disable_m_sym, leak_row_order: false };
    let report = pfr_core::structural_privacy(&params, options).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Samples private assignments and measures the per-database total
/// variation distance between the views two targets induce.
#[pyfunction]
#[pyo3(signature = (n, k, m, q, nu_a, nu_b, samples, view = "lead-row", seed = 0, leak_row_order = false))]
#[allow(clippy::too_many_arguments)]
fn statistical_privacy(
    py: Python<'_>,
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    nu_a: usize,
    nu_b: usize,
    samples: usize,
    view: &str,
    seed: u64,
    leak_row_order: bool,
) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let a = check_nu(&params, nu_a)?;
    let b = check_nu(&params, nu_b)?;
    let kind = parse_view(view)?;
    let options = QueryGenOptions { disable_m_sym: false, leak_row_order };
    let report = pfr_core::statistical_privacy(&params, a, b, samples, kind, seed, options)
        .map_err(to_py_err)?;
    let value = json_to_py(py, &report.to_json())?;
    let dict = value.bind(py).cast::<PyDict>()?.clone();
    dict.set_item("max", ratio_string(&report.max_tv()))?;
    dict.into_py_any(py)
}

/// Scheme rate against retrieving the combination as one message of
/// the full combination space; `sound` means the scheme never loses.
#[pyfunction]
fn baseline_rates(py: Python<'_>, n: usize, k: usize, m: usize, q: u64) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    serialize_to_py(py, &pfr_core::baseline_rates(&params))
}

/// Two-combination converse bound for caller-supplied exact entropies,
/// each a `(numerator, denominator)` pair.
#[pyfunction]
fn outer_bound_pair(n: usize, k: usize, h1: (i64, i64), h12: (i64, i64)) -> PyResult<String> {
    if h1.1 == 0 || h12.1 == 0 {
        return Err(PyValueError::new_err("entropy denominators must be nonzero"));
    }
    let h1 = ratio(h1.0 as i128, h1.1 as i128);
    let h12 = ratio(h12.0 as i128, h12.1 as i128);
    let bound = pfr_core::outer_bound_pair(n, k, &h1, &h12).map_err(to_py_err)?;
    Ok(ratio_string(&bound))
}

/// Per-database lowered query matrices for one target and assignment
/// seed: the exact rows a database would receive, as
/// `[[(column, coefficient), ...], ...]` per database.
#[pyfunction]
fn lowered_queries(
    py: Python<'_>,
    n: usize,
    k: usize,
    m: usize,
    q: u64,
    nu: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let params = params_for(n, k, m, q)?;
    let nu0 = check_nu(&params, nu)?;
    let set = QuerySet::generate(&params, nu0, QueryGenOptions::default()).map_err(to_py_err)?;
    let assignment = IndexAssignment::random(params.l_tilde, seed);
    let matrices = lower_queries(&set, &assignment).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for matrix in &matrices {
        list.append(matrix.rows.clone())?;
    }
    list.into_py_any(py)
}

// ====================================================================
// Module
// ====================================================================

#[pymodule]
fn pfrlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(scheme_params, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_combinations, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate, m)?)?;
    m.add_function(wrap_pyfunction!(build_generator, m)?)?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(rate_report, m)?)?;
    m.add_function(wrap_pyfunction!(structural_privacy, m)?)?;
    m.add_function(wrap_pyfunction!(statistical_privacy, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_rates, m)?)?;
    m.add_function(wrap_pyfunction!(outer_bound_pair, m)?)?;
    m.add_function(wrap_pyfunction!(lowered_queries, m)?)?;
    Ok(())
}

//! Python module `qfaas`: parse functions, build circuits and run them on the
//! local statevector simulator without a gateway.
//!
//! Circuits are exchanged in their text form (`qubits n`, one gate per line,
//! `measure all`). Structured results come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyComplex, PyDict};
use qfaas_core::circuit::Circuit;
use qfaas_core::qdsl;
use qfaas_core::simulator::{self, DEFAULT_MAX_QUBITS};
use serde_json::Value;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<Value> {
    match obj {
        None => Ok(Value::Null),
        Some(o) => {
            let text: String = py.import("json")?.call_method1("dumps", (o,))?.extract()?;
            serde_json::from_str(&text).map_err(value_err)
        }
    }
}

fn circuit(text: &str) -> PyResult<Circuit> {
    Circuit::from_text(text).map_err(value_err)
}

/// Final statevector of `circuit` as a list of complex amplitudes.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, circuit_text: &str) -> PyResult<Vec<Bound<'py, PyComplex>>> {
    let c = circuit(circuit_text)?;
    let state = py.detach(|| simulator::run(&c)).map_err(value_err)?;
    Ok(state
        .amplitudes()
        .iter()
        .map(|a| PyComplex::from_doubles(py, a.re, a.im))
        .collect())
}

/// Samples `shots` measurement outcomes; returns `{bitstring: count}`.
#[pyfunction]
#[pyo3(signature = (circuit_text, shots, seed=0, readout_flip_p=0.0))]
fn sample<'py>(py: Python<'py>, circuit_text: &str, shots: u64, seed: u64, readout_flip_p: f64) -> PyResult<Bound<'py, PyDict>> {
    let c = circuit(circuit_text)?;
    let result = py
        .detach(|| simulator::execute(&c, shots, seed, readout_flip_p, DEFAULT_MAX_QUBITS, "python"))
        .map_err(value_err)?;
    let out = PyDict::new(py);
    for (k, v) in &result.counts {
        out.set_item(k, v)?;
    }
    Ok(out)
}

/// Width, gate count, two-qubit gate count and depth.
#[pyfunction]
fn circuit_stats<'py>(py: Python<'py>, circuit_text: &str) -> PyResult<Bound<'py, PyAny>> {
    let stats = circuit(circuit_text)?.stats().map_err(value_err)?;
    to_py(py, &stats)
}

/// Parses DSL source; raises `ValueError` with a `line:column` diagnostic.
#[pyfunction]
fn describe<'py>(py: Python<'py>, source: &str) -> PyResult<Bound<'py, PyAny>> {
    let def = qdsl::parse(source).map_err(value_err)?;
    to_py(py, &def)
}

/// Builds the circuit for `input` and returns its text form.
#[pyfunction]
#[pyo3(signature = (source, input=None))]
fn build(py: Python<'_>, source: &str, input: Option<&Bound<'_, PyAny>>) -> PyResult<String> {
    let def = qdsl::parse(source).map_err(value_err)?;
    let bindings = qdsl::preprocess(&def, &from_py(py, input)?).map_err(value_err)?;
    let c = qdsl::instantiate(&def, &bindings).map_err(value_err)?;
    c.to_text().map_err(value_err)
}

/// Runs a function end to end on the local simulator.
///
/// Returns `{"data", "counts", "circuit", "bindings", "seed"}`.
#[pyfunction]
#[pyo3(signature = (source, input=None, shots=1024, seed=None))]
fn run<'py>(
    py: Python<'py>,
    source: &str,
    input: Option<&Bound<'py, PyAny>>,
    shots: u64,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let def = qdsl::parse(source).map_err(value_err)?;
    let bindings = qdsl::preprocess(&def, &from_py(py, input)?).map_err(value_err)?;
    let c = qdsl::instantiate(&def, &bindings).map_err(value_err)?;
    let seed = seed.unwrap_or_else(rand::random);
    let result = py
        .detach(|| simulator::execute(&c, shots, seed, 0.0, DEFAULT_MAX_QUBITS, "python"))
        .map_err(value_err)?;
    let out = qdsl::postprocess(&result.counts, &def.post_pipeline, &bindings).map_err(value_err)?;
    let report = serde_json::json!({
        "data": out.data,
        "counts": result.counts,
        "circuit": c.to_text().map_err(value_err)?,
        "bindings": bindings,
        "seed": seed,
    });
    to_py(py, &report)
}

#[pymodule]
fn qfaas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_stats, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(build, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

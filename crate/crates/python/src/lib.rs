//! Python bindings: `import efxpo`.

use efxpo_core::io::{instance_to_json, parse_instance, verify_fast, ResultFile, VerifyLevel};
use efxpo_core::oracle::{oracle_pareto, validate_theorems as validate, EnumBudget, ParetoVerdict, TheoremOptions};
use efxpo_core::{solve_with, Allocation, Bundle, CheckLevel, Rational, RawInstance, SolveOptions};
use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyFloat;

fn core_err(e: efxpo_core::Error) -> PyErr {
    match e {
        efxpo_core::Error::Validation(_) | efxpo_core::Error::Arith(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn io_err(e: efxpo_core::io::IoError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts `int`, `str` ("3", "3/4", "0.75") or anything whose `str()` is one
/// of those, such as `fractions.Fraction`. Floats are rejected.
fn to_rational(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    if obj.is_instance_of::<PyFloat>() {
        return Err(PyTypeError::new_err("floats are not accepted; pass an int, str or Fraction"));
    }
    let text = obj.str()?.to_string();
    Rational::parse(&text).map_err(|e| PyValueError::new_err(format!("{text:?}: {e}")))
}

fn to_allocation(bundles: Vec<(u64, u64)>) -> Allocation {
    Allocation::new(bundles.into_iter().map(|(x1, x2)| Bundle::new(x1, x2)).collect())
}

/// An instance with `m1`, `m2` goods and per-agent values `(v1, v2)`.
#[pyclass(module = "efxpo", frozen)]
struct Instance {
    raw: RawInstance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(m1: u64, m2: u64, agents: Vec<(Bound<'_, PyAny>, Bound<'_, PyAny>)>) -> PyResult<Self> {
        let pairs = agents
            .iter()
            .map(|(a, b)| Ok((to_rational(a)?, to_rational(b)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let raw = RawInstance::from_pairs(m1, m2, pairs);
        raw.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Instance { raw })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Instance { raw: parse_instance(text).map_err(io_err)? })
    }

    fn to_json(&self) -> String {
        instance_to_json(&self.raw)
    }

    #[getter]
    fn n(&self) -> usize {
        self.raw.n()
    }

    #[getter]
    fn m1(&self) -> u64 {
        self.raw.m1
    }

    #[getter]
    fn m2(&self) -> u64 {
        self.raw.m2
    }

    /// Values as `(v1, v2)` strings.
    #[getter]
    fn agents(&self) -> Vec<(String, String)> {
        self.raw.agents.iter().map(|a| (a.v1.to_string(), a.v2.to_string())).collect()
    }

    /// Utility of `(x1, x2)` for the 0-based agent, as a string fraction.
    fn utility(&self, agent: usize, bundle: (u64, u64)) -> PyResult<String> {
        let u = self.raw.utility(agent, Bundle::new(bundle.0, bundle.1)).map_err(core_err)?;
        Ok(u.to_string())
    }

    fn __repr__(&self) -> String {
        format!("Instance(m1={}, m2={}, n={})", self.raw.m1, self.raw.m2, self.raw.n())
    }
}

#[pyclass(module = "efxpo", frozen)]
struct Solution {
    doc: ResultFile,
}

#[pymethods]
impl Solution {
    /// `(x1, x2)` per agent, in input order.
    #[getter]
    fn allocation(&self) -> Vec<(u64, u64)> {
        self.doc.allocation.bundles().iter().map(|b| (b.x1, b.x2)).collect()
    }

    /// One of `trivial-obs1`, `trivial-one-type`, `split`, `realloc`.
    #[getter]
    fn certificate(&self) -> String {
        self.doc.certificate.kind.clone()
    }

    #[getter]
    fn index(&self) -> Option<(usize, u64)> {
        self.doc.certificate.t.zip(self.doc.certificate.k)
    }

    #[getter]
    fn proper_witness(&self) -> Option<usize> {
        self.doc.certificate.proper_witness
    }

    #[getter]
    fn efx(&self) -> bool {
        self.doc.verification.efx
    }

    #[getter]
    fn split_builds(&self) -> u64 {
        self.doc.stats.split_builds
    }

    fn to_json(&self) -> String {
        self.doc.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Solution(certificate={:?}, allocation={:?})", self.doc.certificate.kind, self.allocation())
    }
}

/// Computes an EFX and Pareto-optimal allocation. `verify` is `"none"`,
/// `"fast"` or `"full"`; `checks` is `"structural"` or `"full"`.
#[pyfunction]
#[pyo3(signature = (instance, verify = "fast", checks = "structural", budget = efxpo_core::oracle::DEFAULT_BUDGET))]
fn solve(py: Python<'_>, instance: &Instance, verify: &str, checks: &str, budget: u64) -> PyResult<Solution> {
    let level = match verify {
        "none" => VerifyLevel::None,
        "fast" => VerifyLevel::Fast,
        "full" => VerifyLevel::Full,
        other => return Err(PyValueError::new_err(format!("unknown verify level {other:?}"))),
    };
    let checks = match checks {
        "structural" => CheckLevel::Structural,
        "full" => CheckLevel::Full,
        other => return Err(PyValueError::new_err(format!("unknown check level {other:?}"))),
    };
    let raw = &instance.raw;
    let opts = SolveOptions { checks, ..SolveOptions::default() };
    let doc = py
        .detach(|| {
            let res = solve_with(raw, &opts)?;
            ResultFile::build(raw, &res, level, EnumBudget { max_allocations: budget }, true)
        })
        .map_err(core_err)?;
    Ok(Solution { doc })
}

#[pyfunction]
fn is_efx(instance: &Instance, allocation: Vec<(u64, u64)>) -> PyResult<bool> {
    Ok(verify_fast(&instance.raw, &to_allocation(allocation)).map_err(core_err)?.0)
}

/// Smallest 1-based sorted position witnessing properness, or `None`.
#[pyfunction]
fn proper_witness(instance: &Instance, allocation: Vec<(u64, u64)>) -> PyResult<Option<usize>> {
    Ok(verify_fast(&instance.raw, &to_allocation(allocation)).map_err(core_err)?.1)
}

/// Exhaustive Pareto check. Returns `None` when optimal, otherwise a
/// dominating allocation.
#[pyfunction]
#[pyo3(signature = (instance, allocation, budget = efxpo_core::oracle::DEFAULT_BUDGET))]
fn pareto_dominator(instance: &Instance, allocation: Vec<(u64, u64)>, budget: u64) -> PyResult<Option<Vec<(u64, u64)>>> {
    let verdict = oracle_pareto(&instance.raw, &to_allocation(allocation), EnumBudget { max_allocations: budget })
        .map_err(core_err)?;
    Ok(match verdict {
        ParetoVerdict::Optimal => None,
        ParetoVerdict::DominatedBy(a) => Some(a.bundles().iter().map(|b| (b.x1, b.x2)).collect()),
    })
}

/// Brute-force check of every structural claim; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (instance, budget = efxpo_core::oracle::DEFAULT_BUDGET))]
fn validate_theorems(instance: &Instance, budget: u64) -> PyResult<String> {
    let opts = TheoremOptions { budget: EnumBudget { max_allocations: budget }, ..TheoremOptions::default() };
    let report = validate(&instance.raw, &opts).map_err(core_err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn efxpo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(is_efx, m)?)?;
    m.add_function(wrap_pyfunction!(proper_witness, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_dominator, m)?)?;
    m.add_function(wrap_pyfunction!(validate_theorems, m)?)?;
    Ok(())
}

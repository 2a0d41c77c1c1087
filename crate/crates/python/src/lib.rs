//! Python bindings: transform mini-C sources, inspect verdicts, emit C and
//! run the reference interpreter.

use std::collections::BTreeMap;

use loopforge::cli::{verify_function, VerifyOutcome};
use loopforge::codegen::{render, CodegenOptions, CounterNaming, LoopStyle};
use loopforge::directives::{dump_plan, resolve_plan, DirectiveKind};
use loopforge::frontend::parse_source;
use loopforge::interp::{run_function, InterpConfig};
use loopforge::legality::{Policy, StepReport, DEFAULT_GRID, DEFAULT_MAX_INSTANCES};
use loopforge::pipeline::{self, transform_source, Options};
use loopforge::sched::lower_to_tree;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(loopforge, LoopforgeError, PyValueError, "Parse, directive or code generation failure.");

fn err(e: impl std::fmt::Display) -> PyErr {
    LoopforgeError::new_err(e.to_string())
}

/// Verdict for one directive.
#[pyclass(name = "StepReport", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyStepReport {
    pub function: String,
    pub line: u32,
    pub column: u32,
    pub kind: String,
    pub verdict: String,
    pub applied: bool,
    pub detail: Option<String>,
}

impl From<&StepReport> for PyStepReport {
    fn from(r: &StepReport) -> Self {
        PyStepReport {
            function: r.function.clone(),
            line: r.loc.line,
            column: r.loc.col,
            kind: r.kind.keyword().to_string(),
            verdict: r.verdict.to_string(),
            applied: r.verdict.applied(),
            detail: r.detail.clone(),
        }
    }
}

#[pymethods]
impl PyStepReport {
    fn __repr__(&self) -> String {
        format!("StepReport({}:{}:{} {} {})", self.function, self.line, self.column, self.kind, self.verdict)
    }
}

/// Result of applying a source's directives.
#[pyclass(name = "Outcome", frozen)]
pub struct PyOutcome {
    inner: pipeline::Outcome,
    grid: Vec<i64>,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn has_errors(&self) -> bool {
        self.inner.has_errors()
    }

    #[getter]
    fn applied(&self) -> usize {
        self.inner.applied()
    }

    #[getter]
    fn diagnostics(&self) -> Vec<String> {
        self.inner.diagnostics.iter().map(|d| d.to_string()).collect()
    }

    #[getter]
    fn reports(&self) -> Vec<PyStepReport> {
        self.inner.reports().iter().map(PyStepReport::from).collect()
    }

    #[getter]
    fn functions(&self) -> Vec<String> {
        self.inner.program.functions.iter().map(|f| f.name.clone()).collect()
    }

    /// Generated C for the whole translation unit.
    #[pyo3(signature = (loop_style = "auto", counter_names = "numbered"))]
    fn emit_c(&self, loop_style: &str, counter_names: &str) -> PyResult<String> {
        let style: LoopStyle = loop_style.parse().map_err(err)?;
        let counters = match counter_names {
            "numbered" => CounterNaming::Numbered,
            "ids" => CounterNaming::LoopIds,
            other => return Err(err(format!("unknown counter naming `{other}`"))),
        };
        render(&self.inner, &CodegenOptions { style, counters }).map_err(err)
    }

    /// Schedule tree of a function, rendered as text.
    fn tree(&self, function: &str) -> PyResult<String> {
        let fo = self
            .inner
            .functions
            .iter()
            .find(|f| f.original.name == function)
            .ok_or_else(|| err(format!("no function `{function}`")))?;
        match &fo.tree {
            Some(t) => Ok(t.to_string()),
            None => lower_to_tree(&fo.original).map(|t| t.to_string()).map_err(err),
        }
    }

    /// Interprets original and generated code for every grid binding.
    /// Returns `(function, passed, detail)` triples.
    #[pyo3(signature = (grid = None, seed = 0))]
    fn verify(&self, grid: Option<Vec<i64>>, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
        let grid = grid.unwrap_or_else(|| self.grid.clone());
        let generated = loopforge::codegen::generate_program(&self.inner, &CodegenOptions::default()).map_err(err)?;
        Ok(self
            .inner
            .program
            .functions
            .iter()
            .zip(&generated.functions)
            .map(|(o, g)| match verify_function(o, g, &grid, seed) {
                VerifyOutcome::Pass { checked, skipped } => {
                    (o.name.clone(), true, format!("{checked} bindings, {skipped} skipped"))
                }
                VerifyOutcome::Fail { binding, detail } => (o.name.clone(), false, format!("{binding:?}: {detail}")),
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Outcome(functions={:?}, applied={}, errors={})", self.functions(), self.applied(), self.has_errors())
    }
}

/// Applies the `#pragma clang loop` directives of `source`.
#[pyfunction]
#[pyo3(signature = (source, policy = "error", grid = None, max_instances = DEFAULT_MAX_INSTANCES))]
fn transform(source: &str, policy: &str, grid: Option<Vec<i64>>, max_instances: usize) -> PyResult<PyOutcome> {
    let policy: Policy = policy.parse().map_err(|_| err(format!("unknown policy `{policy}`")))?;
    let grid = grid.unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let opts = Options { policy, grid: grid.clone(), max_instances };
    let inner = transform_source(source, &opts).map_err(err)?;
    Ok(PyOutcome { inner, grid })
}

/// Resolved transformation plan, one line per step.
#[pyfunction]
fn plan(source: &str) -> PyResult<String> {
    let p = parse_source(source).map_err(err)?;
    resolve_plan(&p).map(|p| dump_plan(&p)).map_err(err)
}

type Cells = Vec<(Vec<i64>, f64)>;

/// Runs one function and returns the elements it wrote, per array, as
/// `(index, value)` pairs sorted by index.
#[pyfunction]
#[pyo3(signature = (source, function, params, seed = 0))]
fn interpret(
    source: &str,
    function: &str,
    params: BTreeMap<String, i64>,
    seed: u64,
) -> PyResult<BTreeMap<String, Cells>> {
    let p = parse_source(source).map_err(err)?;
    let f = p.function(function).ok_or_else(|| err(format!("no function `{function}`")))?;
    let r = run_function(f, &params, &InterpConfig { seed, ..Default::default() }).map_err(err)?;
    Ok(r.arrays
        .into_iter()
        .map(|(name, st)| {
            let mut cells: Vec<(Vec<i64>, f64)> = st.written.into_iter().map(|(k, v)| (k, v.as_f64())).collect();
            cells.sort_by(|a, b| a.0.cmp(&b.0));
            (name, cells)
        })
        .collect())
}

#[pymodule(name = "loopforge")]
pub fn loopforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LoopforgeError", m.py().get_type::<LoopforgeError>())?;
    m.add("DIRECTIVE_KINDS", DirectiveKind::ALL.iter().map(|k| k.keyword()).collect::<Vec<_>>())?;
    m.add("DEFAULT_GRID", DEFAULT_GRID.to_vec())?;
    m.add_class::<PyOutcome>()?;
    m.add_class::<PyStepReport>()?;
    m.add_function(wrap_pyfunction!(transform, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(interpret, m)?)?;
    Ok(())
}

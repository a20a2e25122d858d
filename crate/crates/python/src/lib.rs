//! Python bindings. Texts use the same formats as the files on disk.

use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rulesift::entailment::{consequences, coverage, rule_support};
use rulesift::eval::{evaluate as eval_scenarios, load_scenarios, write_scenarios, EvalError};
use rulesift::ingestion::synth::{generate_corpus, generate_scenarios, SynthConfig};
use rulesift::ingestion::{read_corpus, write_corpus, IngestError};
use rulesift::learner::{ReferenceLearner, Solver, SolverRequest};
use rulesift::logic::{
    canonical as canon, parse_bias, parse_clause, parse_examples, parse_facts, parse_program, print_clause, print_program,
    Atom, BiasSpec, ExampleSet, Program, RUNWAY_BIAS, RUNWAY_RULES,
};
use rulesift::pipeline::{run_pipeline, PipelineConfig, PipelineError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ingest_err(e: IngestError) -> PyErr {
    match e {
        IngestError::Io { .. } | IngestError::MissingFixture(_) => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn eval_err(e: EvalError) -> PyErr {
    match e {
        EvalError::Ingest(i) => ingest_err(i),
        other => value_err(other),
    }
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Ingest(i) => ingest_err(i),
        other => value_err(other),
    }
}

fn facts(text: &str) -> PyResult<Program> {
    parse_facts(text).map_err(value_err)
}

fn examples(text: &str) -> PyResult<ExampleSet> {
    parse_examples(text).map_err(value_err)
}

fn bias_or_default(text: Option<&str>) -> PyResult<BiasSpec> {
    parse_bias(text.unwrap_or(RUNWAY_BIAS)).map_err(value_err)
}

fn strings(atoms: &[Atom]) -> Vec<String> {
    atoms.iter().map(Atom::to_string).collect()
}

/// A set of definite clauses, kept in canonical form.
#[pyclass(name = "Program", module = "rulesift", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyProgram {
    inner: Program,
}

#[pymethods]
impl PyProgram {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyProgram { inner: parse_program(text).map_err(value_err)? })
    }

    /// The hand-engineered runway rules.
    #[staticmethod]
    fn runway() -> Self {
        PyProgram { inner: parse_program(RUNWAY_RULES).expect("built-in rules parse") }
    }

    fn clauses(&self) -> Vec<String> {
        self.inner.iter().map(print_clause).collect()
    }

    fn consequences(&self, background: &str) -> PyResult<Vec<String>> {
        Ok(strings(&consequences(&facts(background)?, &self.inner).atoms()))
    }

    fn entails(&self, background: &str, atom: &str) -> PyResult<bool> {
        let goal = parse_facts(&format!("{}.", atom.trim().trim_end_matches('.'))).map_err(value_err)?;
        let model = consequences(&facts(background)?, &self.inner);
        let held = goal.facts().all(|a| model.contains(a));
        Ok(held)
    }

    /// `(covered positives, covered negatives)`.
    fn coverage(&self, background: &str, exs: &str) -> PyResult<(Vec<String>, Vec<String>)> {
        let c = coverage(&facts(background)?, &self.inner, &examples(exs)?);
        Ok((strings(&c.covered_pos), strings(&c.covered_neg)))
    }

    /// Positives each rule derives on its own.
    fn support(&self, background: &str, exs: &str) -> PyResult<Vec<(String, usize)>> {
        let b = facts(background)?;
        let e = examples(exs)?;
        Ok(self.inner.rules().map(|r| (print_clause(r), rule_support(r, &b, e.positives()))).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        print_program(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Program({:?})", print_program(&self.inner))
    }
}

/// Canonical text of one clause.
#[pyfunction]
fn canonical(clause: &str) -> PyResult<String> {
    Ok(print_clause(&canon(&parse_clause(clause).map_err(value_err)?)))
}

/// Learns a consistent hypothesis; returns `(outcome, program or None)`.
#[pyfunction]
#[pyo3(signature = (background, examples, bias = None, max_vars = None, max_body = None, max_clauses = None, timeout = 10.0))]
fn solve(
    py: Python<'_>,
    background: &str,
    examples: &str,
    bias: Option<&str>,
    max_vars: Option<usize>,
    max_body: Option<usize>,
    max_clauses: Option<usize>,
    timeout: f64,
) -> PyResult<(String, Option<PyProgram>)> {
    let mut b = bias_or_default(bias)?;
    b = b.clone().with_bounds(max_vars.unwrap_or(b.max_vars), max_body.unwrap_or(b.max_body), max_clauses.unwrap_or(b.max_clauses));
    let timeout = Duration::try_from_secs_f64(timeout).map_err(value_err)?;
    let req = SolverRequest::new(facts(background)?, self::examples(examples)?, b).with_timeout(timeout);
    let res = py.detach(|| ReferenceLearner::new().solve(&req)).map_err(value_err)?;
    Ok((res.outcome_label().to_string(), res.hypothesis().map(|h| PyProgram { inner: h.clone() })))
}

/// Output of one pipeline run.
#[pyclass(name = "LearnResult", module = "rulesift", frozen, get_all)]
struct LearnResult {
    rules: PyProgram,
    reliable: Vec<String>,
    best_trial: u32,
    success: bool,
    report_jsonl: String,
    report_text: String,
}

#[pyfunction]
#[pyo3(signature = (corpus, bias = None, rho = 0.30, tau = 0.20, retries = 5, seed = 0, max_vars = None, max_body = None, max_clauses = None))]
fn learn(
    py: Python<'_>,
    corpus: PathBuf,
    bias: Option<&str>,
    rho: f64,
    tau: f64,
    retries: u32,
    seed: u64,
    max_vars: Option<usize>,
    max_body: Option<usize>,
    max_clauses: Option<usize>,
) -> PyResult<LearnResult> {
    let c = read_corpus(&corpus).map_err(ingest_err)?;
    let bias = match (bias, &c.bias) {
        (Some(text), _) => parse_bias(text).map_err(value_err)?,
        (None, Some(text)) => parse_bias(text).map_err(value_err)?,
        (None, None) => bias_or_default(None)?,
    };
    let config = PipelineConfig { rho, tau, max_retries: retries, seed, max_vars, max_body, max_clauses, ..Default::default() };
    let report = py.detach(|| run_pipeline(&c.entries, &bias, &config, &ReferenceLearner::new())).map_err(pipeline_err)?;
    Ok(LearnResult {
        rules: PyProgram { inner: report.final_hypothesis.clone() },
        reliable: report.reliable.clone(),
        best_trial: report.level3.best_trial,
        success: report.level3.success,
        report_jsonl: report.to_jsonl(),
        report_text: report.to_text(),
    })
}

/// Confusion counts and metrics of `rules` on a scenario directory.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, rules: &PyProgram, scenarios: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let sc = load_scenarios(&scenarios).map_err(eval_err)?;
    let r = py.detach(|| eval_scenarios(&rules.inner, &sc));
    let d = PyDict::new(py);
    d.set_item("tp", r.confusion.tp)?;
    d.set_item("fp", r.confusion.fp)?;
    d.set_item("fn", r.confusion.fn_)?;
    d.set_item("tn", r.confusion.tn)?;
    d.set_item("accuracy", r.metrics.accuracy)?;
    d.set_item("precision", r.metrics.precision)?;
    d.set_item("recall", r.metrics.recall)?;
    d.set_item("f1", r.metrics.f1)?;
    d.set_item("scenarios_correct", r.scenarios.iter().filter(|s| s.correct).count())?;
    d.set_item("scenarios", r.scenarios.len())?;
    Ok(d)
}

/// Writes a synthetic corpus planted from `rules` (default: the runway
/// rules), plus `held_out` scenarios in `<out>-held-out`. Returns the
/// number of corrupted subsets.
#[pyfunction]
#[pyo3(signature = (out, subsets = 30, corruption = 0.0, seed = 0, held_out = 0, rules = None, bias = None))]
fn generate(
    out: PathBuf,
    subsets: usize,
    corruption: f64,
    seed: u64,
    held_out: usize,
    rules: Option<&PyProgram>,
    bias: Option<&str>,
) -> PyResult<usize> {
    let planted = match rules {
        Some(p) => p.inner.clone(),
        None => parse_program(RUNWAY_RULES).expect("built-in rules parse"),
    };
    let bias = bias_or_default(bias)?;
    let cfg = SynthConfig { subsets, corruption, seed, ..Default::default() };
    let corpus = generate_corpus(&planted, &bias, &cfg).map_err(value_err)?;
    write_corpus(&out, &corpus.to_corpus()).map_err(ingest_err)?;
    std::fs::write(out.join("manifest.json"), corpus.manifest()).map_err(|e| PyIOError::new_err(e.to_string()))?;
    if held_out > 0 {
        let sc = generate_scenarios(&planted, &bias, held_out, seed).map_err(value_err)?;
        let mut dir = out.into_os_string();
        dir.push("-held-out");
        write_scenarios(&PathBuf::from(dir), &sc, cfg.start).map_err(ingest_err)?;
    }
    Ok(corpus.corrupted().count())
}

#[pymodule(name = "rulesift")]
fn rulesift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_class::<LearnResult>()?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("RUNWAY_BIAS", RUNWAY_BIAS)?;
    Ok(())
}

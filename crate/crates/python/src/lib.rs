//! Python bindings: parsing and verification, pool state, replayed
//! induction runs and the analytics tables.

use std::collections::BTreeMap;
use std::path::PathBuf;

use actionspace_core::agentlang::{self, extract_calls, Rejection, Value};
use actionspace_core::analytics;
use actionspace_core::corpus::{self, InstructionStep};
use actionspace_core::genclient;
use actionspace_core::induction::{self, RunSinks};
use actionspace_core::pool::seed_from_annotations;
use actionspace_core::{AgentProgram, InductionRecord, PipelineVariant, PoolState, ReplayBackend, RunConfig, Tutorial};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(actionspace, ParseError, PyValueError, "The text is not a valid agent program.");
create_exception!(actionspace, RejectedProgram, PyValueError, "A program failed verification against its tutorial.");
create_exception!(actionspace, ActionspaceError, PyRuntimeError, "Any other failure inside the library.");

fn runtime(e: impl std::fmt::Display) -> PyErr {
    ActionspaceError::new_err(e.to_string())
}

fn variant(s: &str) -> PyResult<PipelineVariant> {
    s.parse().map_err(PyValueError::new_err)
}

#[pyclass(name = "Tutorial", module = "actionspace", frozen, from_py_object)]
#[derive(Clone)]
struct PyTutorial {
    inner: Tutorial,
}

#[pymethods]
impl PyTutorial {
    /// `steps` is a list of `(index, headline, description or None)`.
    #[new]
    #[pyo3(signature = (id, title, steps, category = None))]
    fn new(id: String, title: String, steps: Vec<(u32, String, Option<String>)>, category: Option<Vec<String>>) -> PyResult<Self> {
        let inner = Tutorial {
            id,
            title,
            category: category.unwrap_or_default(),
            steps: steps.into_iter().map(|(index, headline, description)| InstructionStep { index, headline, description }).collect(),
        };
        inner.validate().map_err(PyValueError::new_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: Tutorial = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(PyValueError::new_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("tutorial serializes")
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn title(&self) -> &str {
        &self.inner.title
    }

    #[getter]
    fn category(&self) -> Vec<String> {
        self.inner.category.clone()
    }

    #[getter]
    fn steps(&self) -> Vec<(u32, String, Option<String>)> {
        self.inner.steps.iter().map(|s| (s.index, s.headline.clone(), s.description.clone())).collect()
    }

    /// The numbered steps as they appear in prompts.
    #[pyo3(signature = (include_descriptions = false))]
    fn render(&self, include_descriptions: bool) -> String {
        corpus::render_instructions(&self.inner, include_descriptions)
    }

    fn __repr__(&self) -> String {
        format!("Tutorial({:?}, {} steps)", self.inner.id, self.inner.steps.len())
    }
}

#[pyclass(name = "Program", module = "actionspace", frozen)]
struct PyProgram {
    inner: AgentProgram,
}

#[pymethods]
impl PyProgram {
    /// Numbers of the step comments, in source order.
    fn step_numbers(&self) -> Vec<u32> {
        self.inner.step_numbers()
    }

    /// `(callee, kwargs, step)` for every call in the policy function.
    fn calls<'py>(&self, py: Python<'py>) -> PyResult<Vec<(String, Bound<'py, PyDict>, Option<u32>)>> {
        extract_calls(&self.inner)
            .into_iter()
            .map(|c| {
                let d = PyDict::new(py);
                for (k, v) in &c.kwargs {
                    match v {
                        Value::Object(s) | Value::Text(s) => d.set_item(k, s)?,
                        Value::Number(n) => d.set_item(k, n)?,
                    }
                }
                Ok((c.callee, d, c.step))
            })
            .collect()
    }

    /// Canonical source text.
    fn to_source(&self) -> String {
        agentlang::print(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Program({} statements)", self.inner.walk().len())
    }
}

#[pyclass(name = "InductionRecord", module = "actionspace", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyRecord {
    step: u32,
    tutorial_id: String,
    attempts: u32,
    unique_apis_evoked: u32,
    new_apis: Vec<String>,
    accepted: bool,
}

impl From<InductionRecord> for PyRecord {
    fn from(r: InductionRecord) -> Self {
        Self {
            step: r.step,
            tutorial_id: r.tutorial_id,
            attempts: r.attempts,
            unique_apis_evoked: r.unique_apis_evoked,
            new_apis: r.new_apis,
            accepted: r.accepted,
        }
    }
}

impl From<&PyRecord> for InductionRecord {
    fn from(r: &PyRecord) -> Self {
        Self {
            step: r.step,
            tutorial_id: r.tutorial_id.clone(),
            attempts: r.attempts,
            unique_apis_evoked: r.unique_apis_evoked,
            new_apis: r.new_apis.clone(),
            accepted: r.accepted,
        }
    }
}

#[pymethods]
impl PyRecord {
    fn __repr__(&self) -> String {
        format!("InductionRecord(step={}, tutorial_id={:?}, new={})", self.step, self.tutorial_id, self.new_apis.len())
    }
}

fn records_of(r: &[PyRecord]) -> Vec<InductionRecord> {
    r.iter().map(InductionRecord::from).collect()
}

#[pyclass(name = "PoolState", module = "actionspace")]
struct PyPool {
    inner: PoolState,
}

#[pymethods]
impl PyPool {
    /// The base API registry with no demonstrations.
    #[staticmethod]
    fn base() -> Self {
        Self { inner: PoolState::base() }
    }

    /// Builds the seed pool from annotated demonstration files.
    #[staticmethod]
    fn seed(paths: Vec<PathBuf>) -> PyResult<Self> {
        Ok(Self { inner: seed_from_annotations(&paths).map_err(runtime)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: PoolState::load(path).map_err(runtime)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.persist(path).map_err(runtime)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    #[getter]
    fn step_counter(&self) -> u32 {
        self.inner.step_counter
    }

    fn api_names(&self) -> Vec<String> {
        self.inner.apis.keys().cloned().collect()
    }

    fn demo_ids(&self) -> Vec<String> {
        self.inner.demos.iter().map(|d| d.tutorial_id.clone()).collect()
    }

    fn total_calls(&self, name: &str) -> Option<u64> {
        self.inner.apis.get(name).map(|e| e.total_calls)
    }

    /// APIs called at least `t` times.
    fn filter_by_frequency(&self, t: u64) -> Vec<String> {
        self.inner.filter_by_frequency(t)
    }

    #[pyo3(signature = (top_n = analytics::DEFAULT_TOP_N))]
    fn frequency_table(&self, top_n: usize) -> Vec<(String, u64)> {
        analytics::frequency_table(&self.inner, top_n)
    }

    fn __len__(&self) -> usize {
        self.inner.apis.len()
    }

    fn __repr__(&self) -> String {
        format!("PoolState({} apis, {} demos)", self.inner.apis.len(), self.inner.demos.len())
    }
}

#[pyclass(name = "RunConfig", module = "actionspace")]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self { inner: RunConfig::default() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::from_toml_str(text).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn get_variant(&self) -> &'static str {
        self.inner.variant.name()
    }

    #[setter]
    fn set_variant(&mut self, v: &str) -> PyResult<()> {
        self.inner.variant = variant(v)?;
        Ok(())
    }

    #[getter]
    fn get_k(&self) -> usize {
        self.inner.k
    }

    #[setter]
    fn set_k(&mut self, k: usize) {
        self.inner.k = k;
    }

    #[getter]
    fn get_sample_size(&self) -> Option<usize> {
        self.inner.sample_size
    }

    #[setter]
    fn set_sample_size(&mut self, n: Option<usize>) {
        self.inner.sample_size = n;
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, s: u64) {
        self.inner.seed = s;
    }
}

/// Parses agent-program text.
#[pyfunction]
fn parse(text: &str) -> PyResult<PyProgram> {
    agentlang::parse(text).map(|inner| PyProgram { inner }).map_err(|e| ParseError::new_err(e.to_string()))
}

/// Parses `text` and checks that every step of `tutorial` has its comment.
#[pyfunction]
fn verify(text: &str, tutorial: &PyTutorial) -> PyResult<PyProgram> {
    agentlang::verify(text, &tutorial.inner).map(|inner| PyProgram { inner }).map_err(|r| match r {
        Rejection::Syntax(e) => ParseError::new_err(e.to_string()),
        r @ Rejection::MissingSteps(_) => RejectedProgram::new_err(r.to_string()),
    })
}

/// The program part of a raw completion.
#[pyfunction]
fn extract_program_section(completion: &str) -> String {
    genclient::extract_program_section(completion)
}

#[pyfunction]
fn load_corpus(path: PathBuf) -> PyResult<Vec<PyTutorial>> {
    Ok(corpus::load_corpus(path).map_err(runtime)?.into_iter().map(|inner| PyTutorial { inner }).collect())
}

/// Replays a recorded run. Returns the final pool and the per-step records.
#[pyfunction]
#[pyo3(signature = (config, corpus, seed_pool, cassette, stop_after = None))]
fn run_replay(
    py: Python<'_>,
    config: &PyConfig,
    corpus: Vec<PyTutorial>,
    seed_pool: &PyPool,
    cassette: PathBuf,
    stop_after: Option<usize>,
) -> PyResult<(PyPool, Vec<PyRecord>)> {
    let corpus: Vec<Tutorial> = corpus.into_iter().map(|t| t.inner).collect();
    let seed = seed_pool.inner.clone();
    let config = config.inner.clone();
    let out = py
        .detach(move || {
            let mut backend = ReplayBackend::open(&cassette)?;
            let sinks = RunSinks { stop_after, ..RunSinks::default() };
            induction::run(&config, &corpus, seed, &mut backend, &config.embedding.build(), sinks)
        })
        .map_err(runtime)?;
    Ok((PyPool { inner: out.pool }, out.records.into_iter().map(PyRecord::from).collect()))
}

/// `{threshold: [(step, pool size), ...]}`.
#[pyfunction]
#[pyo3(signature = (pool, records, thresholds = analytics::DEFAULT_THRESHOLDS.to_vec()))]
fn pool_size_curve(pool: &PyPool, records: Vec<PyRecord>, thresholds: Vec<u64>) -> PyResult<BTreeMap<u64, Vec<(u32, usize)>>> {
    analytics::pool_size_curve(&records_of(&records), &pool.inner.demos, &thresholds).map_err(runtime)
}

/// `(raw, moving)` lists of `(step, ratio)`.
#[pyfunction]
#[pyo3(signature = (records, window = analytics::DEFAULT_WINDOW))]
fn induction_ratio_series(records: Vec<PyRecord>, window: usize) -> (Vec<(u32, f64)>, Vec<(u32, f64)>) {
    let s = analytics::induction_ratio_series(&records_of(&records), window);
    (s.raw, s.moving)
}

/// `(covered, total)` for the top APIs against a coverage mapping file.
#[pyfunction]
#[pyo3(signature = (pool, mapping_path, top_n = analytics::DEFAULT_TOP_N))]
fn coverage(pool: &PyPool, mapping_path: PathBuf, top_n: usize) -> PyResult<(usize, usize)> {
    let mapping = analytics::load_coverage_mapping(mapping_path).map_err(runtime)?;
    let r = analytics::coverage_compare(&analytics::frequency_table(&pool.inner, top_n), &mapping);
    Ok((r.covered, r.total))
}

/// The human-evaluation table as text or CSV.
#[pyfunction]
#[pyo3(signature = (annotation_paths, records = None, format = "text"))]
fn human_eval_report(
    annotation_paths: Vec<PathBuf>,
    records: Option<BTreeMap<String, Vec<PyRecord>>>,
    format: &str,
) -> PyResult<String> {
    let mut ann = analytics::Annotations::default();
    for p in annotation_paths {
        let more = analytics::read_annotations(p).map_err(runtime)?;
        ann.redundancy.extend(more.redundancy);
        ann.faithfulness.extend(more.faithfulness);
        ann.rankings.extend(more.rankings);
    }
    let mut by_variant = BTreeMap::new();
    for (v, r) in records.unwrap_or_default() {
        by_variant.insert(variant(&v)?, records_of(&r));
    }
    let report = analytics::human_eval_report(&ann, &by_variant).map_err(|e| PyValueError::new_err(e.to_string()))?;
    match format {
        "text" => Ok(report.to_text()),
        "csv" => report.to_csv().map_err(runtime),
        other => Err(PyValueError::new_err(format!("unknown format {other:?} (expected text or csv)"))),
    }
}

/// Cosine similarity under the offline hashing embedding.
#[pyfunction]
fn similarity(a: &str, b: &str) -> PyResult<f64> {
    actionspace_core::Embedder::local().similarity(a, b).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn actionspace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("RejectedProgram", py.get_type::<RejectedProgram>())?;
    m.add("ActionspaceError", py.get_type::<ActionspaceError>())?;
    m.add_class::<PyTutorial>()?;
    m.add_class::<PyProgram>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyPool>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(extract_program_section, m)?)?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_replay, m)?)?;
    m.add_function(wrap_pyfunction!(pool_size_curve, m)?)?;
    m.add_function(wrap_pyfunction!(induction_ratio_series, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(human_eval_report, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    Ok(())
}

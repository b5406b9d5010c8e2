//! The sequential induction loop with checkpoint and resume.
//!
//! Each step takes the next sampled tutorial, builds a prompt from the
//! current pool, samples until a program verifies (or gives up), and folds
//! the result back into the pool before moving on.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{corpus_digest, sample_tutorials, CorpusError, Tutorial};
use crate::digest::sha256_hex;
use crate::genclient::{generate_with_rejection, GenError, GenerationBackend, GenerationOutcome, LiveBackend, DEFAULT_SCHEDULE};
use crate::pool::{write_atomic, InductionRecord, PoolState};
use crate::promptgen::{build_prompt, PipelineVariant, PromptError, PromptOptions, DEFAULT_CHAR_BUDGET};
use crate::retrieval::{Embedder, HttpEmbeddingBackend, LocalHashBackend, LOCAL_DIMENSION};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("seed pool has no demonstrations")]
    EmptySeedPool,
    #[error("checkpoint was written with a different configuration")]
    ConfigMismatch,
    #[error("checkpoint was written for a different corpus")]
    CorpusMismatch,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("aborted at step {step} ({tutorial_id}); resumable checkpoint left behind: {source}")]
    Aborted { step: u32, tutorial_id: String, source: GenError },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-1106-preview".into(),
            timeout_secs: 120,
            max_retries: 3,
        }
    }
}

impl GenerationConfig {
    pub fn live_backend(&self) -> LiveBackend {
        LiveBackend::new(&self.endpoint, &self.model, Duration::from_secs(self.timeout_secs), self.max_retries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Local,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: EmbeddingKind,
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: EmbeddingKind::Local,
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model: "text-embedding-ada-002".into(),
            dimension: LOCAL_DIMENSION,
            cache_dir: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Embedder {
        let e = match self.backend {
            EmbeddingKind::Local => Embedder::new(Box::new(LocalHashBackend::with_dimension(self.dimension))),
            EmbeddingKind::Http => {
                Embedder::new(Box::new(HttpEmbeddingBackend::new(&self.endpoint, &self.model, self.dimension)))
            }
        };
        match &self.cache_dir {
            Some(d) => e.with_disk_cache(d),
            None => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: PipelineVariant,
    pub k: usize,
    pub max_attempts: u32,
    pub temperature_schedule: Vec<f64>,
    /// Tutorials to draw; all of them when unset.
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub char_budget: usize,
    pub retrieval_descriptions: Option<bool>,
    pub checkpoint_interval: u32,
    pub system_prompt: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: PipelineVariant::BaseUseCase,
            k: 10,
            max_attempts: 3,
            temperature_schedule: DEFAULT_SCHEDULE.to_vec(),
            sample_size: None,
            seed: 0,
            char_budget: DEFAULT_CHAR_BUDGET,
            retrieval_descriptions: None,
            checkpoint_interval: 50,
            system_prompt: None,
            generation: GenerationConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

/// The fields that can change what a run produces.
#[derive(Serialize)]
struct DigestView<'a> {
    variant: PipelineVariant,
    k: usize,
    max_attempts: u32,
    temperature_schedule: &'a [f64],
    sample_size: Option<usize>,
    seed: u64,
    char_budget: usize,
    retrieval_descriptions: Option<bool>,
    embedding_backend: EmbeddingKind,
    embedding_model: &'a str,
    embedding_dimension: usize,
    system_prompt_sha256: String,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, InductionError> {
        let c: Self = toml::from_str(text).map_err(|e| InductionError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), InductionError> {
        let bad = |m: String| Err(InductionError::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.temperature_schedule.len() < self.max_attempts as usize {
            return bad(format!(
                "temperature_schedule has {} entries but max_attempts is {}",
                self.temperature_schedule.len(),
                self.max_attempts
            ));
        }
        if self.temperature_schedule.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("temperatures must be finite and non-negative".into());
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval must be at least 1".into());
        }
        Ok(())
    }

    /// Reads the configured system prompt, or the built-in one.
    pub fn system_text(&self) -> Result<String, InductionError> {
        match &self.system_prompt {
            Some(p) => Ok(fs::read_to_string(p)?),
            None => Ok(crate::promptgen::DEFAULT_SYSTEM_PROMPT.to_string()),
        }
    }

    pub fn digest(&self, system_text: &str) -> String {
        let view = DigestView {
            variant: self.variant,
            k: self.k,
            max_attempts: self.max_attempts,
            temperature_schedule: &self.temperature_schedule,
            sample_size: self.sample_size,
            seed: self.seed,
            char_budget: self.char_budget,
            retrieval_descriptions: self.retrieval_descriptions,
            embedding_backend: self.embedding.backend,
            embedding_model: if self.embedding.backend == EmbeddingKind::Http { &self.embedding.model } else { "" },
            embedding_dimension: self.embedding.dimension,
            system_prompt_sha256: sha256_hex(system_text),
        };
        sha256_hex(serde_json::to_vec(&view).expect("config serializes"))
    }

    pub fn prompt_options(&self) -> PromptOptions {
        PromptOptions { k: self.k, char_budget: self.char_budget, retrieval_descriptions: self.retrieval_descriptions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointBody {
    pub config_digest: String,
    pub corpus_digest: String,
    /// Number of sampled tutorials already processed.
    pub position: usize,
    pub pool: PoolState,
    pub records: Vec<InductionRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    checksum: String,
    body: CheckpointBody,
}

impl CheckpointBody {
    pub fn to_bytes(&self) -> Vec<u8> {
        let checksum = sha256_hex(serde_json::to_vec(self).expect("checkpoint serializes"));
        let doc = CheckpointFile { format_version: CHECKPOINT_VERSION, checksum, body: self.clone() };
        let mut out = serde_json::to_vec_pretty(&doc).expect("checkpoint serializes");
        out.push(b'\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), InductionError> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InductionError> {
        let bytes = fs::read(path)?;
        let doc: CheckpointFile =
            serde_json::from_slice(&bytes).map_err(|e| InductionError::CorruptCheckpoint(e.to_string()))?;
        if doc.format_version != CHECKPOINT_VERSION {
            return Err(InductionError::CorruptCheckpoint(format!("unsupported version {}", doc.format_version)));
        }
        if sha256_hex(serde_json::to_vec(&doc.body).expect("checkpoint serializes")) != doc.checksum {
            return Err(InductionError::CorruptCheckpoint("checksum mismatch".into()));
        }
        Ok(doc.body)
    }
}

/// Where a run writes its side outputs. Everything is optional.
#[derive(Default)]
pub struct RunSinks<'a> {
    pub checkpoint: Option<PathBuf>,
    /// Receives one JSON line per step.
    pub step_log: Option<&'a mut dyn Write>,
    /// Each step's prompt is written here as `step_<n>.txt`.
    pub prompt_dir: Option<PathBuf>,
    /// Stop, checkpointing, once this many tutorials have been processed.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub pool: PoolState,
    pub records: Vec<InductionRecord>,
    /// Tutorials processed so far out of the sample.
    pub position: usize,
    pub sample_len: usize,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.position == self.sample_len
    }
}

#[derive(Serialize)]
struct StepLine<'a> {
    step: u32,
    tutorial_id: &'a str,
    attempts: u32,
    unique: u32,
    new: &'a [String],
    accepted: bool,
}

/// The tutorial stream a config draws from `corpus`.
pub fn sample_stream(config: &RunConfig, corpus: &[Tutorial]) -> Result<Vec<Tutorial>, InductionError> {
    let n = config.sample_size.unwrap_or(corpus.len());
    Ok(sample_tutorials(corpus, n, config.seed)?)
}

/// Runs induction from a seeded pool.
pub fn run(
    config: &RunConfig,
    corpus: &[Tutorial],
    seed_pool: PoolState,
    backend: &mut dyn GenerationBackend,
    embedder: &Embedder,
    sinks: RunSinks<'_>,
) -> Result<RunOutcome, InductionError> {
    config.validate()?;
    if seed_pool.demos.is_empty() {
        return Err(InductionError::EmptySeedPool);
    }
    let system_text = config.system_text()?;
    let body = CheckpointBody {
        config_digest: config.digest(&system_text),
        corpus_digest: corpus_digest(corpus),
        position: 0,
        pool: seed_pool,
        records: Vec::new(),
    };
    drive(config, corpus, body, &system_text, backend, embedder, sinks)
}

/// Continues a run from its checkpoint.
pub fn resume(
    checkpoint: &Path,
    config: &RunConfig,
    corpus: &[Tutorial],
    backend: &mut dyn GenerationBackend,
    embedder: &Embedder,
    mut sinks: RunSinks<'_>,
) -> Result<RunOutcome, InductionError> {
    config.validate()?;
    let body = CheckpointBody::load(checkpoint)?;
    let system_text = config.system_text()?;
    if body.config_digest != config.digest(&system_text) {
        return Err(InductionError::ConfigMismatch);
    }
    if body.corpus_digest != corpus_digest(corpus) {
        return Err(InductionError::CorpusMismatch);
    }
    if sinks.checkpoint.is_none() {
        sinks.checkpoint = Some(checkpoint.to_path_buf());
    }
    drive(config, corpus, body, &system_text, backend, embedder, sinks)
}

fn drive(
    config: &RunConfig,
    corpus: &[Tutorial],
    mut state: CheckpointBody,
    system_text: &str,
    backend: &mut dyn GenerationBackend,
    embedder: &Embedder,
    mut sinks: RunSinks<'_>,
) -> Result<RunOutcome, InductionError> {
    let stream = sample_stream(config, corpus)?;
    if state.position > stream.len() {
        return Err(InductionError::CorruptCheckpoint("position beyond the sample".into()));
    }
    let save = |state: &CheckpointBody| -> Result<(), InductionError> {
        match &sinks.checkpoint {
            Some(p) => state.write(p),
            None => Ok(()),
        }
    };
    if let Some(dir) = &sinks.prompt_dir {
        fs::create_dir_all(dir)?;
    }
    let opts = config.prompt_options();

    while state.position < stream.len() {
        if sinks.stop_after.is_some_and(|n| state.position >= n) {
            break;
        }
        let tutorial = &stream[state.position];
        let step = state.pool.step_counter + 1;
        let prompt = build_prompt(config.variant, tutorial, &state.pool, embedder, system_text, &opts)?.render();
        if let Some(dir) = &sinks.prompt_dir {
            fs::write(dir.join(format!("step_{step:05}.txt")), &prompt)?;
        }
        let outcome = match generate_with_rejection(
            backend,
            &prompt,
            tutorial,
            config.max_attempts,
            &config.temperature_schedule,
        ) {
            Ok(o) => o,
            Err(source) => {
                save(&state)?;
                return Err(InductionError::Aborted { step, tutorial_id: tutorial.id.clone(), source });
            }
        };
        let record = match outcome {
            GenerationOutcome::Verified(v) => {
                let mut r = state.pool.register_program(step, tutorial, &v.program, &v.source_text);
                r.attempts = v.attempts_used;
                r
            }
            GenerationOutcome::Skipped { reasons, attempts } => {
                for r in &reasons {
                    log::debug!("{}: {r}", tutorial.id);
                }
                state.pool.register_skip(step, &tutorial.id, attempts)
            }
        };
        let line = StepLine {
            step: record.step,
            tutorial_id: &record.tutorial_id,
            attempts: record.attempts,
            unique: record.unique_apis_evoked,
            new: &record.new_apis,
            accepted: record.accepted,
        };
        let line = serde_json::to_string(&line).expect("step line serializes");
        log::info!("{line}");
        if let Some(w) = sinks.step_log.as_deref_mut() {
            writeln!(w, "{line}")?;
        }
        state.records.push(record);
        state.position += 1;
        if state.position % config.checkpoint_interval as usize == 0 {
            save(&state)?;
        }
    }
    save(&state)?;
    Ok(RunOutcome { pool: state.pool, records: state.records, position: state.position, sample_len: stream.len() })
}

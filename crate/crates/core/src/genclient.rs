//! Generation backends, cassettes, and the rejection-sampling wrapper.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentlang::{self, AgentProgram, Rejection};
use crate::corpus::Tutorial;
use crate::digest::sha256_hex;

pub const GEN_KEY_VAR: &str = "ACTIONSPACE_GEN_API_KEY";
pub const DEFAULT_SCHEDULE: [f64; 3] = [0.0, 0.3, 0.7];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("generation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no cassette record for prompt {digest} at temperature {temperature}")]
    CassetteMiss { digest: String, temperature: f64 },
    #[error("malformed cassette {path} line {line}: {reason}")]
    MalformedCassette { path: PathBuf, line: usize, reason: String },
    #[error("temperature schedule has {len} entries, need at least {max_attempts}")]
    ScheduleTooShort { len: usize, max_attempts: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait GenerationBackend {
    fn name(&self) -> &str;
    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError>;
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError> {
        (**self).generate(prompt, temperature)
    }
}

/// Returns canned completions in order, ignoring the prompt.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: VecDeque<String>,
    pub calls: usize,
}

impl ScriptedBackend {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(script: I) -> Self {
        Self { script: script.into_iter().map(Into::into).collect(), calls: 0 }
    }
}

impl GenerationBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&mut self, _prompt: &str, _temperature: f64) -> Result<String, GenError> {
        self.calls += 1;
        self.script.pop_front().ok_or_else(|| GenError::BackendUnavailable("script exhausted".into()))
    }
}

/// Wraps a closure over `(prompt, temperature)`.
pub struct FnBackend<F>(pub F);

impl<F: FnMut(&str, f64) -> Result<String, GenError>> GenerationBackend for FnBackend<F> {
    fn name(&self) -> &str {
        "function"
    }

    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError> {
        (self.0)(prompt, temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub prompt_digest: String,
    pub temperature: f64,
    pub completion: String,
}

pub fn read_cassette(path: impl AsRef<Path>) -> Result<Vec<CassetteRecord>, GenError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GenError::MalformedCassette {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Serves completions from a cassette. Each record is used once, matched
/// by prompt digest and temperature in file order.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    records: Vec<CassetteRecord>,
    used: Vec<bool>,
}

impl ReplayBackend {
    pub fn new(records: Vec<CassetteRecord>) -> Self {
        let used = vec![false; records.len()];
        Self { records, used }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GenError> {
        Ok(Self::new(read_cassette(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }
}

impl GenerationBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError> {
        let digest = sha256_hex(prompt);
        let hit = self
            .records
            .iter()
            .zip(&self.used)
            .position(|(r, used)| !used && r.prompt_digest == digest && r.temperature == temperature);
        match hit {
            Some(i) => {
                self.used[i] = true;
                Ok(self.records[i].completion.clone())
            }
            None => Err(GenError::CassetteMiss { digest, temperature }),
        }
    }
}

/// Passes through to `inner` and appends every exchange to a cassette.
pub struct RecordingBackend<B> {
    inner: B,
    file: File,
}

impl<B: GenerationBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl AsRef<Path>) -> Result<Self, GenError> {
        if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, file })
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: GenerationBackend> GenerationBackend for RecordingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError> {
        let completion = self.inner.generate(prompt, temperature)?;
        let rec = CassetteRecord { prompt_digest: sha256_hex(prompt), temperature, completion: completion.clone() };
        let mut line = serde_json::to_string(&rec).expect("record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(completion)
    }
}

/// An OpenAI-style chat-completions endpoint.
pub struct LiveBackend {
    pub endpoint: String,
    pub model: String,
    pub max_retries: u32,
    pub backoff: Duration,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LiveBackend {
    /// The credential is read from `ACTIONSPACE_GEN_API_KEY` when set.
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration, max_retries: u32) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            max_retries,
            backoff: Duration::from_secs(1),
            api_key: std::env::var(GEN_KEY_VAR).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }

    fn request(&self, prompt: &str, temperature: f64) -> Result<String, (bool, String)> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({
            "model": self.model,
            "temperature": temperature,
            "messages": [{ "role": "user", "content": prompt }],
        });
        match req.send_json(&body) {
            Ok(mut resp) => {
                let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| (false, e.to_string()))?;
                parsed.choices.into_iter().next().map(|c| c.message.content).ok_or((false, "no choices".into()))
            }
            Err(ureq::Error::StatusCode(code)) => Err((code == 429 || code >= 500, format!("HTTP {code}"))),
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl GenerationBackend for LiveBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn generate(&mut self, prompt: &str, temperature: f64) -> Result<String, GenError> {
        let mut attempt = 0;
        loop {
            match self.request(prompt, temperature) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    if !retryable || attempt >= self.max_retries {
                        return Err(GenError::BackendUnavailable(msg));
                    }
                    log::warn!("generation request failed ({msg}), retrying");
                    std::thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// The program part of a completion: whatever follows the first
/// `PROGRAM:` marker, or the whole text. When that part holds a fenced
/// block, only the block's content is kept.
pub fn extract_program_section(completion: &str) -> String {
    let body = match completion.find("PROGRAM:") {
        Some(i) => {
            let rest = &completion[i + "PROGRAM:".len()..];
            match rest.find('\n') {
                Some(nl) if rest[..nl].trim().is_empty() => &rest[nl + 1..],
                _ => rest.trim_start_matches([' ', '\t']),
            }
        }
        None => completion,
    };
    if !body.lines().any(is_fence) {
        return body.to_string();
    }
    body.lines().skip_while(|l| !is_fence(l)).skip(1).take_while(|l| !is_fence(l)).flat_map(|l| [l, "\n"]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedProgram {
    pub program: AgentProgram,
    pub source_text: String,
    pub attempts_used: u32,
}

impl VerifiedProgram {
    /// Runs both checks; only a passing text becomes a `VerifiedProgram`.
    pub fn new(source_text: String, tutorial: &Tutorial, attempts_used: u32) -> Result<Self, Rejection> {
        let program = agentlang::verify(&source_text, tutorial)?;
        Ok(Self { program, source_text, attempts_used })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GenerationOutcome {
    Verified(VerifiedProgram),
    Skipped { reasons: Vec<Rejection>, attempts: u32 },
}

impl GenerationOutcome {
    pub fn attempts(&self) -> u32 {
        match self {
            Self::Verified(v) => v.attempts_used,
            Self::Skipped { attempts, .. } => *attempts,
        }
    }
}

/// Samples until a completion verifies, using `schedule[i]` as the
/// temperature of attempt `i`.
pub fn generate_with_rejection(
    backend: &mut dyn GenerationBackend,
    prompt: &str,
    tutorial: &Tutorial,
    max_attempts: u32,
    schedule: &[f64],
) -> Result<GenerationOutcome, GenError> {
    if max_attempts == 0 || schedule.len() < max_attempts as usize {
        return Err(GenError::ScheduleTooShort { len: schedule.len(), max_attempts });
    }
    let mut reasons = Vec::new();
    for (i, &temperature) in schedule.iter().take(max_attempts as usize).enumerate() {
        let completion = backend.generate(prompt, temperature)?;
        match VerifiedProgram::new(extract_program_section(&completion), tutorial, i as u32 + 1) {
            Ok(v) => return Ok(GenerationOutcome::Verified(v)),
            Err(r) => {
                log::debug!("attempt {} for {} rejected: {r}", i + 1, tutorial.id);
                reasons.push(r);
            }
        }
    }
    Ok(GenerationOutcome::Skipped { reasons, attempts: max_attempts })
}

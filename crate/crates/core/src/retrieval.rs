//! Text embeddings and exact cosine retrieval over demos and use cases.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentlang::UseCase;
use crate::digest::sha256_hex;
use crate::pool::{DemoEntry, PoolState};

pub const LOCAL_DIMENSION: usize = 256;
pub const EMBED_KEY_VAR: &str = "ACTIONSPACE_EMBED_API_KEY";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("API `{0}` has no use cases")]
    NoUseCases(String),
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    /// Scales `raw` to unit length. Zero or non-finite input is rejected.
    pub fn normalized(mut raw: Vec<f64>) -> Result<Self, RetrievalError> {
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(RetrievalError::BackendUnavailable("non-finite embedding component".into()));
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RetrievalError::EmptyText);
        }
        raw.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(raw))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Unnormalized components for `text`.
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

/// Offline bag-of-tokens embedding: lowercase, split on anything that is
/// not alphanumeric, FNV-1a hash each token into one of `dim` buckets.
#[derive(Debug, Clone)]
pub struct LocalHashBackend {
    dim: usize,
}

impl Default for LocalHashBackend {
    fn default() -> Self {
        Self { dim: LOCAL_DIMENSION }
    }
}

impl LocalHashBackend {
    pub fn with_dimension(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

impl EmbeddingBackend for LocalHashBackend {
    fn name(&self) -> &str {
        "local"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            v[(fnv1a(tok.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        Ok(v)
    }
}

/// An OpenAI-style `/embeddings` endpoint.
pub struct HttpEmbeddingBackend {
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub max_retries: u32,
    pub backoff: Duration,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbeddingBackend {
    /// The credential is read from `ACTIONSPACE_EMBED_API_KEY` when set.
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(60))).build().into();
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            max_retries: 3,
            backoff: Duration::from_millis(500),
            api_key: std::env::var(EMBED_KEY_VAR).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }

    fn request(&self, text: &str) -> Result<Vec<f64>, (bool, String)> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        match req.send_json(&body) {
            Ok(mut resp) => {
                let parsed: EmbeddingResponse = resp.body_mut().read_json().map_err(|e| (false, e.to_string()))?;
                parsed.data.into_iter().next().map(|d| d.embedding).ok_or((false, "empty data".into()))
            }
            Err(ureq::Error::StatusCode(code)) => Err((code == 429 || code >= 500, format!("HTTP {code}"))),
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl EmbeddingBackend for HttpEmbeddingBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let mut attempt = 0;
        loop {
            match self.request(text) {
                Ok(v) if v.len() == self.dimension => return Ok(v),
                Ok(v) => return Err(RetrievalError::DimensionMismatch(self.dimension, v.len())),
                Err((retryable, msg)) => {
                    if !retryable || attempt >= self.max_retries {
                        return Err(RetrievalError::BackendUnavailable(msg));
                    }
                    log::warn!("embedding request failed ({msg}), retrying");
                    std::thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

/// A backend plus an in-memory cache keyed by text and an optional
/// on-disk cache keyed by content digest.
pub struct Embedder {
    backend: Box<dyn EmbeddingBackend>,
    memory: RwLock<HashMap<String, Arc<EmbeddingVector>>>,
    disk: Option<PathBuf>,
}

impl Embedder {
    pub fn new(backend: Box<dyn EmbeddingBackend>) -> Self {
        Self { backend, memory: RwLock::new(HashMap::new()), disk: None }
    }

    pub fn local() -> Self {
        Self::new(Box::new(LocalHashBackend::default()))
    }

    /// Cache files go to `<dir>/<backend name>/<digest>.json`.
    pub fn with_disk_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.disk = Some(dir.into());
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    fn disk_path(&self, digest: &str) -> Option<PathBuf> {
        let safe: String =
            self.backend.name().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        self.disk.as_ref().map(|d| d.join(safe).join(format!("{digest}.json")))
    }

    pub fn embed(&self, text: &str) -> Result<Arc<EmbeddingVector>, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        if let Some(v) = self.memory.read().unwrap().get(text) {
            return Ok(v.clone());
        }
        let disk = self.disk.as_ref().and_then(|_| self.disk_path(&sha256_hex(text)));
        let cached = disk
            .as_ref()
            .and_then(|p| fs::read(p).ok())
            .and_then(|b| serde_json::from_slice::<EmbeddingVector>(&b).ok())
            .filter(|v| v.dim() == self.backend.dimension());
        let v = match cached {
            Some(v) => v,
            None => {
                let v = EmbeddingVector::normalized(self.backend.embed_raw(text)?)?;
                if let Some(p) = &disk {
                    let write = p
                        .parent()
                        .map_or(Ok(()), fs::create_dir_all)
                        .and_then(|_| crate::pool::write_atomic(p, &serde_json::to_vec(&v).unwrap()));
                    if let Err(e) = write {
                        log::warn!("could not write embedding cache {}: {e}", p.display());
                    }
                }
                v
            }
        };
        let v = Arc::new(v);
        self.memory.write().unwrap().insert(text.to_string(), v.clone());
        Ok(v)
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, RetrievalError> {
        cosine(&*self.embed(a)?, &*self.embed(b)?)
    }
}

/// Sorts `(score, tiebreak, index)` descending by score, ascending by
/// tiebreak and then index, keeping only the first `k`.
fn best_k(mut scored: Vec<(f64, u32, usize)>, k: usize) -> Vec<(f64, u32, usize)> {
    let order = |a: &(f64, u32, usize), b: &(f64, u32, usize)| -> Ordering {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored
}

/// The `k` demos whose retrieval keys are closest to `query_text`, most
/// similar first. Ties go to the demo added earlier.
pub fn top_k_demos<'p>(
    embedder: &Embedder,
    pool: &'p PoolState,
    query_text: &str,
    k: usize,
    include_descriptions: bool,
) -> Result<Vec<&'p DemoEntry>, RetrievalError> {
    let q = embedder.embed(query_text)?;
    let mut scored = Vec::with_capacity(pool.demos.len());
    for (i, d) in pool.demos.iter().enumerate() {
        let s = cosine(&q, &*embedder.embed(&d.retrieval_key(include_descriptions))?)?;
        scored.push((s, d.step_added, i));
    }
    Ok(best_k(scored, k.max(1)).into_iter().map(|(_, _, i)| &pool.demos[i]).collect())
}

/// The use case of `api_name` whose leading comment is closest to
/// `query_text`. Ties go to the earliest source step.
pub fn top1_use_case<'p>(
    embedder: &Embedder,
    pool: &'p PoolState,
    api_name: &str,
    query_text: &str,
) -> Result<&'p UseCase, RetrievalError> {
    let cases = pool.apis.get(api_name).map(|e| e.use_cases.as_slice()).unwrap_or_default();
    if cases.is_empty() {
        return Err(RetrievalError::NoUseCases(api_name.to_string()));
    }
    let q = embedder.embed(query_text)?;
    let mut scored = Vec::with_capacity(cases.len());
    for (i, uc) in cases.iter().enumerate() {
        let s = cosine(&q, &*embedder.embed(&uc.leading_comment)?)?;
        scored.push((s, uc.source.step.unwrap_or(0), i));
    }
    Ok(&cases[best_k(scored, 1)[0].2])
}

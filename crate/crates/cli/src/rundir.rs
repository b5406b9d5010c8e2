//! `run` and `resume`: one output directory per run.
//!
//! Layout: `config.toml` (effective config), `inputs.json`,
//! `checkpoint.json`, `state.json`, `records.jsonl`, `steps.jsonl` and
//! optionally `prompts/`. A `.lock` file guards against a second writer.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use actionspace::corpus::load_corpus;
use actionspace::genclient::{GenerationBackend, RecordingBackend, ReplayBackend};
use actionspace::induction::{self, EmbeddingKind, RunSinks};
use actionspace::{PipelineVariant, PoolState, RunConfig, RunOutcome};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::{load_state, require_file};

const CONFIG: &str = "config.toml";
const INPUTS: &str = "inputs.json";
const CHECKPOINT: &str = "checkpoint.json";
const STATE: &str = "state.json";
const RECORDS: &str = "records.jsonl";
const STEPS: &str = "steps.jsonl";
const PROMPTS: &str = "prompts";
const LOCK: &str = ".lock";

#[derive(Args)]
pub struct BackendArgs {
    /// Replay completions from a cassette instead of calling the service
    #[arg(long, value_name = "PATH")]
    replay: Option<PathBuf>,
    /// Call the live service and append every completion to this cassette
    #[arg(long, value_name = "PATH", conflicts_with = "replay")]
    record: Option<PathBuf>,
    /// Process at most this many tutorials in total, then checkpoint and stop
    #[arg(long, value_name = "N")]
    stop_after: Option<usize>,
}

#[derive(Args)]
pub struct RunArgs {
    /// TOML run configuration [default: built-in defaults]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Validated corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Seed pool state written by `seed`
    #[arg(long)]
    seed_state: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Reuse a non-empty output directory, replacing earlier run files
    #[arg(long)]
    force: bool,
    /// Write each step's prompt under prompts/
    #[arg(long)]
    save_prompts: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    backend: BackendArgs,
}

/// Flags that take precedence over the config file.
#[derive(Args)]
pub struct Overrides {
    /// Pipeline variant: base, base+usecase or base+usecase+desc [default: base+usecase]
    #[arg(long)]
    variant: Option<PipelineVariant>,
    /// Demonstrations retrieved per prompt [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Generation attempts per tutorial [default: 3]
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Temperature of each attempt, comma separated [default: 0,0.3,0.7]
    #[arg(long, value_delimiter = ',')]
    temperature_schedule: Option<Vec<f64>>,
    /// Tutorials to sample from the corpus [default: all]
    #[arg(long)]
    sample: Option<usize>,
    /// Seed of the tutorial sample [default: 0]
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Put step descriptions into retrieval keys [default: only for base+usecase+desc]
    #[arg(long)]
    include_descriptions: bool,
    /// Embedding backend: local or http [default: local]
    #[arg(long)]
    embedding: Option<String>,
}

#[derive(Args)]
pub struct ResumeArgs {
    /// Output directory of the interrupted run
    #[arg(long)]
    out: PathBuf,
    /// Write each step's prompt under prompts/
    #[arg(long)]
    save_prompts: bool,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Serialize, Deserialize)]
struct Inputs {
    corpus: PathBuf,
    seed_state: PathBuf,
}

struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> CliResult<Self> {
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::runtime(
                "locked",
                format!("{} is in use by another process (remove {} if it is stale)", dir.display(), path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn effective_config(a: &RunArgs) -> CliResult<RunConfig> {
    let mut c = match &a.config {
        Some(p) => {
            require_file(p)?;
            let mut c = RunConfig::from_toml_str(&fs::read_to_string(p)?)?;
            let full = fs::canonicalize(p)?;
            let base = full.parent().unwrap_or(Path::new("."));
            c.system_prompt = c.system_prompt.map(|s| resolve(base, &s));
            c.embedding.cache_dir = c.embedding.cache_dir.map(|s| resolve(base, &s));
            c
        }
        None => RunConfig::default(),
    };
    let o = &a.overrides;
    if let Some(v) = o.variant {
        c.variant = v;
    }
    if let Some(k) = o.k {
        c.k = k;
    }
    if let Some(m) = o.max_attempts {
        c.max_attempts = m;
    }
    if let Some(t) = &o.temperature_schedule {
        c.temperature_schedule = t.clone();
    }
    if let Some(n) = o.sample {
        c.sample_size = Some(n);
    }
    if let Some(s) = o.sample_seed {
        c.seed = s;
    }
    if o.include_descriptions {
        c.retrieval_descriptions = Some(true);
    }
    if let Some(e) = &o.embedding {
        c.embedding.backend = match e.as_str() {
            "local" => EmbeddingKind::Local,
            "http" => EmbeddingKind::Http,
            other => return Err(CliError::usage(format!("unknown embedding backend {other:?} (expected local or http)"))),
        };
    }
    c.validate().map_err(|e| CliError::usage(e))?;
    Ok(c)
}

fn open_backend(b: &BackendArgs, config: &RunConfig) -> CliResult<Box<dyn GenerationBackend>> {
    Ok(match (&b.replay, &b.record) {
        (Some(p), _) => {
            require_file(p)?;
            Box::new(ReplayBackend::open(p)?)
        }
        (None, Some(p)) => Box::new(RecordingBackend::new(config.generation.live_backend(), p)?),
        (None, None) => Box::new(config.generation.live_backend()),
    })
}

fn write_outputs(dir: &Path, out: &RunOutcome) -> CliResult<()> {
    out.pool.persist(dir.join(STATE))?;
    let mut text = String::new();
    for r in &out.records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    fs::write(dir.join(RECORDS), text)?;
    let accepted = out.records.iter().filter(|r| r.accepted).count();
    println!("processed {}/{}", out.position, out.sample_len);
    println!("accepted {accepted}");
    println!("skipped {}", out.records.len() - accepted);
    println!("apis {}", out.pool.apis.len());
    println!("{}", if out.completed() { "complete" } else { "stopped; continue with `resume`" });
    Ok(())
}

fn step_log(dir: &Path) -> CliResult<File> {
    Ok(OpenOptions::new().create(true).append(true).open(dir.join(STEPS))?)
}

pub fn run(a: RunArgs) -> CliResult<()> {
    let config = effective_config(&a)?;
    require_file(&a.corpus)?;
    require_file(&a.seed_state)?;
    if a.out.exists() && fs::read_dir(&a.out)?.next().is_some() && !a.force {
        return Err(CliError::usage(format!("{} is not empty; pass --force to reuse it", a.out.display())));
    }
    fs::create_dir_all(&a.out)?;
    let _lock = RunLock::acquire(&a.out)?;
    for f in [CONFIG, INPUTS, CHECKPOINT, STATE, RECORDS, STEPS] {
        let _ = fs::remove_file(a.out.join(f));
    }
    let _ = fs::remove_dir_all(a.out.join(PROMPTS));

    fs::write(a.out.join(CONFIG), config.to_toml_string())?;
    let inputs = Inputs { corpus: fs::canonicalize(&a.corpus)?, seed_state: fs::canonicalize(&a.seed_state)? };
    fs::write(a.out.join(INPUTS), serde_json::to_string_pretty(&inputs).expect("inputs serialize") + "\n")?;

    let corpus = load_corpus(&a.corpus)?;
    let seed_pool: PoolState = load_state(&a.seed_state)?;
    let mut backend = open_backend(&a.backend, &config)?;
    let embedder = config.embedding.build();
    let mut log = step_log(&a.out)?;
    let sinks = RunSinks {
        checkpoint: Some(a.out.join(CHECKPOINT)),
        step_log: Some(&mut log),
        prompt_dir: a.save_prompts.then(|| a.out.join(PROMPTS)),
        stop_after: a.backend.stop_after,
    };
    let out = induction::run(&config, &corpus, seed_pool, &mut backend, &embedder, sinks)?;
    write_outputs(&a.out, &out)
}

pub fn resume(a: ResumeArgs) -> CliResult<()> {
    let config_path = a.out.join(CONFIG);
    require_file(&config_path)?;
    require_file(&a.out.join(CHECKPOINT))?;
    let _lock = RunLock::acquire(&a.out)?;
    let config = RunConfig::from_toml_str(&fs::read_to_string(&config_path)?)?;
    let inputs: Inputs = serde_json::from_str(&fs::read_to_string(a.out.join(INPUTS))?)
        .map_err(|e| CliError::runtime("checkpoint", format!("{INPUTS}: {e}")))?;
    require_file(&inputs.corpus)?;
    let corpus = load_corpus(&inputs.corpus)?;
    let mut backend = open_backend(&a.backend, &config)?;
    let embedder = config.embedding.build();
    let mut log = step_log(&a.out)?;
    let sinks = RunSinks {
        checkpoint: Some(a.out.join(CHECKPOINT)),
        step_log: Some(&mut log),
        prompt_dir: a.save_prompts.then(|| a.out.join(PROMPTS)),
        stop_after: a.backend.stop_after,
    };
    let out = induction::resume(&a.out.join(CHECKPOINT), &config, &corpus, &mut backend, &embedder, sinks)?;
    write_outputs(&a.out, &out)
}

//! `actionspace`: ingest tutorials, seed a pool, run induction and
//! analyze the results.
//!
//! Credentials are read from `ACTIONSPACE_GEN_API_KEY` and
//! `ACTIONSPACE_EMBED_API_KEY` only.

mod annotate;
mod error;
mod rundir;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actionspace::analytics::{self, ExportFormat, StatsOptions};
use actionspace::corpus::{load_corpus_filtered, write_corpus, CategoryFilter};
use actionspace::pool::seed_from_annotations;
use actionspace::{InductionRecord, PipelineVariant, PoolState};
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "actionspace", version, about = "Induce a primitive-action space from how-to tutorials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and filter a raw tutorial file into a corpus file
    Ingest(IngestArgs),
    /// Build the seed pool from annotated demonstration files
    Seed(SeedArgs),
    /// Run induction into a fresh output directory
    Run(rundir::RunArgs),
    /// Continue an interrupted run from its checkpoint
    Resume(rundir::ResumeArgs),
    /// Export pool-size curves, induction ratios and API frequencies
    Stats(StatsArgs),
    /// Score APIs or steps interactively, appending annotation records
    Annotate(annotate::AnnotateArgs),
    /// Aggregate annotation records into the human-evaluation table
    Report(ReportArgs),
    /// Compare the most frequent APIs against a simulator coverage mapping
    Compare(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Line-delimited tutorial records
    #[arg(long)]
    input: PathBuf,
    /// Where to write the validated corpus
    #[arg(long)]
    out: PathBuf,
    /// Keep tutorials whose category path starts with these components
    #[arg(long = "require-category", value_name = "NAME")]
    require_category: Vec<String>,
    /// Drop tutorials with this category anywhere in their path
    #[arg(long = "exclude-category", value_name = "NAME")]
    exclude_category: Vec<String>,
}

#[derive(Args)]
struct SeedArgs {
    /// Directory of annotated TASK/INSTRUCTIONS/PROGRAM files (*.txt)
    #[arg(long)]
    annotations: PathBuf,
    /// Where to write the seed pool state
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Pool state file
    #[arg(long)]
    state: PathBuf,
    /// Induction records [default: records.jsonl next to the state]
    #[arg(long)]
    records: Option<PathBuf>,
    /// Output directory [default: stats/ next to the state]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frequency thresholds for pool-size curves
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    thresholds: Vec<u64>,
    /// Look-ahead window of the induction-ratio moving average
    #[arg(long, default_value_t = analytics::DEFAULT_WINDOW)]
    window: usize,
    /// Rows of the API frequency table
    #[arg(long, default_value_t = analytics::DEFAULT_TOP_N)]
    top: usize,
    /// Export formats: csv, svg
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    format: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Annotation files (JSONL)
    #[arg(long, required = true)]
    annotations: Vec<PathBuf>,
    /// Induction records for one variant, as VARIANT=PATH
    #[arg(long, value_name = "VARIANT=PATH")]
    records: Vec<String>,
    /// Output format: text or csv
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Pool state file
    #[arg(long)]
    state: PathBuf,
    /// Two-column `api flag` coverage mapping
    #[arg(long)]
    mapping: PathBuf,
    /// Rows of the frequency table to compare
    #[arg(long, default_value_t = analytics::DEFAULT_TOP_N)]
    top: usize,
    /// Also write the per-API comparison as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::runtime("missing-input", format!("{} does not exist", p.display())))
    }
}

pub(crate) fn read_records(path: &Path) -> CliResult<Vec<InductionRecord>> {
    require_file(path)?;
    let mut out = Vec::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| {
            CliError::runtime("records", format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

pub(crate) fn load_state(path: &Path) -> CliResult<PoolState> {
    require_file(path)?;
    Ok(PoolState::load(path)?)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    require_file(&a.input)?;
    let filter = CategoryFilter { require_prefix: a.require_category, exclude: a.exclude_category };
    let corpus = load_corpus_filtered(&a.input, &filter)?;
    write_corpus(&a.out, &corpus)?;
    let steps: usize = corpus.iter().map(|t| t.steps.len()).sum();
    let described = corpus.iter().flat_map(|t| &t.steps).filter(|s| s.description.is_some()).count();
    println!("tutorials {}", corpus.len());
    println!("steps {steps}");
    println!("steps_with_descriptions {described}");
    Ok(())
}

fn seed(a: SeedArgs) -> CliResult<()> {
    if !a.annotations.is_dir() {
        return Err(CliError::runtime("missing-input", format!("{} is not a directory", a.annotations.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&a.annotations)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let pool = seed_from_annotations(&files)?;
    pool.persist(&a.out)?;
    println!("seeds {}", pool.demos.len());
    println!("apis {}", pool.apis.len());
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult<()> {
    let pool = load_state(&a.state)?;
    let records = read_records(&a.records.unwrap_or_else(|| sibling(&a.state, "records.jsonl")))?;
    let formats = a.format.iter().map(|f| f.parse::<ExportFormat>()).collect::<Result<Vec<_>, _>>()?;
    let out = a.out.unwrap_or_else(|| sibling(&a.state, "stats"));
    let opts = StatsOptions { thresholds: a.thresholds, window: a.window, top_n: a.top, formats };
    for p in analytics::write_stats(&out, &pool, &records, &opts)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    let mut ann = analytics::Annotations::default();
    for p in &a.annotations {
        require_file(p)?;
        let more = analytics::read_annotations(p)?;
        ann.redundancy.extend(more.redundancy);
        ann.faithfulness.extend(more.faithfulness);
        ann.rankings.extend(more.rankings);
    }
    let mut records = BTreeMap::new();
    for spec in &a.records {
        let (v, p) = spec.split_once('=').ok_or_else(|| CliError::usage(format!("--records expects VARIANT=PATH, got {spec:?}")))?;
        let v: PipelineVariant = v.parse().map_err(CliError::usage)?;
        records.insert(v, read_records(Path::new(p))?);
    }
    let table = analytics::human_eval_report(&ann, &records)?;
    let text = match a.format.as_str() {
        "text" => table.to_text(),
        "csv" => table.to_csv()?,
        other => return Err(CliError::usage(format!("unknown report format {other:?} (expected text or csv)"))),
    };
    match a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult<()> {
    let pool = load_state(&a.state)?;
    require_file(&a.mapping)?;
    let mapping = analytics::load_coverage_mapping(&a.mapping)?;
    let table = analytics::frequency_table(&pool, a.top);
    let cov = analytics::coverage_compare(&table, &mapping);
    if let Some(p) = a.csv {
        fs::write(p, analytics::coverage_csv(&cov)?)?;
    }
    println!("{}", cov.summary());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Seed(a) => seed(a),
        Command::Run(a) => rundir::run(a),
        Command::Resume(a) => rundir::resume(a),
        Command::Stats(a) => stats(a),
        Command::Annotate(a) => annotate::annotate(a),
        Command::Report(a) => report(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code)
        }
    }
}

//! Console scoring session. Each answer is appended to the output file
//! right away, and items already present there are skipped, so a session
//! can be stopped and picked up later.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use actionspace::analytics::{
    read_annotations, AnnotationRecord, Annotations, FaithfulnessAnnotation, RankingAnnotation, RedundancyAnnotation,
    RedundancyTag,
};
use actionspace::pool::DemoEntry;
use actionspace::{PipelineVariant, PoolState};
use clap::{Args, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::{load_state, read_records, sibling};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Score each newly induced API for redundancy
    Redundancy,
    /// Score each step's subprogram for faithfulness
    Faithfulness,
    /// Rank the programs of several variants for the same step
    Ranking,
}

#[derive(Args)]
pub struct AnnotateArgs {
    /// Induction records of the run being scored
    #[arg(long)]
    records: Option<PathBuf>,
    /// Pool state of that run [default: state.json next to the records]
    #[arg(long)]
    state: Option<PathBuf>,
    /// Variant that produced the run
    #[arg(long, default_value = "base+usecase")]
    variant: PipelineVariant,
    #[arg(long, value_enum, default_value = "redundancy")]
    task: Task,
    /// For ranking: one run per variant, as VARIANT=STATE
    #[arg(long = "compare", value_name = "VARIANT=STATE")]
    compare: Vec<String>,
    /// Annotation file to append to
    #[arg(long)]
    out: PathBuf,
    /// Name stored with every record
    #[arg(long)]
    annotator: Option<String>,
}

enum Answer<T> {
    Value(T),
    Skip,
    Quit,
}

struct Console<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> Console<R, W> {
    fn ask<T>(&mut self, prompt: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Answer<T>> {
        loop {
            write!(self.output, "{prompt}")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(Answer::Quit);
            }
            match line.trim() {
                "q" | "quit" => return Ok(Answer::Quit),
                "s" | "skip" => return Ok(Answer::Skip),
                t => match parse(t) {
                    Some(v) => return Ok(Answer::Value(v)),
                    None => writeln!(self.output, "  not understood, try again")?,
                },
            }
        }
    }
}

fn parse_score(s: &str) -> Option<f64> {
    match s {
        "0" => Some(0.0),
        "0.5" | ".5" => Some(0.5),
        "1" => Some(1.0),
        _ => None,
    }
}

fn parse_tags(s: &str) -> Option<BTreeSet<RedundancyTag>> {
    s.split([',', ' '])
        .filter(|t| !t.is_empty() && *t != "-")
        .map(|t| match t {
            "complex" | "c" => Some(RedundancyTag::Complex),
            "synonym" | "y" => Some(RedundancyTag::Synonym),
            _ => None,
        })
        .collect()
}

/// `a>b=c`: `>` separates tiers and `=` joins tied entries.
fn parse_ordering(s: &str, variants: &[PipelineVariant]) -> Option<Vec<Vec<PipelineVariant>>> {
    let mut seen = BTreeSet::new();
    let mut tiers = Vec::new();
    for tier in s.split('>') {
        let mut t = Vec::new();
        for label in tier.split('=') {
            let label = label.trim();
            let mut chars = label.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else { return None };
            let v = *variants.get((c as u32).checked_sub('a' as u32)? as usize)?;
            if !seen.insert(v) {
                return None;
            }
            t.push(v);
        }
        tiers.push(t);
    }
    (seen.len() == variants.len()).then_some(tiers)
}

/// Lines under each numbered step comment, keyed by step number.
fn step_blocks(program: &str) -> BTreeMap<u32, String> {
    let mut out: BTreeMap<u32, String> = BTreeMap::new();
    let mut current = None;
    for line in program.lines() {
        let t = line.trim_start();
        if let Some(n) = t.strip_prefix("# ").and_then(|r| r.split_once(". ")).and_then(|(n, _)| n.parse().ok()) {
            current = Some(n);
        } else if !line.starts_with(' ') {
            current = None;
        }
        if let Some(n) = current {
            let block = out.entry(n).or_default();
            block.push_str(line);
            block.push('\n');
        }
    }
    out
}

fn append(out: &Path, rec: &AnnotationRecord) -> CliResult<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(out)?;
    writeln!(f, "{}", serde_json::to_string(rec).expect("annotation serializes"))?;
    Ok(())
}

fn induced_demos(pool: &PoolState) -> impl Iterator<Item = &DemoEntry> {
    pool.demos.iter().filter(|d| d.step_added > 0)
}

pub fn annotate(a: AnnotateArgs) -> CliResult<()> {
    let stdin = io::stdin();
    let mut console = Console { input: stdin.lock(), output: io::stdout() };
    session(&a, &mut console)
}

fn session<R: BufRead, W: Write>(a: &AnnotateArgs, c: &mut Console<R, W>) -> CliResult<()> {
    let done = if a.out.exists() { read_annotations(&a.out)? } else { Annotations::default() };
    let who = a.annotator.clone();
    let state_path = || -> CliResult<PathBuf> {
        match (&a.state, &a.records) {
            (Some(s), _) => Ok(s.clone()),
            (None, Some(r)) => Ok(sibling(r, "state.json")),
            (None, None) => Err(CliError::usage("pass --records or --state")),
        }
    };
    let mut count = 0usize;
    match a.task {
        Task::Redundancy => {
            let records = read_records(a.records.as_deref().ok_or_else(|| CliError::usage("--records is required"))?)?;
            let pool = load_state(&state_path()?)?;
            let scored: BTreeSet<&str> =
                done.redundancy.iter().filter(|r| r.variant == a.variant && r.annotator == who).map(|r| r.api_name.as_str()).collect();
            let names: Vec<&String> = records.iter().flat_map(|r| &r.new_apis).filter(|n| !scored.contains(n.as_str())).collect();
            for name in names {
                writeln!(c.output, "\n== {name}")?;
                if let Some(e) = pool.apis.get(name) {
                    let params: Vec<&str> = e.signature.keyword_params.iter().map(String::as_str).collect();
                    writeln!(c.output, "parameters: {}", params.join(", "))?;
                    if let Some(u) = e.use_cases.first() {
                        writeln!(c.output, "{}", u.snippet)?;
                    }
                }
                let score = match c.ask("redundancy [0 / 0.5 / 1, s skip, q quit]: ", parse_score)? {
                    Answer::Value(v) => v,
                    Answer::Skip => continue,
                    Answer::Quit => break,
                };
                let tags = if score == 0.5 {
                    match c.ask("tags [complex, synonym, or - for none]: ", parse_tags)? {
                        Answer::Value(t) => t,
                        Answer::Skip => BTreeSet::new(),
                        Answer::Quit => break,
                    }
                } else {
                    BTreeSet::new()
                };
                let rec = RedundancyAnnotation { variant: a.variant, api_name: name.clone(), score, tags, annotator: who.clone() };
                append(&a.out, &AnnotationRecord::Redundancy(rec))?;
                count += 1;
            }
        }
        Task::Faithfulness => {
            let pool = load_state(&state_path()?)?;
            let scored: BTreeSet<(&str, u32)> = done
                .faithfulness
                .iter()
                .filter(|f| f.variant == a.variant && f.annotator == who)
                .map(|f| (f.tutorial_id.as_str(), f.step))
                .collect();
            'demos: for d in induced_demos(&pool) {
                let blocks = step_blocks(&d.program_text);
                for s in &d.tutorial.steps {
                    if scored.contains(&(d.tutorial_id.as_str(), s.index)) {
                        continue;
                    }
                    writeln!(c.output, "\n== {} / step {}: {}", d.tutorial.title, s.index, s.headline)?;
                    write!(c.output, "{}", blocks.get(&s.index).map_or("(no subprogram)\n", String::as_str))?;
                    let score = match c.ask("faithfulness [0 / 0.5 / 1, s skip, q quit]: ", parse_score)? {
                        Answer::Value(v) => v,
                        Answer::Skip => continue,
                        Answer::Quit => break 'demos,
                    };
                    let rec = FaithfulnessAnnotation {
                        variant: a.variant,
                        tutorial_id: d.tutorial_id.clone(),
                        step: s.index,
                        score,
                        annotator: who.clone(),
                    };
                    append(&a.out, &AnnotationRecord::Faithfulness(rec))?;
                    count += 1;
                }
            }
        }
        Task::Ranking => {
            let mut runs: Vec<(PipelineVariant, PoolState)> = Vec::new();
            for spec in &a.compare {
                let (v, p) = spec.split_once('=').ok_or_else(|| CliError::usage(format!("--compare expects VARIANT=STATE, got {spec:?}")))?;
                runs.push((v.parse().map_err(CliError::usage)?, load_state(Path::new(p))?));
            }
            if runs.len() < 2 {
                return Err(CliError::usage("ranking needs at least two --compare runs"));
            }
            let variants: Vec<PipelineVariant> = runs.iter().map(|r| r.0).collect();
            let scored: BTreeSet<(&str, u32)> = done
                .rankings
                .iter()
                .filter(|r| r.annotator == who)
                .map(|r| (r.tutorial_id.as_str(), r.step))
                .collect();
            let first = &runs[0].1;
            'demos: for d in induced_demos(first) {
                let others: Option<Vec<&DemoEntry>> =
                    runs.iter().map(|(_, p)| p.demos.iter().find(|x| x.tutorial_id == d.tutorial_id && x.step_added > 0)).collect();
                let Some(all) = others else { continue };
                let blocks: Vec<BTreeMap<u32, String>> = all.iter().map(|x| step_blocks(&x.program_text)).collect();
                for s in &d.tutorial.steps {
                    if scored.contains(&(d.tutorial_id.as_str(), s.index)) {
                        continue;
                    }
                    writeln!(c.output, "\n== {} / step {}: {}", d.tutorial.title, s.index, s.headline)?;
                    for (i, b) in blocks.iter().enumerate() {
                        writeln!(c.output, "-- {}", char::from(b'a' + i as u8))?;
                        write!(c.output, "{}", b.get(&s.index).map_or("(no subprogram)\n", String::as_str))?;
                    }
                    let ordering = match c.ask("ordering, best first [e.g. a>b=c, s skip, q quit]: ", |t| parse_ordering(t, &variants))? {
                        Answer::Value(o) => o,
                        Answer::Skip => continue,
                        Answer::Quit => break 'demos,
                    };
                    let rec = RankingAnnotation { tutorial_id: d.tutorial_id.clone(), step: s.index, ordering, annotator: who.clone() };
                    append(&a.out, &AnnotationRecord::Ranking(rec))?;
                    count += 1;
                }
            }
        }
    }
    writeln!(c.output, "\nrecorded {count}")?;
    Ok(())
}

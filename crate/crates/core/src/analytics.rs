//! Pool growth, induction ratios, frequency/coverage tables and the
//! human-evaluation report, with CSV and SVG export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentlang::{self, extract_calls, ParseError};
use crate::pool::{DemoEntry, InductionRecord, PoolState};
use crate::promptgen::PipelineVariant;

pub const DEFAULT_THRESHOLDS: [u64; 5] = [1, 2, 3, 5, 10];
pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_TOP_N: usize = 50;

pub const REPORT_COLUMNS: [&str; 7] = [
    "Induction Pipelines",
    "Redundancy Score",
    "-Complex",
    "-Complex -Synonym",
    "Faithfulness Score",
    "Ranking",
    "Avg. # APIs",
];

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("inconsistent ranking: {0}")]
    InconsistentRanking(String),
    #[error("duplicate annotation: {0}")]
    DuplicateAnnotation(String),
    #[error("unsupported export format {0:?} (expected csv or svg)")]
    UnsupportedFormat(String),
    #[error("{path} line {line}: {reason}")]
    MalformedInput { path: PathBuf, line: usize, reason: String },
    #[error("stored program does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pool size after each step, one series per threshold.
pub type Curves = BTreeMap<u64, Vec<(u32, usize)>>;

/// For each threshold `t` and step `s` in `0..=last step`, how many APIs
/// were called at least `t` times in demos added up to and including `s`.
/// Step 0 holds the seed demos.
pub fn pool_size_curve(records: &[InductionRecord], demos: &[DemoEntry], thresholds: &[u64]) -> Result<Curves, AnalyticsError> {
    let last = records.iter().map(|r| r.step).chain(demos.iter().map(|d| d.step_added)).max().unwrap_or(0);
    let mut calls_at: Vec<Vec<String>> = vec![Vec::new(); last as usize + 1];
    for d in demos {
        let p = agentlang::parse(&d.program_text)?;
        calls_at[d.step_added as usize].extend(extract_calls(&p).into_iter().map(|c| c.callee));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut sizes = vec![0usize; thresholds.len()];
    let mut out: Curves = thresholds.iter().map(|t| (*t, Vec::with_capacity(calls_at.len()))).collect();
    for (step, calls) in calls_at.iter().enumerate() {
        for c in calls {
            let n = counts.entry(c.as_str()).or_insert(0);
            *n += 1;
            for (i, t) in thresholds.iter().enumerate() {
                if *n == *t {
                    sizes[i] += 1;
                }
            }
        }
        for (i, t) in thresholds.iter().enumerate() {
            out.get_mut(t).unwrap().push((step as u32, sizes[i]));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    /// `(step, |new| / unique)` for steps that evoked at least one API.
    pub raw: Vec<(u32, f64)>,
    /// `(step, mean of raw ratios over steps [step, step + window - 1])`
    /// for steps whose window holds at least one raw ratio.
    pub moving: Vec<(u32, f64)>,
}

/// Per-step induction ratio and its look-ahead moving average.
pub fn induction_ratio_series(records: &[InductionRecord], window: usize) -> RatioSeries {
    let window = window.max(1) as u32;
    let raw: Vec<(u32, f64)> = records
        .iter()
        .filter(|r| r.unique_apis_evoked > 0)
        .map(|r| (r.step, r.new_apis.len() as f64 / r.unique_apis_evoked as f64))
        .collect();
    let mut prefix = Vec::with_capacity(raw.len() + 1);
    prefix.push(0.0);
    for (_, v) in &raw {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut moving = Vec::new();
    for r in records {
        let lo = raw.partition_point(|(s, _)| *s < r.step);
        let hi = raw.partition_point(|(s, _)| *s < r.step.saturating_add(window));
        if hi > lo {
            moving.push((r.step, (prefix[hi] - prefix[lo]) / (hi - lo) as f64));
        }
    }
    RatioSeries { raw, moving }
}

/// Every API in the pool by call count, most called first, ties by name.
pub fn frequency_table(pool: &PoolState, top_n: usize) -> Vec<(String, u64)> {
    let mut rows: Vec<(String, u64)> = pool.apis.iter().map(|(n, e)| (n.clone(), e.total_calls)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(top_n);
    rows
}

/// Reads `api flag` lines; `#` starts a comment. Flags are `1/0`,
/// `yes/no`, `true/false` or `covered/uncovered`.
pub fn parse_coverage_mapping(text: &str) -> Result<BTreeMap<String, bool>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(|c: char| c.is_whitespace() || c == ',' || c == '\t').filter(|s| !s.is_empty());
        let (Some(api), Some(flag), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `api flag`", i + 1));
        };
        let covered = match flag.to_ascii_lowercase().as_str() {
            "1" | "yes" | "y" | "true" | "covered" => true,
            "0" | "no" | "n" | "false" | "uncovered" => false,
            other => return Err(format!("line {}: unknown flag {other:?}", i + 1)),
        };
        out.insert(api.to_string(), covered);
    }
    Ok(out)
}

pub fn load_coverage_mapping(path: impl AsRef<Path>) -> Result<BTreeMap<String, bool>, AnalyticsError> {
    let path = path.as_ref();
    parse_coverage_mapping(&fs::read_to_string(path)?).map_err(|reason| AnalyticsError::MalformedInput {
        path: path.to_path_buf(),
        line: reason.split(':').next().and_then(|l| l.trim_start_matches("line ").parse().ok()).unwrap_or(0),
        reason,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: usize,
    pub total: usize,
    pub rows: Vec<(String, u64, bool)>,
}

impl CoverageReport {
    pub fn summary(&self) -> String {
        format!("covered {}/{}", self.covered, self.total)
    }
}

/// APIs missing from the mapping count as uncovered.
pub fn coverage_compare(table: &[(String, u64)], mapping: &BTreeMap<String, bool>) -> CoverageReport {
    let rows: Vec<(String, u64, bool)> =
        table.iter().map(|(n, c)| (n.clone(), *c, mapping.get(n).copied().unwrap_or(false))).collect();
    CoverageReport { covered: rows.iter().filter(|r| r.2).count(), total: rows.len(), rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RedundancyTag {
    Complex,
    Synonym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyAnnotation {
    pub variant: PipelineVariant,
    pub api_name: String,
    pub score: f64,
    #[serde(default)]
    pub tags: BTreeSet<RedundancyTag>,
    #[serde(default)]
    pub annotator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessAnnotation {
    pub variant: PipelineVariant,
    pub tutorial_id: String,
    pub step: u32,
    pub score: f64,
    #[serde(default)]
    pub annotator: Option<String>,
}

/// Variants from best to worst; variants sharing a tier are tied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingAnnotation {
    pub tutorial_id: String,
    pub step: u32,
    pub ordering: Vec<Vec<PipelineVariant>>,
    #[serde(default)]
    pub annotator: Option<String>,
}

impl RankingAnnotation {
    /// Tied variants share the mean of the positions they span.
    pub fn ranks(&self) -> BTreeMap<PipelineVariant, f64> {
        let mut out = BTreeMap::new();
        let mut taken = 0usize;
        for tier in &self.ordering {
            let first = taken + 1;
            let last = taken + tier.len();
            let rank = (first + last) as f64 / 2.0;
            for v in tier {
                out.insert(*v, rank);
            }
            taken = last;
        }
        out
    }

    fn variants(&self) -> Vec<PipelineVariant> {
        self.ordering.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnnotationRecord {
    Redundancy(RedundancyAnnotation),
    Faithfulness(FaithfulnessAnnotation),
    Ranking(RankingAnnotation),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotations {
    pub redundancy: Vec<RedundancyAnnotation>,
    pub faithfulness: Vec<FaithfulnessAnnotation>,
    pub rankings: Vec<RankingAnnotation>,
}

impl Annotations {
    pub fn push(&mut self, rec: AnnotationRecord) {
        match rec {
            AnnotationRecord::Redundancy(r) => self.redundancy.push(r),
            AnnotationRecord::Faithfulness(f) => self.faithfulness.push(f),
            AnnotationRecord::Ranking(r) => self.rankings.push(r),
        }
    }
}

/// Reads a JSONL annotation file; each line carries a `type` of
/// `redundancy`, `faithfulness` or `ranking`.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Annotations, AnalyticsError> {
    let path = path.as_ref();
    let mut out = Annotations::default();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| AnalyticsError::MalformedInput {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn check_score(score: f64, what: &str) -> Result<(), AnalyticsError> {
    if [0.0, 0.5, 1.0].contains(&score) {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidScore(format!("{what}: {score} is not one of 0, 0.5, 1")))
    }
}

pub fn validate_annotations(a: &Annotations) -> Result<(), AnalyticsError> {
    for r in &a.redundancy {
        check_score(r.score, &r.api_name)?;
        if !r.tags.is_empty() && r.score != 0.5 {
            return Err(AnalyticsError::InvalidScore(format!("{}: tags are only allowed on 0.5 scores", r.api_name)));
        }
    }
    let mut seen = BTreeSet::new();
    for f in &a.faithfulness {
        check_score(f.score, &format!("{} step {}", f.tutorial_id, f.step))?;
        if !seen.insert((f.tutorial_id.as_str(), f.step, f.variant, f.annotator.as_deref())) {
            return Err(AnalyticsError::DuplicateAnnotation(format!(
                "faithfulness for {} step {} ({})",
                f.tutorial_id, f.step, f.variant
            )));
        }
    }
    let mut expected: Option<BTreeSet<PipelineVariant>> = None;
    for r in &a.rankings {
        let where_ = format!("{} step {}", r.tutorial_id, r.step);
        if r.ordering.iter().any(Vec::is_empty) {
            return Err(AnalyticsError::InconsistentRanking(format!("{where_}: empty tier")));
        }
        let vs = r.variants();
        let set: BTreeSet<_> = vs.iter().copied().collect();
        if set.len() != vs.len() {
            return Err(AnalyticsError::InconsistentRanking(format!("{where_}: a variant is ranked twice")));
        }
        match &expected {
            None => expected = Some(set),
            Some(e) if *e != set => {
                return Err(AnalyticsError::InconsistentRanking(format!("{where_}: ranks a different set of variants")))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: PipelineVariant,
    pub redundancy: Option<f64>,
    pub minus_complex: Option<f64>,
    pub minus_complex_synonym: Option<f64>,
    pub faithfulness: Option<f64>,
    pub ranking: Option<f64>,
    pub avg_new_apis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates annotations per variant.
///
/// Redundancy is a flat mean over annotated APIs, scaled by 100. The
/// `-Complex` column rescores 0.5 entries tagged `complex` to 0, and
/// `-Complex -Synonym` does the same for `synonym`. Ranking is the mean
/// rank over annotated (tutorial, step) pairs. Avg. # APIs is new APIs per
/// processed tutorial from each variant's records.
pub fn human_eval_report(
    annotations: &Annotations,
    records: &BTreeMap<PipelineVariant, Vec<InductionRecord>>,
) -> Result<Report, AnalyticsError> {
    validate_annotations(annotations)?;
    let mut variants: BTreeSet<PipelineVariant> = records.keys().copied().collect();
    variants.extend(annotations.redundancy.iter().map(|r| r.variant));
    variants.extend(annotations.faithfulness.iter().map(|f| f.variant));
    variants.extend(annotations.rankings.iter().flat_map(|r| r.variants()));

    let rescore = |r: &RedundancyAnnotation, drop: &[RedundancyTag]| -> f64 {
        if r.score == 0.5 && r.tags.iter().any(|t| drop.contains(t)) {
            0.0
        } else {
            r.score
        }
    };
    let ranks: Vec<BTreeMap<PipelineVariant, f64>> = annotations.rankings.iter().map(RankingAnnotation::ranks).collect();

    let rows = variants
        .into_iter()
        .map(|v| {
            let red: Vec<&RedundancyAnnotation> = annotations.redundancy.iter().filter(|r| r.variant == v).collect();
            ReportRow {
                variant: v,
                redundancy: mean(red.iter().map(|r| r.score)).map(|m| 100.0 * m),
                minus_complex: mean(red.iter().map(|r| rescore(r, &[RedundancyTag::Complex]))).map(|m| 100.0 * m),
                minus_complex_synonym: mean(red.iter().map(|r| rescore(r, &[RedundancyTag::Complex, RedundancyTag::Synonym])))
                    .map(|m| 100.0 * m),
                faithfulness: mean(annotations.faithfulness.iter().filter(|f| f.variant == v).map(|f| f.score))
                    .map(|m| 100.0 * m),
                ranking: mean(ranks.iter().filter_map(|r| r.get(&v).copied())),
                avg_new_apis: records
                    .get(&v)
                    .filter(|r| !r.is_empty())
                    .map(|r| r.iter().map(|x| x.new_apis.len()).sum::<usize>() as f64 / r.len() as f64),
            }
        })
        .collect();
    Ok(Report { rows })
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.decimals$}"))
}

impl Report {
    fn cells(&self) -> Vec<[String; 7]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.variant.label().to_string(),
                    cell(r.redundancy, 2),
                    cell(r.minus_complex, 2),
                    cell(r.minus_complex_synonym, 2),
                    cell(r.faithfulness, 1),
                    cell(r.ranking, 3),
                    cell(r.avg_new_apis, 2),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, AnalyticsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for row in self.cells() {
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }

    /// A fixed-width text table.
    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let widths: Vec<usize> = (0..7)
            .map(|i| cells.iter().map(|r| r[i].len()).chain([REPORT_COLUMNS[i].len()]).max().unwrap())
            .collect();
        let line = |row: &[&str]| -> String {
            let mut s: String =
                row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join(" | ");
            s.truncate(s.trim_end().len());
            s.push('\n');
            s
        };
        let mut out = line(&REPORT_COLUMNS);
        out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>()));
        for r in &cells {
            out.push_str(&line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, AnalyticsError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            _ => Err(AnalyticsError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Svg => "svg",
        }
    }
}

fn csv_string<R: AsRef<[u8]>>(header: &[&str], rows: impl IntoIterator<Item = Vec<R>>) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub fn curve_csv(series: &[(u32, usize)]) -> Result<String, AnalyticsError> {
    csv_string(&["step", "pool_size"], series.iter().map(|(s, n)| vec![s.to_string(), n.to_string()]))
}

pub fn ratio_csv(series: &RatioSeries) -> Result<String, AnalyticsError> {
    let raw: BTreeMap<u32, f64> = series.raw.iter().copied().collect();
    csv_string(
        &["step", "ratio", "moving_average"],
        series.moving.iter().map(|(s, m)| vec![s.to_string(), raw.get(s).map_or(String::new(), |r| r.to_string()), m.to_string()]),
    )
}

pub fn frequency_csv(table: &[(String, u64)]) -> Result<String, AnalyticsError> {
    csv_string(
        &["rank", "api", "total_calls"],
        table.iter().enumerate().map(|(i, (n, c))| vec![(i + 1).to_string(), n.clone(), c.to_string()]),
    )
}

pub fn coverage_csv(report: &CoverageReport) -> Result<String, AnalyticsError> {
    csv_string(
        &["api", "total_calls", "covered"],
        report.rows.iter().map(|(n, c, cov)| vec![n.clone(), c.to_string(), u8::from(*cov).to_string()]),
    )
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 360.0;
const MARGIN: f64 = 40.0;
/// Horizontal length of one decade on frequency bars.
pub const BAR_UNIT: f64 = 120.0;
const BAR_H: f64 = 12.0;

fn svg_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per series with a circle on every point.
pub fn curves_svg(curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = curves.iter().flat_map(|(_, s)| s.iter());
    let (mut xmax, mut ymax) = (1.0f64, 1.0f64);
    for (x, y) in pts {
        xmax = xmax.max(*x);
        ymax = ymax.max(*y);
    }
    let sx = |x: f64| MARGIN + x / xmax * (SVG_W - 2.0 * MARGIN);
    let sy = |y: f64| SVG_H - MARGIN - y / ymax * (SVG_H - 2.0 * MARGIN);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    );
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        SVG_H - MARGIN,
        SVG_W - MARGIN
    );
    let _ = writeln!(out, "<line class=\"axis\" x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>", SVG_H - MARGIN);
    for (name, series) in curves {
        let _ = writeln!(out, "<g class=\"series\" data-name=\"{}\">", svg_escape(name));
        let path: Vec<String> = series.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>", path.join(" "));
        for (x, y) in series {
            let _ = writeln!(out, "<circle class=\"mark\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\"/>", sx(*x), sy(*y));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars whose length is `BAR_UNIT * log10(count)`.
pub fn frequency_svg(table: &[(String, u64)]) -> String {
    let label_w = 160.0;
    let h = MARGIN * 2.0 + BAR_H * 1.5 * table.len() as f64;
    let mut out = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{h}\" viewBox=\"0 0 {SVG_W} {h}\">\n");
    for (i, (name, count)) in table.iter().enumerate() {
        let y = MARGIN + BAR_H * 1.5 * i as f64;
        let len = BAR_UNIT * (*count.max(&1) as f64).log10();
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"10\">{}</text>",
            label_w - 4.0,
            y + BAR_H - 2.0,
            svg_escape(name)
        );
        let _ = writeln!(
            out,
            "<rect class=\"bar\" data-api=\"{}\" data-count=\"{count}\" x=\"{label_w:.2}\" y=\"{y:.2}\" width=\"{len:.6}\" height=\"{BAR_H}\"/>",
            svg_escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Inputs for [`write_stats`].
#[derive(Debug, Clone)]
pub struct StatsOptions {
    pub thresholds: Vec<u64>,
    pub window: usize,
    pub top_n: usize,
    pub formats: Vec<ExportFormat>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            window: DEFAULT_WINDOW,
            top_n: DEFAULT_TOP_N,
            formats: vec![ExportFormat::Csv],
        }
    }
}

/// Writes `pool_size_t<t>`, `induction_ratio` and `frequency_top<n>` files
/// into `dir` and returns their paths in write order.
pub fn write_stats(
    dir: &Path,
    pool: &PoolState,
    records: &[InductionRecord],
    opts: &StatsOptions,
) -> Result<Vec<PathBuf>, AnalyticsError> {
    fs::create_dir_all(dir)?;
    let curves = pool_size_curve(records, &pool.demos, &opts.thresholds)?;
    let ratio = induction_ratio_series(records, opts.window);
    let table = frequency_table(pool, opts.top_n);
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<(), AnalyticsError> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    for fmt in &opts.formats {
        match fmt {
            ExportFormat::Csv => {
                for (t, s) in &curves {
                    put(format!("pool_size_t{t}.csv"), curve_csv(s)?)?;
                }
                put("induction_ratio.csv".into(), ratio_csv(&ratio)?)?;
                put(format!("frequency_top{}.csv", opts.top_n), frequency_csv(&table)?)?;
            }
            ExportFormat::Svg => {
                let lines: Vec<(String, Vec<(f64, f64)>)> = curves
                    .iter()
                    .map(|(t, s)| (format!("t={t}"), s.iter().map(|(x, y)| (*x as f64, *y as f64)).collect()))
                    .collect();
                put("pool_size.svg".into(), curves_svg(&lines))?;
                let ratio_line = vec![("moving average".to_string(), ratio.moving.iter().map(|(s, v)| (*s as f64, *v)).collect())];
                put("induction_ratio.svg".into(), curves_svg(&ratio_line))?;
                put(format!("frequency_top{}.svg", opts.top_n), frequency_svg(&table))?;
            }
        }
    }
    Ok(written)
}

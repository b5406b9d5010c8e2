//! Tutorial corpora: line-delimited records of a goal plus numbered steps.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"melt-chocolate","title":"How to Melt Chocolate in Microwave",
//!  "category":["Home and Garden","Cooking"],
//!  "steps":[{"index":1,"headline":"Chop the chocolate.","description":"..."}]}
//! ```
//!
//! Blank lines are ignored.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate tutorial id {id:?} at line {line}")]
    DuplicateTutorialId { id: String, line: usize },
    #[error("cannot draw {requested} tutorials from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("malformed demonstration: {0}")]
    MalformedDemo(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionStep {
    pub index: u32,
    pub headline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tutorial {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub category: Vec<String>,
    pub steps: Vec<InstructionStep>,
}

impl Tutorial {
    /// Checks the record invariants: non-empty title and headlines, steps
    /// numbered exactly `1..=n` in order.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.title.trim().is_empty() {
            return Err("empty title".into());
        }
        for (pos, step) in self.steps.iter().enumerate() {
            let expected = pos as u32 + 1;
            if step.index != expected {
                return Err(format!(
                    "step indices must be 1..n without gaps: expected {expected}, found {}",
                    step.index
                ));
            }
            if step.headline.trim().is_empty() {
                return Err(format!("step {} has an empty headline", step.index));
            }
        }
        Ok(())
    }

    pub fn step_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.steps.iter().map(|s| s.index)
    }
}

/// Load-time category predicate.
///
/// A tutorial is kept when its category path starts with `require_prefix`
/// (if set) and none of its path components is listed in `exclude`
/// (case-insensitive).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CategoryFilter {
    #[serde(default)]
    pub require_prefix: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl CategoryFilter {
    pub fn accepts(&self, t: &Tutorial) -> bool {
        if self.require_prefix.len() > t.category.len() {
            return false;
        }
        let prefix_ok = self
            .require_prefix
            .iter()
            .zip(&t.category)
            .all(|(want, have)| want.eq_ignore_ascii_case(have));
        prefix_ok
            && !t
                .category
                .iter()
                .any(|c| self.exclude.iter().any(|x| x.eq_ignore_ascii_case(c)))
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Tutorial>, CorpusError> {
    load_corpus_filtered(path, &CategoryFilter::default())
}

pub fn load_corpus_filtered(
    path: impl AsRef<Path>,
    filter: &CategoryFilter,
) -> Result<Vec<Tutorial>, CorpusError> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), filter)
}

/// Streams records from any reader. Validation failures report the
/// 1-based physical line number.
pub fn read_corpus(
    reader: impl BufRead,
    filter: &CategoryFilter,
) -> Result<Vec<Tutorial>, CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Tutorial =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        t.validate()
            .map_err(|reason| CorpusError::MalformedRecord { line: line_no, reason })?;
        if !seen.insert(t.id.clone()) {
            return Err(CorpusError::DuplicateTutorialId { id: t.id, line: line_no });
        }
        if filter.accepts(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Writes tutorials back out in the line-delimited record format.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Tutorial]) -> Result<(), CorpusError> {
    let mut text = String::new();
    for t in corpus {
        text.push_str(&serde_json::to_string(t).expect("tutorial serializes"));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Draws `n` distinct tutorials without replacement. The output order is a
/// pure function of `(corpus, n, seed)`, and a smaller sample under the
/// same seed is a prefix of a larger one.
pub fn sample_tutorials(
    corpus: &[Tutorial],
    n: usize,
    seed: u64,
) -> Result<Vec<Tutorial>, CorpusError> {
    if n > corpus.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: corpus.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    Ok(order[..n].iter().map(|&i| corpus[i].clone()).collect())
}

/// Stable digest over the content of a tutorial sequence.
pub fn corpus_digest(corpus: &[Tutorial]) -> String {
    let mut text = String::new();
    for t in corpus {
        text.push_str(&serde_json::to_string(t).expect("tutorial serializes"));
        text.push('\n');
    }
    sha256_hex(text)
}

// Rendered steps must stay on one line each.
fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `"<index>. <headline>[ <description>]"` for every step, one per line.
pub fn render_steps(t: &Tutorial, include_descriptions: bool) -> String {
    let mut out = String::new();
    for step in &t.steps {
        out.push_str(&format!("{}. {}", step.index, one_line(&step.headline)));
        if include_descriptions {
            if let Some(desc) = step.description.as_deref() {
                let desc = one_line(desc);
                if !desc.is_empty() {
                    out.push(' ');
                    out.push_str(&desc);
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_instructions(t: &Tutorial, include_descriptions: bool) -> String {
    format!(
        "TASK:\n{}\nINSTRUCTIONS:\n{}",
        one_line(&t.title),
        render_steps(t, include_descriptions)
    )
}

/// Title followed by the rendered steps; used as the retrieval key for
/// demonstrations and as the query for a target tutorial.
pub fn retrieval_text(t: &Tutorial, include_descriptions: bool) -> String {
    format!("{}\n{}", one_line(&t.title), render_steps(t, include_descriptions))
}

/// A `TASK:` / `INSTRUCTIONS:` / `PROGRAM:` demonstration file.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBlock {
    pub title: String,
    pub steps: Vec<InstructionStep>,
    pub program_text: String,
}

impl DemoBlock {
    pub fn into_tutorial(self, id: impl Into<String>) -> (Tutorial, String) {
        let t = Tutorial { id: id.into(), title: self.title, category: Vec::new(), steps: self.steps };
        (t, self.program_text)
    }
}

pub fn parse_demo_block(text: &str) -> Result<DemoBlock, CorpusError> {
    let bad = |m: &str| CorpusError::MalformedDemo(m.to_string());
    let mut lines = text.lines();
    let mut title = String::new();
    let mut steps = Vec::new();

    loop {
        match lines.next() {
            None => return Err(bad("missing TASK: section")),
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => {
                let rest = l.trim().strip_prefix("TASK:").ok_or_else(|| bad("expected TASK:"))?;
                title.push_str(rest.trim());
                break;
            }
        }
    }
    loop {
        let l = lines.next().ok_or_else(|| bad("missing INSTRUCTIONS: section"))?;
        let t = l.trim();
        if t == "INSTRUCTIONS:" {
            break;
        }
        if !t.is_empty() {
            if !title.is_empty() {
                title.push(' ');
            }
            title.push_str(t);
        }
    }
    if title.is_empty() {
        return Err(bad("empty task title"));
    }
    let program_text = loop {
        let l = lines.next().ok_or_else(|| bad("missing PROGRAM: section"))?;
        let t = l.trim();
        if let Some(rest) = t.strip_prefix("PROGRAM:") {
            let mut program: Vec<&str> = Vec::new();
            if !rest.trim().is_empty() {
                program.push(rest.trim());
            }
            program.extend(lines.by_ref());
            let mut p = program.join("\n");
            p.push('\n');
            break p;
        }
        if t.is_empty() {
            continue;
        }
        let (num, headline) = t
            .split_once('.')
            .ok_or_else(|| bad(&format!("instruction line without number: {t:?}")))?;
        let index: u32 = num
            .trim()
            .parse()
            .map_err(|_| bad(&format!("instruction line without number: {t:?}")))?;
        steps.push(InstructionStep {
            index,
            headline: headline.trim().to_string(),
            description: None,
        });
    };
    let block = DemoBlock { title, steps, program_text };
    Tutorial { id: "demo".into(), title: block.title.clone(), category: vec![], steps: block.steps.clone() }
        .validate()
        .map_err(|e| bad(&e))?;
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: u32, headline: &str, description: Option<&str>) -> InstructionStep {
        InstructionStep {
            index,
            headline: headline.into(),
            description: description.map(Into::into),
        }
    }

    fn chocolate() -> Tutorial {
        Tutorial {
            id: "melt-chocolate".into(),
            title: "How to Melt Chocolate in Microwave".into(),
            category: vec!["Home and Garden".into()],
            steps: vec![
                step(1, "Chop the chocolate into small pieces with a serrated knife.", None),
                step(2, "Place the chocolate into a microwave-safe bowl.", Some("")),
            ],
        }
    }

    fn corpus_of(n: usize) -> Vec<Tutorial> {
        (0..n)
            .map(|i| Tutorial {
                id: format!("t{i}"),
                title: format!("How to do thing {i}"),
                category: vec![],
                steps: vec![step(1, "Do it.", None)],
            })
            .collect()
    }

    #[test]
    fn loads_one_record() {
        let line = serde_json::to_string(&chocolate()).unwrap();
        let got = read_corpus(line.as_bytes(), &CategoryFilter::default()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].title, "How to Melt Chocolate in Microwave");
        assert_eq!(got[0].step_indices().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let got = read_corpus(&b""[..], &CategoryFilter::default()).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn step_gap_is_malformed() {
        let text = r#"{"id":"a","title":"T","steps":[{"index":1,"headline":"x"},{"index":3,"headline":"y"}]}"#;
        let err = read_corpus(text.as_bytes(), &CategoryFilter::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 1, .. }), "{err}");
    }

    #[test]
    fn bad_json_reports_line() {
        let good = serde_json::to_string(&chocolate()).unwrap();
        let text = format!("{good}\n\n{{not json\n");
        let err = read_corpus(text.as_bytes(), &CategoryFilter::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let good = serde_json::to_string(&chocolate()).unwrap();
        let text = format!("{good}\n{good}\n");
        let err = read_corpus(text.as_bytes(), &CategoryFilter::default()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateTutorialId { line: 2, .. }));
    }

    #[test]
    fn category_filter() {
        let mut t = chocolate();
        t.category = vec!["Home and Garden".into(), "Cooking".into()];
        let keep = CategoryFilter { require_prefix: vec!["home and garden".into()], exclude: vec![] };
        assert!(keep.accepts(&t));
        let drop = CategoryFilter { require_prefix: vec![], exclude: vec!["Cooking".into()] };
        assert!(!drop.accepts(&t));
        let other = CategoryFilter { require_prefix: vec!["Youth".into()], exclude: vec![] };
        assert!(!other.accepts(&t));
    }

    #[test]
    fn exhaustive_sample_is_permutation() {
        let corpus = corpus_of(5);
        let got = sample_tutorials(&corpus, 5, 7).unwrap();
        let mut ids: Vec<_> = got.iter().map(|t| t.id.clone()).collect();
        ids.sort();
        assert_eq!(ids, vec!["t0", "t1", "t2", "t3", "t4"]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let corpus = corpus_of(1000);
        let a = sample_tutorials(&corpus, 50, 1).unwrap();
        let b = sample_tutorials(&corpus, 50, 1).unwrap();
        assert_eq!(a, b);
        let c = sample_tutorials(&corpus, 50, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn oversample_fails() {
        let err = sample_tutorials(&corpus_of(3), 4, 0).unwrap_err();
        assert!(matches!(err, CorpusError::SampleTooLarge { requested: 4, available: 3 }));
    }

    #[test]
    fn render_without_descriptions() {
        let text = render_instructions(&chocolate(), false);
        assert!(text.starts_with("TASK:\nHow to Melt Chocolate in Microwave\nINSTRUCTIONS:\n"));
        assert!(text.contains("\n1. Chop the chocolate into small pieces with a serrated knife.\n"));
        assert!(text.contains("\n2. Place the chocolate into a microwave-safe bowl.\n"));
    }

    #[test]
    fn empty_description_renders_like_flag_off() {
        let t = chocolate();
        assert_eq!(render_instructions(&t, true), render_instructions(&t, false));
    }

    #[test]
    fn description_appended_on_same_line() {
        let t = Tutorial {
            id: "cocoa".into(),
            title: "How to Make Hot Cocoa".into(),
            category: vec![],
            steps: vec![step(
                1,
                "Combine the sugar, cocoa powder, and salt in a saucepan.",
                Some("Pour the sugar into a small saucepan. Add the unsweetened cocoa powder and a dash of salt.\nStir everything together with a whisk."),
            )],
        };
        let text = render_instructions(&t, true);
        let line = text.lines().find(|l| l.starts_with("1. ")).unwrap();
        assert!(line.contains("saucepan. Pour the sugar"));
        assert!(line.ends_with("Stir everything together with a whisk."));
    }

    #[test]
    fn demo_block_parses() {
        let text = "TASK: \nHow to Melt Chocolate in Microwave\nINSTRUCTIONS:\n1. Chop the chocolate.\n2. Place the chocolate.\nPROGRAM:\ndef robot_program():\n    find(obj=chocolate_0)\n";
        let block = parse_demo_block(text).unwrap();
        assert_eq!(block.title, "How to Melt Chocolate in Microwave");
        assert_eq!(block.steps.len(), 2);
        assert_eq!(block.program_text, "def robot_program():\n    find(obj=chocolate_0)\n");
    }

    #[test]
    fn demo_block_requires_sections() {
        assert!(parse_demo_block("TASK:\nx\nPROGRAM:\n").is_err());
        assert!(parse_demo_block("").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_tutorial() -> impl Strategy<Value = Tutorial> {
            (
                "[A-Za-z ]{1,20}",
                prop::collection::vec(("[A-Za-z][A-Za-z ,.]{0,30}", prop::option::of("[A-Za-z \n.]{0,40}")), 1..12),
            )
                .prop_map(|(title, steps)| Tutorial {
                    id: "p".into(),
                    title: format!("How to {title}"),
                    category: vec![],
                    steps: steps
                        .into_iter()
                        .enumerate()
                        .map(|(i, (h, d))| step(i as u32 + 1, &h, d.as_deref()))
                        .collect(),
                })
        }

        proptest! {
            #[test]
            fn rendered_steps_rescan(t in arb_tutorial(), desc in any::<bool>()) {
                let text = render_instructions(&t, desc);
                let body = text.split_once("INSTRUCTIONS:\n").unwrap().1;
                let indices: Vec<u32> = body
                    .lines()
                    .map(|l| l.split_once(". ").unwrap().0.parse().unwrap())
                    .collect();
                let expected: Vec<u32> = t.step_indices().collect();
                prop_assert_eq!(indices, expected);
            }

            #[test]
            fn sample_is_distinct_subset(n in 0usize..40, seed in any::<u64>()) {
                let corpus = corpus_of(40);
                let got = sample_tutorials(&corpus, n, seed).unwrap();
                prop_assert_eq!(got.len(), n);
                let ids: HashSet<_> = got.iter().map(|t| t.id.clone()).collect();
                prop_assert_eq!(ids.len(), n);
                prop_assert!(got.iter().all(|t| corpus.contains(t)));
            }

            #[test]
            fn smaller_sample_is_prefix(n in 0usize..40, m in 0usize..40, seed in any::<u64>()) {
                let corpus = corpus_of(40);
                let (lo, hi) = (n.min(m), n.max(m));
                let small = sample_tutorials(&corpus, lo, seed).unwrap();
                let large = sample_tutorials(&corpus, hi, seed).unwrap();
                prop_assert_eq!(&small[..], &large[..lo]);
            }
        }
    }
}

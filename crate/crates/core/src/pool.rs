//! The growing store of APIs, use cases and full-program demonstrations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentlang::{self, extract_calls, use_cases_lenient, AgentProgram, ParseError, UseCase};
use crate::corpus::{parse_demo_block, retrieval_text, CorpusError, Tutorial};
use crate::digest::sha256_hex;
use crate::worldmodel::{base_registry, ApiSignature, Provenance};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("seed {file}: {error}")]
    SeedParseFailure { file: PathBuf, error: ParseError },
    #[error("seed {file}: missing step comments for steps {missing:?}")]
    SeedCoverageFailure { file: PathBuf, missing: Vec<u32> },
    #[error("seed {file}: {error}")]
    SeedFormat { file: PathBuf, error: CorpusError },
    #[error("corrupt pool state: {0}")]
    CorruptState(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEntry {
    pub signature: ApiSignature,
    pub total_calls: u64,
    pub calls_by_step: BTreeMap<u32, u64>,
    pub use_cases: Vec<UseCase>,
    pub first_seen_step: u32,
}

impl ApiEntry {
    fn new(signature: ApiSignature, step: u32) -> Self {
        Self { signature, total_calls: 0, calls_by_step: BTreeMap::new(), use_cases: Vec::new(), first_seen_step: step }
    }

    fn count(&mut self, step: u32) {
        self.total_calls += 1;
        *self.calls_by_step.entry(step).or_default() += 1;
    }

    fn add_use_case(&mut self, uc: UseCase) {
        if !self.use_cases.iter().any(|u| u.snippet == uc.snippet) {
            self.use_cases.push(uc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoEntry {
    pub tutorial_id: String,
    pub tutorial: Tutorial,
    pub program_text: String,
    pub step_added: u32,
}

impl DemoEntry {
    /// Title followed by the numbered steps, with or without descriptions.
    pub fn retrieval_key(&self, include_descriptions: bool) -> String {
        retrieval_text(&self.tutorial, include_descriptions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InductionRecord {
    pub step: u32,
    pub tutorial_id: String,
    pub attempts: u32,
    pub unique_apis_evoked: u32,
    pub new_apis: Vec<String>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolState {
    pub apis: BTreeMap<String, ApiEntry>,
    pub demos: Vec<DemoEntry>,
    pub step_counter: u32,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format_version: u32,
    checksum: String,
    state: PoolState,
}

impl PoolState {
    /// A pool holding only the base registry.
    pub fn base() -> Self {
        let apis = base_registry().into_iter().map(|s| (s.name.clone(), ApiEntry::new(s, 0))).collect();
        Self { apis, demos: Vec::new(), step_counter: 0 }
    }

    pub fn contains_api(&self, name: &str) -> bool {
        self.apis.contains_key(name)
    }

    pub fn has_demo(&self, tutorial_id: &str) -> bool {
        self.demos.iter().any(|d| d.tutorial_id == tutorial_id)
    }

    /// Folds one verified program into the pool at `step`, with `Seed`
    /// provenance at step 0 and `Induced` otherwise.
    fn absorb(&mut self, step: u32, tutorial: &Tutorial, program: &AgentProgram, source_text: &str) -> InductionRecord {
        let provenance = if step == 0 { Provenance::Seed } else { Provenance::Induced };
        let mut evoked = BTreeSet::new();
        let mut new_apis = Vec::new();
        for (site, uc) in use_cases_lenient(program, source_text, &tutorial.id) {
            let entry = self.apis.entry(site.callee.clone()).or_insert_with(|| {
                new_apis.push(site.callee.clone());
                ApiEntry::new(ApiSignature::new(&site.callee, std::iter::empty::<String>(), provenance), step)
            });
            entry.signature.observe(site.kwargs.iter().map(|(k, _)| k.as_str()));
            entry.count(step);
            if let Some(uc) = uc {
                entry.add_use_case(uc);
            }
            evoked.insert(site.callee);
        }
        self.demos.push(DemoEntry {
            tutorial_id: tutorial.id.clone(),
            tutorial: tutorial.clone(),
            program_text: source_text.to_string(),
            step_added: step,
        });
        InductionRecord {
            step,
            tutorial_id: tutorial.id.clone(),
            attempts: 1,
            unique_apis_evoked: evoked.len() as u32,
            new_apis,
            accepted: true,
        }
    }

    /// Adds an accepted program. `step` is normally `step_counter + 1`.
    /// The record's `attempts` is 1; callers that sampled more often
    /// overwrite it.
    pub fn register_program(
        &mut self,
        step: u32,
        tutorial: &Tutorial,
        program: &AgentProgram,
        source_text: &str,
    ) -> InductionRecord {
        let rec = self.absorb(step, tutorial, program, source_text);
        self.step_counter += 1;
        rec
    }

    /// Accounts for a tutorial whose generations were all rejected.
    pub fn register_skip(&mut self, step: u32, tutorial_id: &str, attempts: u32) -> InductionRecord {
        self.step_counter += 1;
        InductionRecord {
            step,
            tutorial_id: tutorial_id.to_string(),
            attempts,
            unique_apis_evoked: 0,
            new_apis: Vec::new(),
            accepted: false,
        }
    }

    /// Names called at least `t` times, most frequent first, ties by name.
    pub fn filter_by_frequency(&self, t: u64) -> Vec<String> {
        let mut v: Vec<(&String, u64)> =
            self.apis.iter().filter(|(_, e)| e.total_calls >= t).map(|(n, e)| (n, e.total_calls)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v.into_iter().map(|(n, _)| n.clone()).collect()
    }

    /// Call counts recomputed from the stored demo texts.
    pub fn recount(&self) -> Result<BTreeMap<String, u64>, ParseError> {
        let mut out = BTreeMap::new();
        for d in &self.demos {
            let p = agentlang::parse(&d.program_text)?;
            for site in extract_calls(&p) {
                *out.entry(site.callee).or_insert(0) += 1;
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let checksum = sha256_hex(serde_json::to_vec(self).expect("pool state serializes"));
        let doc = StateFile { format_version: FORMAT_VERSION, checksum, state: self.clone() };
        let mut out = serde_json::to_vec_pretty(&doc).expect("pool state serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PoolError> {
        let doc: StateFile = serde_json::from_slice(bytes).map_err(|e| PoolError::CorruptState(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(PoolError::CorruptState(format!("unsupported format version {}", doc.format_version)));
        }
        let actual = sha256_hex(serde_json::to_vec(&doc.state).expect("pool state serializes"));
        if actual != doc.checksum {
            return Err(PoolError::CorruptState("checksum mismatch".into()));
        }
        Ok(doc.state)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn persist(&self, path: impl AsRef<Path>) -> Result<(), PoolError> {
        write_atomic(path.as_ref(), &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Tutorial id of a seed file: its file stem.
pub fn seed_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Builds the step-0 pool from seed demonstration files.
///
/// A file whose tutorial id is already present is skipped.
pub fn seed_from_annotations<P: AsRef<Path>>(files: &[P]) -> Result<PoolState, PoolError> {
    let mut pool = PoolState::base();
    for f in files {
        let path = f.as_ref();
        let text = fs::read_to_string(path)?;
        let (tutorial, program_text) = parse_demo_block(&text)
            .map_err(|error| PoolError::SeedFormat { file: path.to_path_buf(), error })?
            .into_tutorial(seed_id(path));
        if pool.has_demo(&tutorial.id) {
            log::warn!("seed {} already loaded, skipping", tutorial.id);
            continue;
        }
        let program = agentlang::verify(&program_text, &tutorial).map_err(|r| match r {
            agentlang::Rejection::Syntax(error) => PoolError::SeedParseFailure { file: path.to_path_buf(), error },
            agentlang::Rejection::MissingSteps(missing) => {
                PoolError::SeedCoverageFailure { file: path.to_path_buf(), missing }
            }
        })?;
        pool.absorb(0, &tutorial, &program, &program_text);
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InstructionStep;
    use proptest::prelude::*;

    fn seeds_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/seeds")
    }

    fn seed_files() -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = fs::read_dir(seeds_dir()).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    }

    fn tutorial(id: &str, n: u32) -> Tutorial {
        Tutorial {
            id: id.into(),
            title: format!("How to {id}"),
            category: vec![],
            steps: (1..=n).map(|i| InstructionStep { index: i, headline: format!("Do {i}."), description: None }).collect(),
        }
    }

    /// Counts `name(` call lines with a plain regex, independent of the parser.
    fn line_scan(text: &str) -> BTreeMap<String, u64> {
        let re = regex::Regex::new(r"^\s*([A-Za-z_]\w*)\s*\(").unwrap();
        let mut out = BTreeMap::new();
        for l in text.lines() {
            if let Some(c) = re.captures(l) {
                if &c[1] != "robot_program" {
                    *out.entry(c[1].to_string()).or_insert(0) += 1;
                }
            }
        }
        out
    }

    #[test]
    fn empty_seed_is_base_registry() {
        let pool = seed_from_annotations::<PathBuf>(&[]).unwrap();
        assert_eq!(pool.apis.len(), 9);
        assert!(pool.demos.is_empty());
        assert_eq!(pool.step_counter, 0);
    }

    #[test]
    fn seeding_learns_chop_keywords() {
        let pool = seed_from_annotations(&seed_files()).unwrap();
        let chop = &pool.apis["chop"];
        for k in ["obj", "tool", "on"] {
            assert!(chop.signature.keyword_params.contains(k));
        }
        assert_eq!(chop.signature.provenance, Provenance::Seed);
        assert_eq!(chop.first_seen_step, 0);
        assert_eq!(pool.demos.len(), seed_files().len());
    }

    #[test]
    fn seeding_twice_keeps_one_demo() {
        let f = seeds_dir().join("clean_sponge.txt");
        let pool = seed_from_annotations(&[f.clone(), f]).unwrap();
        assert_eq!(pool.demos.len(), 1);
    }

    #[test]
    fn seed_counts_match_line_scan() {
        let pool = seed_from_annotations(&seed_files()).unwrap();
        let mut oracle = BTreeMap::new();
        for d in &pool.demos {
            for (k, v) in line_scan(&d.program_text) {
                *oracle.entry(k).or_insert(0) += v;
            }
        }
        let stored: BTreeMap<String, u64> =
            pool.apis.iter().filter(|(_, e)| e.total_calls > 0).map(|(k, e)| (k.clone(), e.total_calls)).collect();
        assert_eq!(stored, oracle);
        assert_eq!(pool.recount().unwrap(), oracle);
    }

    #[test]
    fn bad_seed_reports_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("broken.txt");
        fs::write(&f, "TASK:\nX\nINSTRUCTIONS:\n1. A.\nPROGRAM:\ndef robot_program():\n    find(cup_0)\n").unwrap();
        assert!(matches!(seed_from_annotations(&[&f]), Err(PoolError::SeedParseFailure { .. })));
        fs::write(&f, "TASK:\nX\nINSTRUCTIONS:\n1. A.\n2. B.\nPROGRAM:\ndef robot_program():\n    # 1. A.\n    sleep(duration=1)\n").unwrap();
        match seed_from_annotations(&[&f]) {
            Err(PoolError::SeedCoverageFailure { missing, .. }) => assert_eq!(missing, vec![2]),
            other => panic!("{other:?}"),
        }
    }

    const KNOWN: &str = "\
from objects_pool import a_0, b_0, c_0
def robot_program():
    # 1. Do 1.
    find(obj=a_0)
    grab(obj=a_0)
    find(obj=b_0)
    # 2. Do 2.
    chop(obj=a_0, tool=b_0)
    find(obj=c_0)
    grab(obj=c_0)
";

    #[test]
    fn register_known_apis() {
        let mut pool = PoolState::base();
        let t0 = tutorial("t0", 1);
        let intro = "from objects_pool import x_0\ndef robot_program():\n    # 1. Do 1.\n    chop(obj=x_0)\n";
        pool.register_program(1, &t0, &agentlang::parse(intro).unwrap(), intro);
        let before = pool.apis["find"].total_calls;

        let p = agentlang::parse(KNOWN).unwrap();
        let rec = pool.register_program(2, &tutorial("t1", 2), &p, KNOWN);
        assert_eq!(rec.unique_apis_evoked, 3);
        assert!(rec.new_apis.is_empty());
        assert_eq!(pool.apis["find"].total_calls - before, line_scan(KNOWN)["find"]);
        assert_eq!(pool.apis["find"].calls_by_step[&2], 3);
        assert_eq!(pool.apis["chop"].signature.keyword_params.len(), 2);
        assert_eq!(pool.step_counter, 2);
    }

    #[test]
    fn register_new_api_is_induced() {
        let mut pool = seed_from_annotations(&[seeds_dir().join("melt_chocolate.txt")]).unwrap();
        let text = "from objects_pool import towel_0\ndef robot_program():\n    # 1. Do 1.\n    # wring it\n    wring(obj=towel_0)\n";
        let rec = pool.register_program(7, &tutorial("w", 1), &agentlang::parse(text).unwrap(), text);
        assert_eq!(rec.new_apis, vec!["wring".to_string()]);
        let e = &pool.apis["wring"];
        assert_eq!(e.signature.provenance, Provenance::Induced);
        assert_eq!(e.first_seen_step, 7);
        assert_eq!(e.use_cases.len(), 1);
        assert_eq!(e.use_cases[0].snippet, "    # wring it\n    wring(obj=towel_0)");
    }

    #[test]
    fn skip_only_program_evokes_nothing() {
        let mut pool = PoolState::base();
        let text = "def robot_program():\n    # 1. Do 1.\n    # skip this instruction\n    ...\n";
        let rec = pool.register_program(1, &tutorial("s", 1), &agentlang::parse(text).unwrap(), text);
        assert_eq!((rec.unique_apis_evoked, rec.new_apis.len()), (0, 0));
        let skip = pool.register_skip(2, "t2", 3);
        assert!(!skip.accepted);
        assert_eq!(pool.step_counter, 2);
        assert_eq!(pool.demos.len(), 1);
    }

    #[test]
    fn identical_snippets_stored_once() {
        let mut pool = PoolState::base();
        let text = "from objects_pool import towel_0\ndef robot_program():\n    # 1. Do 1.\n    # wring it\n    wring(obj=towel_0)\n";
        let p = agentlang::parse(text).unwrap();
        pool.register_program(1, &tutorial("a", 1), &p, text);
        pool.register_program(2, &tutorial("b", 1), &p, text);
        assert_eq!(pool.apis["wring"].use_cases.len(), 1);
        assert_eq!(pool.apis["wring"].total_calls, 2);
    }

    #[test]
    fn frequency_filter() {
        let mut pool = PoolState::default();
        for (name, n) in [("find", 10), ("squeeze", 2), ("insert", 1)] {
            let mut e = ApiEntry::new(ApiSignature::new(name, ["obj"], Provenance::Seed), 0);
            e.total_calls = n;
            pool.apis.insert(name.into(), e);
        }
        assert_eq!(pool.filter_by_frequency(2), vec!["find", "squeeze"]);
        assert_eq!(pool.filter_by_frequency(1).len(), 3);
        assert!(pool.filter_by_frequency(11).is_empty());
    }

    #[test]
    fn persistence_round_trip_and_corruption() {
        let pool = seed_from_annotations(&seed_files()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.json");
        pool.persist(&path).unwrap();
        let a = fs::read(&path).unwrap();
        pool.persist(&path).unwrap();
        assert_eq!(a, fs::read(&path).unwrap());
        assert_eq!(PoolState::load(&path).unwrap(), pool);

        fs::write(&path, &a[..a.len() / 2]).unwrap();
        assert!(matches!(PoolState::load(&path), Err(PoolError::CorruptState(_))));

        let tampered = String::from_utf8(a).unwrap().replacen("\"total_calls\": 1", "\"total_calls\": 2", 1);
        fs::write(&path, tampered).unwrap();
        assert!(matches!(PoolState::load(&path), Err(PoolError::CorruptState(_))));
    }

    fn arb_program() -> impl Strategy<Value = String> {
        prop::collection::vec((0usize..6, 1usize..3), 1..8).prop_map(|calls| {
            const NAMES: [&str; 6] = ["find", "grab", "wring", "fold", "chop", "mix"];
            let mut s = String::from("from objects_pool import ...\ndef robot_program():\n    # 1. Do 1.\n");
            for (i, (n, reps)) in calls.into_iter().enumerate() {
                s.push_str(&format!("    # part {i}\n"));
                for _ in 0..reps {
                    s.push_str(&format!("    {}(obj=x_{i})\n", NAMES[n]));
                }
            }
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn growth_is_monotone_and_counts_consistent(programs in prop::collection::vec(arb_program(), 1..6)) {
            let mut pool = PoolState::base();
            for (i, text) in programs.iter().enumerate() {
                let before = pool.clone();
                let step = i as u32 + 1;
                let p = agentlang::parse(text).unwrap();
                let rec = pool.register_program(step, &tutorial(&format!("t{i}"), 1), &p, text);
                for (name, e) in &before.apis {
                    prop_assert!(pool.apis[name].total_calls >= e.total_calls);
                }
                prop_assert_eq!(&pool.demos[..before.demos.len()], &before.demos[..]);
                prop_assert!(rec.unique_apis_evoked as usize >= rec.new_apis.len());
                for t in 1..4 {
                    let hi: BTreeSet<_> = pool.filter_by_frequency(t + 1).into_iter().collect();
                    let lo: BTreeSet<_> = pool.filter_by_frequency(t).into_iter().collect();
                    prop_assert!(hi.is_subset(&lo));
                }
            }
            let recount = pool.recount().unwrap();
            for (name, e) in &pool.apis {
                prop_assert_eq!(e.total_calls, recount.get(name).copied().unwrap_or(0));
                prop_assert_eq!(e.total_calls, e.calls_by_step.values().sum::<u64>());
            }
        }
    }
}

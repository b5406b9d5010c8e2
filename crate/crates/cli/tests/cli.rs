use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actionspace")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Env {
    dir: tempfile::TempDir,
    seed: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let seed = dir.path().join("seed.json");
        ok(&["seed", "--annotations", s(&fixtures().join("seeds")), "--out", s(&seed)]);
        Self { dir, seed }
    }

    fn run_args(&self, out: &Path) -> Vec<String> {
        let f = fixtures().join("run");
        [
            "run",
            "--config",
            s(&f.join("config.toml")),
            "--corpus",
            s(&f.join("corpus.jsonl")),
            "--seed-state",
            s(&self.seed),
            "--replay",
            s(&f.join("cassette.jsonl")),
            "--out",
            s(out),
        ]
        .map(String::from)
        .to_vec()
    }

    fn run(&self, name: &str, extra: &[&str]) -> (PathBuf, Output) {
        let out = self.dir.path().join(name);
        let mut args = self.run_args(&out);
        args.extend(extra.iter().map(|x| x.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        (out.clone(), bin(&refs))
    }
}

fn single_line_error(out: &Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{err}");
}

#[test]
fn replay_sample_of_three() {
    let env = Env::new();
    let (out, o) = env.run("r", &["--sample", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("records.jsonl")).unwrap().lines().count(), 3);
    assert_eq!(fs::read_to_string(out.join("steps.jsonl")).unwrap().lines().count(), 3);
    let cfg = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(cfg.contains("sample_size = 3"), "{cfg}");
    assert!(!out.join(".lock").exists());
}

#[test]
fn replay_runs_are_byte_identical() {
    let env = Env::new();
    let (a, oa) = env.run("a", &[]);
    let (b, ob) = env.run("b", &[]);
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(oa.stdout, ob.stdout);
    for f in ["state.json", "records.jsonl", "steps.jsonl", "checkpoint.json", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    for d in [&a, &b] {
        ok(&["stats", "--state", s(&d.join("state.json")), "--window", "50"]);
    }
    let names: Vec<String> = {
        let mut v: Vec<String> =
            fs::read_dir(a.join("stats")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        v.sort();
        v
    };
    assert_eq!(
        names,
        [
            "frequency_top50.csv",
            "induction_ratio.csv",
            "pool_size_t1.csv",
            "pool_size_t10.csv",
            "pool_size_t2.csv",
            "pool_size_t3.csv",
            "pool_size_t5.csv"
        ]
    );
    for n in &names {
        assert_eq!(fs::read(a.join("stats").join(n)).unwrap(), fs::read(b.join("stats").join(n)).unwrap(), "{n}");
    }
}

#[test]
fn compare_reports_nine_of_fifty() {
    let env = Env::new();
    let (out, o) = env.run("r", &[]);
    assert!(o.status.success());
    let text = ok(&[
        "compare",
        "--state",
        s(&out.join("state.json")),
        "--mapping",
        s(&fixtures().join("run/coverage_mapping.txt")),
    ]);
    assert_eq!(text, "covered 9/50\n");
}

#[test]
fn refuses_non_empty_output_without_force() {
    let env = Env::new();
    let (out, o) = env.run("r", &["--sample", "2"]);
    assert!(o.status.success());
    let before = fs::read(out.join("state.json")).unwrap();
    let (_, again) = env.run("r", &["--sample", "2"]);
    single_line_error(&again, 2, "usage");
    assert_eq!(fs::read(out.join("state.json")).unwrap(), before);
    let (_, forced) = env.run("r", &["--sample", "2", "--force"]);
    assert!(forced.status.success());
    assert_eq!(fs::read_to_string(out.join("steps.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn lock_blocks_a_second_writer() {
    let env = Env::new();
    let out = env.dir.path().join("locked");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".lock"), "1\n").unwrap();
    let (_, o) = env.run("locked", &["--force"]);
    single_line_error(&o, 1, "locked");
}

#[test]
fn interrupted_run_resumes_to_the_same_state() {
    let env = Env::new();
    let (full, o) = env.run("full", &[]);
    assert!(o.status.success());
    for stop in ["4", "13"] {
        let (part, o) = env.run(&format!("part{stop}"), &["--stop-after", stop]);
        assert!(o.status.success());
        assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("processed {stop}/25")));
        ok(&["resume", "--out", s(&part), "--replay", s(&fixtures().join("run/cassette.jsonl"))]);
        for f in ["state.json", "records.jsonl", "steps.jsonl", "checkpoint.json"] {
            assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(part.join(f)).unwrap(), "{f} after stop at {stop}");
        }
    }
}

#[test]
fn cassette_miss_fails_with_checkpoint_left() {
    let env = Env::new();
    let (out, o) = env.run("miss", &["--k", "2"]);
    single_line_error(&o, 1, "generation");
    assert!(out.join("checkpoint.json").exists());
    assert!(!out.join("state.json").exists());
}

#[test]
fn missing_inputs_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["stats", "--state", s(&dir.path().join("nope.json"))]);
    single_line_error(&o, 1, "missing-input");
    let o = bin(&["stats"]);
    assert_eq!(o.status.code(), Some(2));
    let env = Env::new();
    let (_, o) = env.run("r", &["--variant", "fancy"]);
    assert_eq!(o.status.code(), Some(2));
    let (out, o) = env.run("r", &["--sample", "2"]);
    assert!(o.status.success());
    let o = bin(&["stats", "--state", s(&out.join("state.json")), "--format", "png"]);
    single_line_error(&o, 2, "usage");
}

#[test]
fn help_lists_defaults() {
    let help = ok(&["run", "--help"]);
    for flag in ["--k", "--variant", "--temperature-schedule", "--replay", "--record", "--sample", "--include-descriptions", "--force"] {
        assert!(help.contains(flag), "{flag}");
    }
    assert!(help.contains("[default: 10]"));
    assert!(help.contains("[default: 0,0.3,0.7]"));
    assert!(!help.to_lowercase().contains("api-key"));
    let stats = ok(&["stats", "--help"]);
    assert!(stats.contains("[default: 1,2,3,5,10]") && stats.contains("[default: 50]"));
}

#[test]
fn report_table_from_annotations() {
    let env = Env::new();
    let (out, o) = env.run("r", &[]);
    assert!(o.status.success());
    let records = format!("base+usecase={}", s(&out.join("records.jsonl")));
    let text = ok(&["report", "--annotations", s(&fixtures().join("annotations/table.jsonl")), "--records", &records]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("Induction Pipelines | Redundancy Score | -Complex | -Complex -Synonym | Faithfulness Score | Ranking | Avg. # APIs"));
    let row = |label: &str| -> Vec<String> {
        let l = lines.iter().find(|l| l.starts_with(&format!("{label} "))).unwrap();
        l.split('|').map(|c| c.trim().to_string()).collect()
    };
    assert_eq!(row("Base"), ["Base", "50.00", "37.50", "25.00", "87.5", "2.250", "-"]);
    assert_eq!(row("+UseCase"), ["+UseCase", "40.00", "30.00", "30.00", "62.5", "2.250", "2.76"]);
    assert_eq!(row("+UseCase+Desc"), ["+UseCase+Desc", "25.00", "25.00", "0.00", "87.5", "1.500", "-"]);
    let csv = ok(&["report", "--annotations", s(&fixtures().join("annotations/table.jsonl")), "--format", "csv"]);
    assert!(csv.starts_with("Induction Pipelines,Redundancy Score,-Complex,-Complex -Synonym,Faithfulness Score,Ranking,Avg. # APIs\n"));
}

#[test]
fn ingest_filters_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let text = ok(&[
        "ingest",
        "--input",
        s(&fixtures().join("run/corpus.jsonl")),
        "--out",
        s(&out),
        "--require-category",
        "Home and Garden",
        "--exclude-category",
        "Yard",
    ]);
    assert!(text.starts_with("tutorials 15\n"), "{text}");
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 15);
    let again = ok(&["ingest", "--input", s(&fixtures().join("run/corpus.jsonl")), "--out", s(&out)]);
    assert!(again.contains("steps_with_descriptions 4"));
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"x\"}\n").unwrap();
    single_line_error(&bin(&["ingest", "--input", s(&bad), "--out", s(&out)]), 1, "corpus");
}

#[test]
fn annotate_appends_from_stdin() {
    use std::io::Write;
    use std::process::Stdio;
    let env = Env::new();
    let (out, o) = env.run("r", &["--sample", "2"]);
    assert!(o.status.success());
    let ann = env.dir.path().join("ann.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_actionspace"))
        .args(["annotate", "--task", "faithfulness", "--state", s(&out.join("state.json")), "--out", s(&ann)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1\n0.5\nq\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("recorded 2"));
    assert_eq!(fs::read_to_string(&ann).unwrap().lines().count(), 2);
    let text = ok(&["report", "--annotations", s(&ann)]);
    assert!(text.lines().any(|l| l.starts_with("+UseCase ") && l.contains("75.0")), "{text}");
}

//! Regenerates `tests/fixtures/run/cassette.jsonl`.
//!
//! A scripted generator writes one program per tutorial of the fixture
//! corpus, and the recording backend stores every prompt digest it sees.
//! Some tutorials get a first draft that misses a step comment, and one
//! gets three unparsable drafts and is skipped.
//!
//! Run with `cargo run -p actionspace-core --example make_cassette`.

use std::fs;
use std::path::Path;

use actionspace::corpus::{load_corpus, Tutorial};
use actionspace::genclient::RecordingBackend;
use actionspace::induction::{run, sample_stream, RunSinks};
use actionspace::pool::seed_from_annotations;
use actionspace::{RunConfig, ScriptedBackend};

fn object_of(headline: &str) -> String {
    let last = headline.trim_end_matches('.').split_whitespace().last().unwrap_or("thing");
    format!("{}_0", last.to_lowercase())
}

fn action_of(headline: &str) -> String {
    let words: Vec<String> = headline.trim_end_matches('.').split_whitespace().map(str::to_lowercase).collect();
    match words.get(1).map(String::as_str) {
        Some("off" | "on" | "open") => format!("{}_{}", words[0], words[1]),
        _ => words[0].clone(),
    }
}

fn program(t: &Tutorial, drop_step: Option<u32>) -> String {
    let mut body = String::new();
    let mut apis = vec!["find".to_string()];
    let mut objects = Vec::new();
    for s in &t.steps {
        if Some(s.index) != drop_step {
            body.push_str(&format!("    # {}. {}\n", s.index, s.headline));
        }
        let h = s.headline.as_str();
        if h.starts_with("Enjoy") {
            body.push_str("    # skip this instruction\n");
            continue;
        }
        if h.starts_with("Wait") {
            body.push_str("    # wait for the cleaner to work\n    sleep(duration=\"1h\")\n");
            apis.push("sleep".into());
            continue;
        }
        let (verb, obj) = (action_of(h), object_of(h));
        body.push_str(&format!("    # {}\n    find(obj={obj})\n", h.trim_end_matches('.').to_lowercase()));
        if verb == "scrub" {
            body.push_str(&format!("    while {obj}.material_properties['dirty'] == 'yes':\n        scrub(obj={obj})\n"));
        } else {
            body.push_str(&format!("    {verb}(obj={obj})\n"));
        }
        if !apis.contains(&verb) {
            apis.push(verb);
        }
        if !objects.contains(&obj) {
            objects.push(obj);
        }
    }
    format!(
        "# primitive APIs\nfrom utils import {}\n# objects\nfrom objects_pool import {}\n# program\ndef robot_program():\n{body}# execute the program\nrobot_program()\n",
        apis.join(", "),
        if objects.is_empty() { "...".to_string() } else { objects.join(", ") },
    )
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = root.join("run");
    let config = RunConfig::from_toml_str(&fs::read_to_string(dir.join("config.toml")).unwrap()).unwrap();
    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    let mut seeds: Vec<_> = fs::read_dir(root.join("seeds")).unwrap().map(|e| e.unwrap().path()).collect();
    seeds.sort();
    let seed_pool = seed_from_annotations(&seeds).unwrap();

    let mut script = Vec::new();
    for (i, t) in sample_stream(&config, &corpus).unwrap().iter().enumerate() {
        if i == 6 {
            for _ in 0..3 {
                script.push("PROGRAM:\ndef robot_program():\n    # 1. Go.\n    find(sponge_0)\n".to_string());
            }
            continue;
        }
        if i % 4 == 1 {
            script.push(format!("PROGRAM:\n{}", program(t, Some(t.steps.len() as u32))));
        }
        if let Err(e) = actionspace::agentlang::verify(&program(t, None), t) {
            panic!("{}: {e}", t.id);
        }
        let fenced = i % 3 == 0;
        let p = program(t, None);
        script.push(if fenced { format!("Here it is.\nPROGRAM:\n```python\n{p}```\n") } else { format!("PROGRAM:\n{p}") });
    }

    let cassette = dir.join("cassette.jsonl");
    let _ = fs::remove_file(&cassette);
    let mut backend = RecordingBackend::new(ScriptedBackend::new(script), &cassette).unwrap();
    let out = run(&config, &corpus, seed_pool, &mut backend, &config.embedding.build(), RunSinks::default()).unwrap();
    let accepted = out.records.iter().filter(|r| r.accepted).count();
    println!("{} records, {} accepted, {} APIs", out.records.len(), accepted, out.pool.apis.len());
}

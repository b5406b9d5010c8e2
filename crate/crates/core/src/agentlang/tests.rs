use std::collections::HashSet;

use proptest::prelude::*;
use regex::Regex;

use super::*;
use crate::corpus::{parse_demo_block, InstructionStep, Tutorial};

const LISTING1: &str = include_str!("../../tests/fixtures/listings/listing1_abridged.py");
const LISTING2: &str = include_str!("../../tests/fixtures/listings/listing2_use_cases.py");
const BASE_APIS: &str = include_str!("../../tests/fixtures/listings/appendix_base_apis.py");
const FEEDBACK: &str = include_str!("../../tests/fixtures/listings/appendix_feedback_loop.py");
const SEEDS: [&str; 4] = [
    include_str!("../../tests/fixtures/seeds/melt_chocolate.txt"),
    include_str!("../../tests/fixtures/seeds/clean_sponge.txt"),
    include_str!("../../tests/fixtures/seeds/vacuum_stairs.txt"),
    include_str!("../../tests/fixtures/seeds/water_plant.txt"),
];

fn tutorial(n: u32) -> Tutorial {
    Tutorial {
        id: format!("t{n}"),
        title: "How to Test".into(),
        category: vec![],
        steps: (1..=n)
            .map(|i| InstructionStep { index: i, headline: format!("Step {i}."), description: None })
            .collect(),
    }
}

/// Independent count of call lines: an identifier followed by `(` at the
/// start of a line, excluding comments, `def` and the policy invocation.
fn line_scan_calls(text: &str) -> Vec<String> {
    let re = Regex::new(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap();
    text.lines()
        .filter_map(|l| re.captures(l))
        .map(|c| c[1].to_string())
        .filter(|name| name != POLICY_FUNCTION)
        .collect()
}

#[test]
fn listing1_structure() {
    let p = parse(LISTING1).unwrap();
    let apis: HashSet<_> = p.imports_apis.iter().map(String::as_str).collect();
    assert!(["find", "grab", "put", "put_back"].iter().all(|a| apis.contains(a)));
    assert!(p.apis_elided && p.objects_elided && p.preamble_elided);
    assert_eq!(
        p.receptacle_stmts,
        [ReceptacleStmt { subject: "faucet_0".into(), relation: Relation::Receptacles, object: "sink_0".into() }]
    );
    assert_eq!(p.receptacle_stmts[0].containment(), ("sink_0", "faucet_0"));
    let loop_cond = p
        .walk()
        .into_iter()
        .find_map(|s| match &s.kind {
            StmtKind::Loop(b) => Some(b.condition.clone()),
            _ => None,
        })
        .expect("a while loop");
    assert_eq!(
        loop_cond.clauses,
        [Comparison {
            object: "chocolate_0".into(),
            key: "form".into(),
            op: CmpOp::Ne,
            literal: Value::Text("small pieces".into()),
        }]
    );
    let callees: HashSet<_> = extract_calls(&p).into_iter().map(|c| c.callee).collect();
    for c in ["find", "grab", "chop", "put_back"] {
        assert!(callees.contains(c), "{c}");
    }
    assert_eq!(p.step_numbers(), [1, 2]);
    assert!(p.has_trailing_invocation);
}

#[test]
fn comment_text_is_exact() {
    let p = parse(LISTING1).unwrap();
    let StmtKind::Comment(c) = &p.body[9].kind else { panic!("{:?}", p.body[9]) };
    assert_eq!(c.text, "chop chocolate until it's into small pieces");
    assert_eq!(c.kind, CommentKind::Substep);
}

#[test]
fn feedback_loop_is_conditional() {
    let p = parse(FEEDBACK).unwrap();
    let StmtKind::Conditional(b) = &p.body[1].kind else { panic!() };
    assert_eq!(b.condition.clauses[0].op, CmpOp::Ne);
    assert_eq!(b.condition.clauses[0].key, "form");
    assert_eq!(b.body.len(), 5);
}

#[test]
fn base_api_lines_parse() {
    let p = parse(BASE_APIS).unwrap();
    let calls = extract_calls(&p);
    assert_eq!(calls.len(), 9);
    let turn_on = calls.iter().find(|c| c.callee == "turn_on").unwrap();
    assert_eq!(turn_on.kwargs[1], ("power".to_string(), Value::Text("high".into())));
}

#[test]
fn coverage_ok_when_all_steps_present() {
    let p = parse(LISTING1).unwrap();
    assert_eq!(check_step_coverage(&p, &tutorial(2)), Coverage::Ok);
    assert_eq!(check_step_coverage(&p, &tutorial(3)), Coverage::MissingSteps(vec![3]));
}

#[test]
fn skip_comment_keeps_step_present() {
    let text = "from objects_pool import cup_0\ndef robot_program():\n    # 1. Find the cup.\n    find(obj=cup_0)\n    # 2. Admire it.\n    # skip this instruction\nrobot_program()\n";
    let p = parse(text).unwrap();
    assert_eq!(check_step_coverage(&p, &tutorial(2)), Coverage::Ok);
}

#[test]
fn nested_duplicate_step_not_double_counted() {
    let text = "from objects_pool import cup_0\ndef robot_program():\n    # 1. Find the cup.\n    while cup_0.material_properties['found'] != 'yes':\n        # 1. keep looking\n        find(obj=cup_0)\nrobot_program()\n";
    let p = parse(text).unwrap();
    assert_eq!(p.step_numbers(), [1]);
}

#[test]
fn verify_reports_reason() {
    assert!(matches!(verify("", &tutorial(1)), Err(Rejection::Syntax(_))));
    assert_eq!(verify(LISTING1, &tutorial(4)).unwrap_err(), Rejection::MissingSteps(vec![3, 4]));
    assert!(verify(LISTING1, &tutorial(2)).is_ok());
}

#[test]
fn first_call_site_is_find_under_step_1() {
    let calls = extract_calls(&parse(LISTING1).unwrap());
    assert_eq!(calls[0].callee, "find");
    assert_eq!(calls[0].kwargs, [("obj".to_string(), Value::Object("chocolate_0".into()))]);
    assert_eq!(calls[0].step, Some(1));
    assert_eq!(calls[0].line, 12);
    let chop = calls.iter().find(|c| c.callee == "chop").unwrap();
    assert_eq!(chop.step, Some(1));
}

#[test]
fn calls_inside_loops_are_reported() {
    let text = "from objects_pool import cup_0\ndef robot_program():\n    while cup_0.material_properties['a'] == 1:\n        if cup_0.material_properties['b'] == 2:\n            shake(obj=cup_0)\n        tap(obj=cup_0)\nrobot_program()\n";
    let calls = extract_calls(&parse(text).unwrap());
    let names: Vec<_> = calls.iter().map(|c| c.callee.as_str()).collect();
    assert_eq!(names, ["shake", "tap"]);
    assert_eq!(calls[0].step, None);
}

#[test]
fn seven_calls_match_line_scan() {
    let text = "from objects_pool import cup_0, sink_0\ndef robot_program():\n    # 1. a\n    find(obj=cup_0)\n    grab(obj=cup_0)\n    while cup_0.material_properties['x'] != 'y':\n        shake(obj=cup_0)\n        if sink_0.material_properties['z'] == 0:\n            rinse(obj=cup_0,\n                  target=sink_0)\n    # 2. b\n    put(obj=cup_0, target=sink_0)\n    dry(obj=cup_0)\n    put_back(obj=cup_0)\nrobot_program()\n";
    let calls = extract_calls(&parse(text).unwrap());
    assert_eq!(calls.len(), 7);
    let names: Vec<_> = calls.iter().map(|c| c.callee.clone()).collect();
    assert_eq!(names, line_scan_calls(text));
    let rinse = &calls[3];
    assert_eq!((rinse.line, rinse.end_line), (9, 10));
}

#[test]
fn listing2_use_cases() {
    let p = parse(LISTING2).unwrap();
    let ucs = extract_use_cases(&p, LISTING2, "listing2").unwrap();
    let squeeze = ucs.iter().find(|u| u.api_name == "squeeze").unwrap();
    assert_eq!(squeeze.leading_comment, "bring the sponge to the sink and squeeze out the water");
    let lines: Vec<_> = squeeze.snippet.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "# bring the sponge to the sink and squeeze out the water");
    assert_eq!(lines[1].trim(), "find(obj=sink_0)");
    assert_eq!(lines[3].trim(), "squeeze(obj=sponge_0, target=sink_0)");

    let insert = ucs.iter().find(|u| u.api_name == "insert").unwrap();
    assert_eq!(insert.leading_comment, "attach hose attachment to vacuum");
    assert_eq!(
        insert.snippet,
        "    # attach hose attachment to vacuum\n    insert(obj=hose_attachment_0, target=vacuum_0)"
    );
}

#[test]
fn substep_comment_beats_step_comment() {
    let text = "from objects_pool import cup_0\ndef robot_program():\n    # 1. Wash the cup.\n    # find it first\n    find(obj=cup_0)\n    # 2. Dry it.\n    dry(obj=cup_0)\nrobot_program()\n";
    let ucs = extract_use_cases(&parse(text).unwrap(), text, "t").unwrap();
    assert_eq!(ucs[0].leading_comment, "find it first");
    assert_eq!(ucs[0].snippet.lines().count(), 2);
    assert_eq!(ucs[1].leading_comment, "2. Dry it.");
    assert_eq!(ucs[1].source.step, Some(2));
}

#[test]
fn call_without_comment_is_an_error() {
    let text = "from objects_pool import cup_0\ndef robot_program():\n    find(obj=cup_0)\n    # 1. x\nrobot_program()\n";
    let err = extract_use_cases(&parse(text).unwrap(), text, "t").unwrap_err();
    assert_eq!(err, NoLeadingComment { callee: "find".into(), line: 3 });
}

#[test]
fn all_fixtures_round_trip() {
    let mut texts = vec![LISTING1, LISTING2, BASE_APIS, FEEDBACK];
    let seed_programs: Vec<String> = SEEDS.iter().map(|s| parse_demo_block(s).unwrap().program_text).collect();
    texts.extend(seed_programs.iter().map(String::as_str));
    for text in texts {
        let p = parse(text).unwrap();
        let printed = print(&p);
        let q = parse(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(p, q);
        assert_eq!(print(&q), printed);
    }
}

#[test]
fn seeds_verify_and_every_use_case_is_well_formed() {
    for seed in SEEDS {
        let block = parse_demo_block(seed).unwrap();
        let (t, text) = block.into_tutorial("seed");
        let p = verify(&text, &t).unwrap();
        let ucs = extract_use_cases(&p, &text, "seed").unwrap();
        assert_eq!(ucs.len(), line_scan_calls(&text).len());
        for uc in ucs {
            let last = uc.snippet.lines().rev().find(|l| !l.trim().is_empty()).unwrap();
            assert!(last.contains(&format!("{}(", uc.api_name)), "{uc:?}");
            assert!(uc.snippet.trim_start().starts_with('#'));
        }
    }
}

// ---- generated programs ----------------------------------------------------

const OBJECTS: [&str; 4] = ["cup_0", "sink_0", "cutting_board_0", "knife_1"];

fn arb_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        prop::sample::select(&OBJECTS[..]).prop_map(|o| Value::Object(o.to_string())),
        "[a-z '\"\\\\]{0,8}".prop_map(Value::Text),
        (-1000i32..1000, 0u8..3).prop_map(|(n, d)| Value::Number(n as f64 / 10f64.powi(d as i32))),
    ]
}

fn arb_call() -> impl Strategy<Value = StmtKind> {
    (
        "[a-z][a-z_]{0,7}",
        prop::collection::btree_map("[a-z]{1,5}", arb_value(), 0..4),
    )
        .prop_filter("reserved", |(name, _)| !["and", "or", "not", "if", "while", "for", "in", "def", "from", "import", "return", "pass", "else", "elif", "class", "lambda", "break", "continue"].contains(&name.as_str()))
        .prop_map(|(callee, kw)| StmtKind::Call(Call { callee, kwargs: kw.into_iter().collect() }))
}

fn arb_comment() -> impl Strategy<Value = StmtKind> {
    prop_oneof![
        (1u32..6, "[a-z ]{0,12}").prop_map(|(n, t)| format!("{n}. {}", t.trim()).trim_end().to_string()),
        "[a-z][a-z ]{0,15}".prop_map(|t| t.trim().to_string()),
        Just("skip this instruction".to_string()),
    ]
    .prop_map(|text| StmtKind::Comment(Comment { kind: CommentKind::Substep, text }))
}

fn arb_condition() -> impl Strategy<Value = Condition> {
    (
        prop::collection::vec(
            (
                prop::sample::select(&OBJECTS[..]),
                "[a-z]{1,6}",
                prop::bool::ANY,
                prop_oneof!["[a-z ]{0,6}".prop_map(Value::Text), (0i32..50).prop_map(|n| Value::Number(n as f64))],
            ),
            1..3,
        ),
        prop::bool::ANY,
    )
        .prop_map(|(clauses, or)| Condition {
            clauses: clauses
                .into_iter()
                .map(|(o, key, ne, literal)| Comparison {
                    object: o.to_string(),
                    key,
                    op: if ne { CmpOp::Ne } else { CmpOp::Eq },
                    literal,
                })
                .collect(),
            connective: if or { Connective::Or } else { Connective::And },
        })
}

fn stmt(kind: StmtKind) -> Stmt {
    Stmt { line: 0, end_line: 0, kind }
}

fn arb_body() -> impl Strategy<Value = Vec<Stmt>> {
    let leaf = prop_oneof![3 => arb_call(), 2 => arb_comment(), 1 => Just(StmtKind::Ellipsis)];
    let tree = leaf.prop_recursive(3, 24, 6, |inner| {
        prop_oneof![
            2 => arb_call(),
            1 => arb_comment(),
            1 => (arb_condition(), prop::collection::vec(inner.clone(), 0..4), arb_call(), any::<bool>())
                .prop_map(|(condition, mut body, call, is_loop)| {
                    body.push(call);
                    let block = Block { condition, body: body.into_iter().map(stmt).collect() };
                    if is_loop { StmtKind::Loop(block) } else { StmtKind::Conditional(block) }
                }),
        ]
    });
    (prop::collection::vec(tree, 0..8), arb_call()).prop_map(|(mut v, c)| {
        v.push(c);
        v.into_iter().map(stmt).collect()
    })
}

/// Re-derives comment kinds in source order the way the parser assigns them.
fn normalize(p: &mut AgentProgram) {
    fn go(body: &mut [Stmt], seen: &mut HashSet<u32>) {
        for s in body {
            match &mut s.kind {
                StmtKind::Comment(c) => {
                    let num = c
                        .text
                        .split_once('.')
                        .and_then(|(n, _)| n.parse::<u32>().ok())
                        .filter(|n| *n > 0);
                    c.kind = match num {
                        Some(n) if seen.insert(n) => CommentKind::Step(n),
                        Some(_) => CommentKind::Substep,
                        None if c.text.starts_with("skip this instruction") => CommentKind::Skip,
                        None => CommentKind::Substep,
                    };
                }
                StmtKind::Loop(b) | StmtKind::Conditional(b) => {
                    if b.condition.clauses.len() < 2 {
                        b.condition.connective = Connective::And;
                    }
                    go(&mut b.body, seen)
                }
                _ => {}
            }
        }
    }
    go(&mut p.body, &mut HashSet::new());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(body in arb_body(), apis in prop::collection::vec("[a-z]{1,6}", 0..4), invoke in any::<bool>()) {
        let mut prog = AgentProgram {
            imports_apis: apis,
            imports_objects: OBJECTS.iter().map(|s| s.to_string()).collect(),
            body,
            has_trailing_invocation: invoke,
            ..Default::default()
        };
        normalize(&mut prog);
        let text = print(&prog);
        let parsed = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&parsed, &prog);
        prop_assert_eq!(extract_calls(&parsed).len(), line_scan_calls(&text).len());
        for uc in use_cases_lenient(&parsed, &text, "p").into_iter().filter_map(|(_, u)| u) {
            let last = uc.snippet.lines().last().unwrap();
            let needle = format!("{}(", uc.api_name);
            prop_assert!(last.contains(&needle));
            prop_assert!(uc.snippet.trim_start().starts_with('#'));
        }
    }
}

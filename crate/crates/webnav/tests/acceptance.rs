//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use webnav::backend::{PromptPart, ScriptedBackend};
use webnav::pipeline::{assistant_step, render_history};
use webnav::transcript::{read_transcript, without_timestamps};
use webnav::{
    run_session, Outcome, Pipeline, PipelineConfig, PipelineError, SessionConfig, SessionControl,
    SessionResult, SessionStatus,
};
use webnav_core::{
    canonical_json, parse_command, render_command, to_action, ActionRequest, ControllerCommand,
    Direction, LabelNumber,
};

const ROUND_TRIP_CASES: usize = 1000;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(1);
const LABEL_RUNS: usize = 10;
const E2E_MAX_STEPS: usize = 6;
const E2E_BUDGET: Duration = Duration::from_secs(5);
const MAX_JSON_REPAIRS: u32 = 2;

type Verdict = Result<String, String>;
type Check = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn escape_heavy_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9 ]{0,16}",
        proptest::collection::vec(
            prop_oneof![Just('"'), Just('\\'), Just(' '), Just('['), Just(']'), Just('a'), Just('ñ')],
            0..24,
        )
        .prop_map(|v| v.into_iter().collect()),
        any::<String>().prop_filter("one line", |s| !s.contains(['\n', '\r'])),
    ]
}

fn any_command() -> impl Strategy<Value = ControllerCommand> {
    let label = (1u32..=u32::MAX).prop_map(|n| LabelNumber::new(n).unwrap());
    prop_oneof![
        label.clone().prop_map(ControllerCommand::Click),
        (label, escape_heavy_text()).prop_map(|(n, t)| ControllerCommand::Type(n, t)),
        escape_heavy_text().prop_map(ControllerCommand::Note),
        prop_oneof![Just(Direction::Up), Just(Direction::Down)].prop_map(ControllerCommand::Scroll),
        Just(ControllerCommand::End),
    ]
}

fn grammar_round_trip() -> Verdict {
    let started = Instant::now();
    let mut runner = TestRunner::deterministic();
    let strategy = any_command();
    let mut failures = 0;
    let mut escapes = 0;
    for _ in 0..ROUND_TRIP_CASES {
        let c = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let text = render_command(&c);
        escapes += usize::from(text.contains('\\'));
        if parse_command(&text).as_ref() != Ok(&c) {
            failures += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(failures == 0, "{failures} of {ROUND_TRIP_CASES} cases failed");
    ensure!(escapes > 0, "no generated case needed escaping");
    ensure!(elapsed < ROUND_TRIP_BUDGET, "took {elapsed:?}");
    Ok(format!("{ROUND_TRIP_CASES} cases, {escapes} with escapes, 0 failures, {elapsed:?}"))
}

fn golden_bytes() -> Verdict {
    let literal = r#"{"function": "Click", "parameters": {"number": 13}}"#;
    let normalized: String = literal.chars().filter(|c| !c.is_whitespace()).collect();
    let got = canonical_json(&to_action(&parse_command("Click [13]").map_err(|e| e.to_string())?));
    ensure!(got.as_bytes() == normalized.as_bytes(), "{got} != {normalized}");
    Ok(got)
}

fn label_determinism() -> Verdict {
    let mut total = 0;
    for page in ORACLE_PAGES {
        let fake = start_fake(Some(page));
        let want = oracle(page);
        let mut driver = connect(&fake);
        let mut first: Option<String> = None;
        for run in 0..LABEL_RUNS {
            let mut map = driver.perceive().map_err(|e| format!("{page}: {e}"))?.label_map;
            check_oracle(&map, &want).map_err(|e| format!("{page} run {run}: {e}"))?;
            map.captured_at.clear();
            let json = map.to_json();
            match &first {
                None => first = Some(json),
                Some(f) => ensure!(*f == json, "{page} run {run} differs from run 0"),
            }
        }
        total += want.elements.len();
    }
    Ok(format!(
        "{} pages x {LABEL_RUNS} runs, {total} labeled elements match the oracles",
        ORACLE_PAGES.len()
    ))
}

fn pipeline(b: &ScriptedBackend) -> Pipeline {
    Pipeline::new(b.controller.clone(), b.assistant.clone(), PipelineConfig::default())
        .expect("default prompts are non-empty")
}

fn run_form_fill(path: std::path::PathBuf) -> Result<(SessionResult, Duration), String> {
    let fake = start_fake(None);
    let b = form_fill_backend();
    let cfg = SessionConfig {
        start_url: Some(page_url("form")),
        ..SessionConfig::new("send a hello message as Ada", path)
    };
    let started = Instant::now();
    let mut driver = connect(&fake);
    let r = run_session(&cfg, &pipeline(&b), &mut driver, &SessionControl::new());
    let elapsed = started.elapsed();
    ensure!(fake.submissions().len() == 1, "form was submitted {} times", fake.submissions().len());
    Ok((r, elapsed))
}

fn end_to_end() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("e2e.jsonl");
    let (r, elapsed) = run_form_fill(path.clone())?;
    ensure!(r.status == SessionStatus::CompletedByEnd, "status {}", r.status);
    ensure!(r.steps.len() <= E2E_MAX_STEPS, "{} steps", r.steps.len());
    let t = read_transcript(&path).map_err(|e| format!("transcript invalid: {e}"))?;
    ensure!(t.steps == r.steps, "transcript differs from the returned records");
    ensure!(elapsed < E2E_BUDGET, "took {elapsed:?}");
    Ok(format!("{} steps, {}, transcript valid, {elapsed:?}", r.steps.len(), r.status))
}

fn repair_loop() -> Verdict {
    let cmd = parse_command("Click [13]").map_err(|e| e.to_string())?;
    let valid = action_json("Click", r#"{"number":13}"#);
    let pair = pair_for(map_of(20));
    let config = PipelineConfig {
        max_json_repairs: MAX_JSON_REPAIRS,
        ..PipelineConfig::default()
    };
    let assist = |replies: Vec<String>| {
        let b = ScriptedBackend::new(Vec::<String>::new(), replies);
        let out = assistant_step(&b.assistant, &config, &cmd, &pair);
        (out, b.assistant.calls())
    };

    let (out, calls) = assist(vec!["{\"function\": \"Click\", ".into(), valid.clone()]);
    ensure!(out == Ok(to_action(&cmd)), "malformed then valid: {out:?}");
    ensure!(calls == 2, "malformed then valid took {calls} attempts");

    let (out, calls) = assist(vec!["{".into(), "Click [13]".into(), "{\"function\":".into(), valid]);
    ensure!(
        matches!(out, Err(PipelineError::RepairExhausted(_))),
        "three malformed replies gave {out:?}"
    );
    ensure!(calls == 3, "three malformed replies took {calls} attempts");

    let (out, _) = assist(vec![action_json("Click", r#"{"number":14}"#)]);
    ensure!(
        matches!(&out, Err(PipelineError::DecisionDrift { got: ActionRequest::Click { .. }, .. })),
        "drifted reply gave {out:?}"
    );
    Ok("succeeds at attempt 2, exhausts after 3, drift rejected".into())
}

fn self_correction() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fake = start_fake(None);
    let b = ScriptedBackend::new(["Click [99]", "END"], [action_json("Click", r#"{"number":99}"#)]);
    let cfg = SessionConfig {
        start_url: Some(page_url("form")),
        ..SessionConfig::new("press the missing button", dir.path().join("sc.jsonl"))
    };
    let mut driver = connect(&fake);
    let r = run_session(&cfg, &pipeline(&b), &mut driver, &SessionControl::new());
    ensure!(r.steps.len() == 2, "{} records", r.steps.len());
    ensure!(
        matches!(r.steps[0].outcome, Outcome::ValidationFailed(_)),
        "first record is {}",
        r.steps[0].outcome
    );
    let failure = format!("1. Click [99] -> {}", r.steps[0].outcome);
    let rendered = render_history(&r.steps[..1]);
    ensure!(rendered.contains(&failure), "history {rendered:?}");
    let prompts = b.controller.prompts();
    let seen = prompts
        .get(1)
        .map(|p| p.iter().filter_map(PromptPart::as_text).any(|t| t.contains(&failure)))
        .unwrap_or(false);
    ensure!(seen, "step 2 prompt does not mention the failure");
    read_transcript(&cfg.transcript_path).map_err(|e| format!("transcript invalid: {e}"))?;
    Ok(format!("2 records; step 2 history shows \"{failure}\""))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut texts = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("run-{i}.jsonl"));
        run_form_fill(path.clone())?;
        texts.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
    }
    let (a, b) = (without_timestamps(&texts[0]), without_timestamps(&texts[1]));
    ensure!(!a.is_empty(), "empty transcript");
    ensure!(a == b, "transcripts differ beyond timestamps");
    ensure!(texts[0] != a, "timestamps were not stripped");
    Ok(format!("{} lines identical modulo timestamps", a.lines().count()))
}

fn main() {
    let checks: [Check; 7] = [
        ("grammar round-trip", grammar_round_trip),
        ("golden action bytes", golden_bytes),
        ("label determinism", label_determinism),
        ("end-to-end scripted session", end_to_end),
        ("repair loop", repair_loop),
        ("self-correction feed-forward", self_correction),
        ("determinism harness", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let verdict = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

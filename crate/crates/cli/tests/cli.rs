use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn dptool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dptool"))
        .args(args)
        .env("DPTOOL_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn report(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    v["report"].clone()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn f64_at(v: &Value, pointer: &str) -> f64 {
    v.pointer(pointer)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("no number at {pointer}: {v}"))
}

#[test]
fn validate_exit_codes() {
    let ok = dptool(&["validate", path_str(&fixture("recidivism.json"))]);
    assert_eq!(code(&ok), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture("recidivism.json"))
        .unwrap()
        .replace("[[0.5, 0.0], [0.0, 0.5]]", "[[0.4, 0.0], [0.0, 0.5]]");
    std::fs::write(&bad, text).unwrap();
    let out = dptool(&["validate", path_str(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("JOINT_NOT_NORMALIZED"));

    assert_eq!(code(&dptool(&["validate", "/nonexistent/problem.json"])), 64);
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    assert_eq!(code(&dptool(&["validate", path_str(&garbage)])), 64);
}

#[test]
fn analyze_revealing_recidivism() {
    let out = dptool(&["analyze", path_str(&fixture("recidivism.json"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert!((f64_at(&r, "/benchmark") - 0.35).abs() < 1e-12);
    assert!(f64_at(&r, "/baseline").abs() < 1e-12);
    assert!((f64_at(&r, "/value_of_information") - 0.35).abs() < 1e-12);
    assert!((f64_at(&r, "/thresholds/intervals/0/upper") - 12.0 / 19.0).abs() < 1e-12);
    assert_eq!(r["certainty_optimal"]["recid"], "detain");
}

#[test]
fn analyze_voting_and_uninformative() {
    let r = report(&dptool(&["analyze", path_str(&fixture("voting.json"))]));
    assert_eq!(f64_at(&r, "/value_of_information"), 0.0);
    let codes: Vec<&str> = r["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w["code"].as_str().unwrap())
        .collect();
    assert!(codes.contains(&"DEGENERATE"));

    let r = report(&dptool(&["analyze", path_str(&fixture("uninformative.json"))]));
    assert!((f64_at(&r, "/benchmark") - f64_at(&r, "/baseline")).abs() < 1e-12);
}

#[test]
fn analyze_reports_properness_for_belief_reports() {
    let r = report(&dptool(&[
        "analyze",
        path_str(&fixture("belief_report.json")),
        "--grid",
        "10",
    ]));
    assert_eq!(r["properness"]["incentive"]["verdict"], "strict");
    assert_eq!(r["properness"]["evaluation"]["verdict"], "strict");
}

#[test]
fn analyze_writes_only_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = dptool(&[
        "analyze",
        path_str(&fixture("recidivism.json")),
        "--out",
        path_str(&target),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["manifest"]["problem_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_problem_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture("recidivism.json"))
        .unwrap()
        .replace("0.5, 0.0]", "0.4, 0.0]");
    std::fs::write(&bad, text).unwrap();
    assert_eq!(code(&dptool(&["analyze", path_str(&bad)])), 1);
    assert_eq!(code(&dptool(&["audit", path_str(&bad)])), 1);
}

#[test]
fn audit_verdicts_and_exit_codes() {
    let well = dptool(&["audit", path_str(&fixture("recidivism_prediction_confidence.json"))]);
    assert_eq!(code(&well), 0);
    assert!(stdout(&well).starts_with("verdict: well_defined"));

    let ill = dptool(&["audit", path_str(&fixture("recidivism_feature_confidence.json"))]);
    assert_eq!(code(&ill), 2);
    assert!(stdout(&ill).contains("ill_defined"));

    let voting = dptool(&["audit", path_str(&fixture("voting_original.json")), "--format", "json"]);
    assert_eq!(code(&voting), 2);
    let r = report(&voting);
    assert_eq!(r["audit"]["verdict"], "degenerate");
    assert!(r["deception"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w["code"] == "DISCLOSURE_AMBIGUOUS"));

    assert_eq!(code(&dptool(&["audit", "/nonexistent.json"])), 64);
}

#[test]
fn audit_reports_multiplicity_flip() {
    let out = dptool(&[
        "audit",
        path_str(&fixture("recidivism_multiplicity.json")),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 2);
    let r = report(&out);
    let signals = r["multiplicity"]["signals"].as_array().unwrap();
    let recid = signals.iter().find(|s| s["signal"] == "pred_recid").unwrap();
    assert!((f64_at(recid, "/min") - 0.625).abs() < 1e-12);
    assert_eq!(recid["action_flips"], true);
}

#[test]
fn audit_output_has_no_ansi_when_disabled() {
    let out = dptool(&["audit", path_str(&fixture("recidivism_feedback.json"))]);
    assert_eq!(code(&out), 0);
    assert!(!stdout(&out).contains('\u{1b}'));
    assert!(stdout(&out).contains("LEARNABLE_IN_THE_LIMIT"));
}

#[test]
fn simulate_exact_rational_and_signal_ignoring() {
    let problem = fixture("recidivism_mismatched.json");
    let r = report(&dptool(&[
        "simulate",
        path_str(&problem),
        "--exact",
        "--rule",
        "incentive",
    ]));
    assert!((f64_at(&r, "/metrics/behavioral") - f64_at(&r, "/metrics/benchmark")).abs() < 1e-12);

    let agent = fixture("agents/ignores_signal.json");
    let r = report(&dptool(&[
        "simulate",
        path_str(&problem),
        "--exact",
        "--rule",
        "incentive",
        "--agent",
        path_str(&agent),
    ]));
    assert!((f64_at(&r, "/metrics/behavioral") - f64_at(&r, "/metrics/baseline")).abs() < 1e-12);
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let target = dir.path().join(name);
        let out = dptool(&[
            "simulate",
            path_str(&fixture("recidivism_mismatched.json")),
            "--agent",
            path_str(&fixture("agents/noisy.json")),
            "--trials",
            "500",
            "--seed",
            seed,
            "--out",
            path_str(&target),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read(target).unwrap()
    };
    assert_eq!(run("a.csv", "42"), run("b.csv", "42"));
    assert_ne!(run("a.csv", "42"), run("c.csv", "43"));
}

#[test]
fn simulate_rejects_invalid_agent() {
    let dir = tempfile::tempdir().unwrap();
    let agent = dir.path().join("agent.json");
    std::fs::write(&agent, r#"{"lapse_rate": 2.0}"#).unwrap();
    let out = dptool(&[
        "simulate",
        path_str(&fixture("recidivism.json")),
        "--agent",
        path_str(&agent),
    ]);
    assert_eq!(code(&out), 1);
    std::fs::write(&agent, r#"{"unknown_field": 1}"#).unwrap();
    let out = dptool(&[
        "simulate",
        path_str(&fixture("recidivism.json")),
        "--agent",
        path_str(&agent),
    ]);
    assert_eq!(code(&out), 1);
}

fn simulate_to(dir: &Path, problem: &Path, trials: &str, seed: &str) -> PathBuf {
    let target = dir.join(format!("sim-{seed}.csv"));
    let out = dptool(&[
        "simulate",
        path_str(problem),
        "--trials",
        trials,
        "--seed",
        seed,
        "--out",
        path_str(&target),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    target
}

#[test]
fn score_rational_roundtrip_has_no_loss() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("recidivism.json");
    let data = simulate_to(dir.path(), &problem, "10000", "5");
    let out = dptool(&[
        "score",
        path_str(&problem),
        path_str(&data),
        "--decompose",
        "--rule",
        "incentive",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    assert!(f64_at(&r, "/decomposition/total_loss").abs() < 0.02);
}

#[test]
fn score_always_release_loses_everything() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("release.csv");
    let mut csv = String::from("participant_id,trial_index,condition,signal,action,state\n");
    for i in 0..100 {
        let (signal, state) = if i % 2 == 0 {
            ("pred_recid", "recid")
        } else {
            ("pred_not_recid", "not_recid")
        };
        csv.push_str(&format!("p{},{i},c,{signal},release,{state}\n", i % 5));
    }
    std::fs::write(&data, csv).unwrap();
    let out = dptool(&[
        "score",
        path_str(&fixture("recidivism.json")),
        path_str(&data),
        "--decompose",
    ]);
    assert_eq!(code(&out), 0);
    assert!((f64_at(&report(&out), "/decomposition/total_loss") - 1.0).abs() < 1e-12);
}

#[test]
fn score_voting_exits_three_with_raw_scores() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("voting.json");
    let data = simulate_to(dir.path(), &problem, "200", "1");
    let out = dptool(&["score", path_str(&problem), path_str(&data), "--decompose"]);
    assert_eq!(code(&out), 3);
    let r = report(&out);
    assert_eq!(f64_at(&r, "/scores/delta"), 0.0);
    assert!(r["scores"]["behavioral"].is_number());
    assert!(r["decomposition"].is_null());
}

#[test]
fn score_rejects_malformed_rows_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(
        &data,
        "participant_id,trial_index,condition,signal,action,state\np1,0,c,pred_recid,detain,recid\np1,1,c,pred_recid,jail,recid\n",
    )
    .unwrap();
    let out = dptool(&["score", path_str(&fixture("recidivism.json")), path_str(&data)]);
    assert_eq!(code(&out), 65);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    std::fs::write(&data, "who,what\n1,2\n").unwrap();
    assert_eq!(
        code(&dptool(&[
            "score",
            path_str(&fixture("recidivism.json")),
            path_str(&data)
        ])),
        65
    );
}

#[test]
fn score_by_condition_with_bound_problems() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("two.csv");
    let mut csv = String::from("participant_id,trial_index,condition,signal,action,state\n");
    for i in 0..40 {
        let (signal, state) = if i % 2 == 0 {
            ("pred_recid", "recid")
        } else {
            ("pred_not_recid", "not_recid")
        };
        let condition = if i < 20 { "control" } else { "treated" };
        csv.push_str(&format!("p{i},{i},{condition},{signal},detain,{state}\n"));
    }
    std::fs::write(&data, csv).unwrap();
    let binding = format!("treated={}", path_str(&fixture("recidivism_feedback.json")));
    let out = dptool(&[
        "score",
        path_str(&fixture("recidivism.json")),
        path_str(&data),
        "--by-condition",
        "--condition-problem",
        &binding,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&out);
    let control = &r["by_condition"]["control"];
    let treated = &r["by_condition"]["treated"];
    assert_eq!(control["records"], 20);
    assert!((f64_at(control, "/decomposition/benchmark") - 0.35).abs() < 1e-12);
    assert!((f64_at(treated, "/decomposition/benchmark") - 0.35).abs() > 1e-6);
}

#[test]
fn score_bootstrap_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("recidivism_mismatched.json");
    let data = simulate_to(dir.path(), &problem, "300", "9");
    let run = |parallel: bool| {
        let mut args = vec![
            "score",
            path_str(&problem),
            path_str(&data),
            "--decompose",
            "--bootstrap",
            "100",
            "--seed",
            "4",
        ];
        if parallel {
            args.push("--parallel");
        }
        report(&dptool(&args))
    };
    let serial = run(false);
    assert_eq!(serial, run(false));
    assert_eq!(serial["bootstrap"], run(true)["bootstrap"]);
}

#[test]
fn report_bodies_are_identical_across_runs() {
    let problem = fixture("recidivism_mismatched.json");
    let args = ["analyze", path_str(&problem)];
    assert_eq!(report(&dptool(&args)), report(&dptool(&args)));
}

#[test]
fn sweep_writes_csv_rows() {
    let out = dptool(&[
        "sweep",
        path_str(&fixture("recidivism.json")),
        "--agents",
        path_str(&fixture("agents/sweep_grid.json")),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("updating_exponent,softmax_temperature,lapse_rate"));
    assert_eq!(lines.count(), 18);
}

#[test]
fn learn_requires_feedback() {
    let out = dptool(&["learn", path_str(&fixture("recidivism.json"))]);
    assert_eq!(code(&out), 1);
    let out = dptool(&[
        "learn",
        path_str(&fixture("recidivism_feedback.json")),
        "--trials",
        "50",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(report(&out)["curve"].as_array().unwrap().len(), 50);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&dptool(&["analyze", "--bogus"])), 64);
    assert_eq!(code(&dptool(&["--version"])), 0);
}

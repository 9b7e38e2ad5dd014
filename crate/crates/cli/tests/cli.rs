use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn govtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_govtrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small agentic run written to `dir/run`.
fn agentic_run(dir: &TempDir) -> std::path::PathBuf {
    let config = dir.path().join("agentic.json");
    fs::write(&config, r#"{"architecture":"agentic_ai","event_count":120,"seed":11}"#).unwrap();
    let out_dir = dir.path().join("run");
    let out = govtrace(&["simulate", "--config", p(&config), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    out_dir
}

#[test]
fn validate_reports_line_numbers_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let run = agentic_run(&dir);
    let trace = run.join("trace.jsonl");
    assert_eq!(code(&govtrace(&["validate", p(&trace)])), 0);

    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut third: Value = serde_json::from_str(&lines[2]).unwrap();
    third["override"].as_object_mut().unwrap().remove("override_occurred");
    lines[2] = third.to_string();
    let broken = dir.path().join("broken.jsonl");
    fs::write(&broken, lines.join("\n")).unwrap();

    let out = govtrace(&["validate", p(&broken)]);
    assert_eq!(code(&out), 1);
    let report = stdout(&out);
    assert!(report.contains("line 3"), "{report}");
    assert!(report.contains("override_occurred"), "{report}");

    let json: Value = serde_json::from_slice(&govtrace(&["validate", p(&broken), "--format", "json"]).stdout).unwrap();
    assert_eq!(json["invalid"][0]["line"], 3);

    assert_eq!(code(&govtrace(&["validate", "/no/such/trace.jsonl"])), 2);
}

#[test]
fn verify_locates_tampering_and_truncation() {
    let dir = TempDir::new().unwrap();
    let run = agentic_run(&dir);
    let trace = run.join("trace.jsonl");
    let head = run.join("trace.head");
    assert_eq!(code(&govtrace(&["verify", p(&trace), "--head", p(&head)])), 0);

    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut event: Value = serde_json::from_str(&lines[40]).unwrap();
    event["outcome"]["decision_label"] = "decline".into();
    lines[40] = event.to_string();
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(&tampered, lines.join("\n")).unwrap();
    let out = govtrace(&["verify", p(&tampered)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("index 40"), "{}", stdout(&out));

    let truncated = dir.path().join("truncated.jsonl");
    fs::write(&truncated, text.lines().take(100).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(code(&govtrace(&["verify", p(&truncated)])), 0);
    let out = govtrace(&["verify", p(&truncated), "--head", p(&head)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("MISMATCH"));
}

#[test]
fn dag_and_sufficiency_read_a_simulated_manifest() {
    let dir = TempDir::new().unwrap();
    let run = agentic_run(&dir);
    let manifest = run.join("manifest.json");

    let out = govtrace(&["dag", p(&manifest), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["nodes"], 360);
    assert_eq!(report["roots"], 120);
    assert_eq!(report["attributed"].as_array().unwrap().len(), 240);

    let out = govtrace(&["dag", p(&manifest), "--attribute", "no-such-component"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("UNKNOWN_COMPONENT"));

    // Dropping the sidecars leaves every child agent's events orphaned.
    let bare = run.join("bare.json");
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    for agent in doc["agents"].as_array_mut().unwrap() {
        let agent = agent.as_object_mut().unwrap();
        agent.remove("delegations");
        agent.remove("provenance");
    }
    fs::write(&bare, doc.to_string()).unwrap();
    assert_eq!(code(&govtrace(&["dag", p(&bare)])), 1);

    let out = govtrace(&["sufficiency", p(&manifest), "--format", "json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["field_population"], 1.0);
    assert_eq!(report["delegation_coverage"], 1.0);
    assert_eq!(report["epistemic_flag"], "structural-completeness-only");

    let out = govtrace(&["sufficiency", p(&run.join("trace.jsonl"))]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("structural-completeness-only"));
}

#[test]
fn coverage_defaults_to_the_reference_matrix() {
    let out = govtrace(&["coverage"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let fillable = text.lines().find(|l| l.starts_with("Fillable ratio")).unwrap();
    for v in ["0.83", "0.17", "0.50", "0.00"] {
        assert!(fillable.contains(v), "{fillable}");
    }
    let opaque = text.lines().find(|l| l.starts_with("Opaque ratio")).unwrap();
    assert!(opaque.contains("0.33"));

    let out = govtrace(&["coverage", "--extensions", "--format", "json"]);
    assert_eq!(code(&out), 0);
    serde_json::from_slice::<Value>(&out.stdout).unwrap();
}

#[test]
fn coverage_flags_a_user_matrix_that_breaks_the_gradient() {
    let dir = TempDir::new().unwrap();
    let architectures = ["deterministic_rules", "classical_ml_hitl", "hybrid_ml_rules", "agentic_ai"];
    let properties = [
        "decision_context",
        "decision_logic",
        "decision_boundary",
        "decision_quality_indicators",
        "override_escalation_record",
        "temporal_metadata",
    ];
    let cells: Vec<Value> = architectures
        .iter()
        .flat_map(|a| {
            properties.map(|prop| serde_json::json!({"architecture": a, "property": prop, "rating": "fillable"}))
        })
        .collect();
    let uniform = serde_json::json!({ "cells": cells });
    let path = dir.path().join("flat.json");
    fs::write(&path, uniform.to_string()).unwrap();
    let out = govtrace(&["coverage", p(&path)]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&path, r#"{"cells": []}"#).unwrap();
    let out = govtrace(&["coverage", p(&path)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("MISSING_CELL"));
}

#[test]
fn simulate_worked_example_shows_the_induced_false_negative() {
    let out = govtrace(&["simulate", "--preset", "worked-example", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let tracked = report["result"]["tracked_events"].as_array().unwrap();
    let fraud = tracked
        .iter()
        .find(|t| t["induced_false_negative"] == true)
        .expect("an induced false negative is tracked");
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 0.005;
    assert!(close(&fraud["clean_score"], 0.85));
    assert!(close(&fraud["served_score"], 0.62));
    assert!(close(&fraud["review_threshold"], 0.75));

    let text = stdout(&govtrace(&["simulate", "--preset", "worked-example"]));
    assert!(text.contains("0.85 clean, 0.62 served vs threshold 0.75"), "{text}");
}

#[test]
fn monitor_round_trip_through_a_baseline_file() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("stale");
    let out = govtrace(&["simulate", "--preset", "stale-feature", "--out", p(&run)]);
    assert_eq!(code(&out), 0);
    let trace = run.join("trace.jsonl");
    let result: Value = serde_json::from_str(&fs::read_to_string(run.join("result.json")).unwrap()).unwrap();
    let onset = result["result"]["fault"]["onset_index"].as_u64().unwrap() as usize;
    let half = (onset / 2).to_string();

    let baseline = dir.path().join("baseline.json");
    let out = govtrace(&["monitor-baseline", p(&trace), "--take", &half, "--out", p(&baseline)]);
    assert_eq!(code(&out), 0);

    let out = govtrace(&["monitor-detect", p(&baseline), p(&trace), "--skip", &half, "--take", &half]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    let after = (onset + 500).to_string();
    let out = govtrace(&["monitor-detect", p(&baseline), p(&trace), "--skip", &after, "--format", "json"]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report["alarms"].as_array().unwrap().is_empty());

    let out = govtrace(&["monitor-detect", p(&baseline), p(&trace), "--take", "10"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&govtrace(&[])), 2);
    assert_eq!(code(&govtrace(&["no-such-command"])), 2);
    assert_eq!(code(&govtrace(&["simulate"])), 2);
    assert_eq!(code(&govtrace(&["simulate", "--preset", "nope"])), 2);
    assert_eq!(code(&govtrace(&["verify"])), 2);
}

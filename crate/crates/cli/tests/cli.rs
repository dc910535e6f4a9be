use std::path::Path;
use std::process::{Command, Output};

fn escalation(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escalation"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scenarios_list_shows_ids_and_deadlines() {
    let o = escalation(&["scenarios", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 8);
    for (id, deadline) in [
        ("v7_resource", "15 turns"),
        ("v10_standoff_crisis", "12 turns"),
        ("v7_alliance", "none"),
    ] {
        let line = text.lines().find(|l| l.starts_with(id)).unwrap();
        assert!(line.contains(deadline), "{line}");
    }
}

#[test]
fn run_then_replay_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("game.jsonl");
    let o = escalation(&[
        "run",
        "--agent-a",
        "random:3",
        "--agent-b",
        "deceiver:70:175",
        "--scenario",
        "v7_resource",
        "--seed",
        "5",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = escalation(&["replay", path(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("content hash: ok"));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut turn: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    turn["game_state"]["balance_after"] = serde_json::json!(4.5);
    lines[1] = turn.to_string();
    std::fs::write(&out, lines.join("\n") + "\n").unwrap();
    let o = escalation(&["replay", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn run_without_out_streams_identical_jsonl() {
    let args = ["run", "--agent-a", "constant:100", "--agent-b", "mirror", "--seed", "9"];
    let (x, y) = (escalation(&args), escalation(&args));
    assert!(x.status.success());
    assert_eq!(x.stdout, y.stdout);
    let lines: Vec<serde_json::Value> = stdout(&x).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["type"], "header");
    assert_eq!(lines.last().unwrap()["type"], "summary");
}

#[test]
fn tournament_and_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"agents": ["constant:100", "random", "deceiver:70:450"], "scenarios": ["v7_alliance", "v10_standoff_crisis"]}"#,
    )
    .unwrap();
    let out = dir.path().join("runs");
    let o = escalation(&[
        "tournament",
        path(&plan),
        "--out",
        path(&out),
        "--parallel",
        "3",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("deceiver:70:450"));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 22);

    let md = escalation(&["analyze", "--in", path(&out), "--per-model", "--format", "md"]);
    assert!(md.status.success());
    assert!(stdout(&md).contains("## Prediction accuracy"));
    let csv = escalation(&[
        "analyze",
        "--in",
        path(&out),
        "--format",
        "csv",
        "--metric",
        "consistency,thresholds",
    ]);
    let text = stdout(&csv);
    assert_eq!(text.lines().next(), Some("metric,model,stat,value"));
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.starts_with("consistency,") || l.starts_with("thresholds,")));
}

#[test]
fn tournament_dry_run_lists_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"agents": ["mirror", "climber:1", "constant:0"]}"#).unwrap();
    let o = escalation(&["tournament", path(&plan), "--dry-run"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 21);
}

#[test]
fn validate_config_accepts_good_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("engine.json");
    std::fs::write(&good, r#"{"territory_rate": 9.0, "fallback": "repeat_previous"}"#).unwrap();
    assert!(escalation(&["validate-config", path(&good)]).status.success());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"knockout_threshold": -1.0}"#).unwrap();
    let o = escalation(&["validate-config", path(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("knockout_threshold"));

    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"agents": ["constant:Not A Rung"]}"#).unwrap();
    assert!(!escalation(&["validate-config", path(&plan), "--kind", "plan"])
        .status
        .success());
}

#[test]
fn analyze_reports_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = escalation(&["analyze", "--in", path(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no transcripts"));
}

#[test]
fn unknown_agent_spec_is_a_usage_error() {
    let o = escalation(&["run", "--agent-a", "telepath", "--agent-b", "mirror"]);
    assert_eq!(o.status.code(), Some(2));
}

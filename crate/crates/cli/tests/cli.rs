use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE_TEXT: &str =
    "The preference could not be satisfied because the 5 available desks were assigned to other people \
                  with more important preferences: 3 employees due to minimum number of days per week; 1 employee due \
                  to meetings; 1 employee due to 1 working group.";

fn expres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expres")).args(args).output().expect("binary runs")
}

fn scenario_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/scenario1.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn example_week_pipeline_renders_aggregated_text() {
    let dir = TempDir::new().unwrap();
    let inst = scenario_file();
    let sched = dir.path().join("schedule.json");
    let expl = dir.path().join("explanation.json");
    let o = expres(&["solve", s(&inst), "--out", s(&sched)]);
    assert!(o.status.success(), "{o:?}");
    assert!(o.stdout.is_empty());
    let o = expres(&["explain", s(&inst), "--schedule", s(&sched), "--target", "edith_pref_thu", "--out", s(&expl)]);
    assert!(o.status.success(), "{o:?}");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&expl).unwrap()).unwrap();
    assert_eq!(doc["objective"], 8);
    let o = expres(&["render", s(&expl), "--instance", s(&inst), "--aggregate", "--anonymize"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), format!("{EXAMPLE_TEXT}\n"));
}

#[test]
fn schema_violation_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"time_slots": [], "n_desks": 1, "bogus": true}"#).unwrap();
    let o = expres(&["validate", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "input");
}

#[test]
fn validate_clean_fixture() {
    let o = expres(&["validate", s(&scenario_file())]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(expres(&[]).status.code(), Some(2));
    assert_eq!(expres(&["solve", s(&scenario_file()), "--budget", "soon"]).status.code(), Some(2));
    assert_eq!(expres(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn enumeration_is_ordered_and_failures_are_reported() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    let sched = dir.path().join("sched.json");
    assert!(expres(&["generate", "--agents", "10", "--seed", "4", "--out", s(&inst)]).status.success());
    let o = expres(&["solve", s(&inst), "--out", s(&sched), "--budget", "20s"]);
    assert!(o.status.success(), "{o:?}");
    let result: Value = serde_json::from_str(&std::fs::read_to_string(&sched).unwrap()).unwrap();
    let (mut explained, mut unexplained) = (0, 0);
    for target in result["unsat"].as_array().unwrap() {
        let target = target.as_str().unwrap();
        let o = expres(&[
            "explain",
            s(&inst),
            "--schedule",
            s(&sched),
            "--target",
            target,
            "--all",
            "--max",
            "1000",
            "--budget",
            "30s",
        ]);
        match o.status.code() {
            Some(0) => {
                let list: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
                assert!(!list.is_empty());
                let costs: Vec<u64> = list.iter().map(|e| e["objective"].as_u64().unwrap()).collect();
                assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
                explained += 1;
            }
            Some(1) => {
                let err: Value = serde_json::from_slice(&o.stderr).unwrap();
                assert_eq!(err["error"], "no_explanation");
                assert_eq!(err["target"], target);
                assert!(o.stdout.is_empty());
                unexplained += 1;
            }
            other => panic!("unexpected exit {other:?}: {o:?}"),
        }
    }
    assert!(explained > 0 && unexplained > 0, "{explained} explained, {unexplained} not");
}

#[test]
fn satisfied_target_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let inst = scenario_file();
    let sched = dir.path().join("schedule.json");
    assert!(expres(&["solve", s(&inst), "--out", s(&sched)]).status.success());
    let o = expres(&["explain", s(&inst), "--schedule", s(&sched), "--target", "bob_min"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible() {
    let a = expres(&["generate", "--agents", "10", "--seed", "9"]);
    let b = expres(&["generate", "--agents", "10", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    std::fs::write(&inst, &a.stdout).unwrap();
    let x = expres(&["solve", s(&inst)]);
    let y = expres(&["solve", s(&inst)]);
    assert!(x.status.success());
    assert_eq!(x.stdout, y.stdout);
}

#[test]
fn detailed_render_of_an_enumeration() {
    let dir = TempDir::new().unwrap();
    let inst = scenario_file();
    let sched = dir.path().join("schedule.json");
    let all = dir.path().join("all.json");
    assert!(expres(&["solve", s(&inst), "--out", s(&sched)]).status.success());
    let o = expres(&[
        "explain",
        s(&inst),
        "--schedule",
        s(&sched),
        "--target",
        "edith_pref_thu",
        "--all",
        "--out",
        s(&all),
    ]);
    assert!(o.status.success(), "{o:?}");
    let o = expres(&["render", s(&all), "--instance", s(&inst)]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.matches("(preference ").count(), 24 * 5);
    let o = expres(&["render", s(&all), "--instance", s(&inst), "--aggregate"]);
    assert_eq!(stdout(&o).lines().count(), 24);
}

#[test]
fn custom_template_bundle() {
    let dir = TempDir::new().unwrap();
    let inst = scenario_file();
    let sched = dir.path().join("schedule.json");
    let expl = dir.path().join("e.json");
    let bundle = dir.path().join("terse.tmpl");
    let default =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/templates/default.tmpl")).unwrap();
    std::fs::write(&bundle, default.replace("due to meetings", "because of meetings")).unwrap();
    assert!(expres(&["solve", s(&inst), "--out", s(&sched)]).status.success());
    assert!(expres(&["explain", s(&inst), "--schedule", s(&sched), "--target", "edith_pref_thu", "--out", s(&expl)])
        .status
        .success());
    let o = expres(&["render", s(&expl), "--instance", s(&inst), "--aggregate", "--template-bundle", s(&bundle)]);
    assert!(stdout(&o).contains("Alice because of meetings"));
    std::fs::write(&bundle, "[template frame]\nonly a frame\n").unwrap();
    let o = expres(&["render", s(&expl), "--instance", s(&inst), "--aggregate", "--template-bundle", s(&bundle)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bench.json");
    let out = dir.path().join("results.csv");
    std::fs::write(&config, r#"{"agent_counts": [10], "instances": 2, "budget_ms": 5000}"#).unwrap();
    let o = expres(&["bench", "--config", s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("instance_id,seed,n_agents,target_type,status,t_first_ms,n_explanations,dist_mean,dist_std,dist_min,dist_max")
    );
    assert!(lines.count() >= 2);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn drinkctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drinkctx"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = drinkctx(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_SPEC: &str = r#"{
  "seed": 5,
  "n_participants": 10,
  "nights_per_participant": 4,
  "effects": [{"driver": {"kind": "task", "task": "friends_two"}, "modality": "ACC", "d": 1.0}],
  "exclusions": {"unavailable_sensor_data": 2, "edge_time": 2, "out_of_region": 1}
}"#;

#[test]
fn stage_by_stage_commands() {
    let d = tempfile::tempdir().unwrap();
    let at = |name: &str| d.path().join(name);
    fs::write(at("spec.json"), SMALL_SPEC).unwrap();

    ok(&["synth", "--spec", p(&at("spec.json")), "--out", p(&at("raw"))]);
    let ingest = ok(&["ingest", "--data-dir", p(&at("raw")), "--out", p(&at("bundle"))]);
    assert!(ingest.contains("10 participants"), "{ingest}");
    assert!(at("bundle/manifest.json").is_file());

    ok(&["extract", "--cohort", p(&at("bundle")), "--out", p(&at("slots.csv"))]);
    let matched = ok(&[
        "match",
        "--cohort",
        p(&at("bundle")),
        "--slots",
        p(&at("slots.csv")),
        "--out",
        p(&at("events.csv")),
        "--tally",
        p(&at("tally.json")),
        "--geofence",
        "46.0,46.2,11.0,11.3",
    ]);
    assert!(matched.contains("2 unavailable + 2 edge + 1 out-of-region"), "{matched}");
    let tally: serde_json::Value = serde_json::from_str(&fs::read_to_string(at("tally.json")).unwrap()).unwrap();
    assert_eq!(tally["retained"], 75);

    ok(&["label", "--events", p(&at("events.csv")), "--task", "friends_two", "--out", p(&at("f2.csv"))]);
    ok(&[
        "label", "--events", p(&at("events.csv")), "--task", "people_three", "--threshold", "3", "--out",
        p(&at("p3.csv")),
    ]);
    assert!(fs::read_to_string(at("p3.csv")).unwrap().lines().nth(1).unwrap().starts_with("people_three@g3,"));

    let stats = ok(&[
        "stats", "--labeled", p(&at("f2.csv")), "--contrast", "without-vs-with", "--metric", "d", "--top", "5",
        "--out", p(&at("rank.csv")),
    ]);
    assert_eq!(fs::read_to_string(at("rank.csv")).unwrap().lines().count(), 6);
    assert!(stats.contains("acc_"), "{stats}");

    let eval = ok(&[
        "--seed", "3", "evaluate", "--labeled", p(&at("f2.csv")), "--model", "forest", "--group", "ACC", "--k", "3",
        "--iterations", "2", "--trees", "20", "--out", p(&at("result.json")),
    ]);
    assert!(eval.starts_with("friends_two forest: "), "{eval}");
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(at("result.json")).unwrap()).unwrap();
    assert_eq!(result["config"]["seed"], 3);
    assert_eq!(result["config"]["group"], "ACC");
    assert_eq!(result["n_features"], 150);

    let sweep = ok(&[
        "sweep", "--events", p(&at("events.csv")), "--task", "friends_three", "--g", "1..3", "--model", "naive_bayes",
        "--k", "3", "--iterations", "2", "--out", p(&at("sweep.json")),
    ]);
    assert_eq!(sweep.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| g")).count(), 3);

    let imp = ok(&[
        "importance", "--labeled", p(&at("f2.csv")), "--top", "5", "--k", "3", "--iterations", "2", "--trees", "20",
        "--out", p(&at("imp.json")),
    ]);
    assert!(imp.contains("| ACC |"), "{imp}");

    let desc = ok(&["describe", "--labeled", p(&at("f2.csv")), "--by", "sex"]);
    assert!(desc.contains("| woman | 0 | without |") || desc.contains("| man | 0 | without |"), "{desc}");
}

#[test]
fn run_is_identical_across_worker_counts_and_verifies() {
    let d = tempfile::tempdir().unwrap();
    let spec: serde_json::Value = serde_json::from_str(SMALL_SPEC).unwrap();
    let config = serde_json::json!({
        "data": {"kind": "synth", "spec": spec},
        "tasks": ["friends_two", "friends_three"],
        "models": [{"kind": "forest", "n_trees": 20}, {"kind": "uniform"}],
        "groups": ["ALL", "ACC"],
        "k": 3,
        "iterations": 2,
        "sweep": {"task": "friends_three", "thresholds": [1, 2]},
        "importance": {"target": "friends_two", "top_n": 5},
        "stats": [{"target": "friends_two", "contrast": {"first": 0, "second": 1}, "metric": "r", "top": 5}]
    });
    let cfg = d.path().join("config.json");
    fs::write(&cfg, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let a = d.path().join("a");
    let b = d.path().join("b");
    let out = ok(&["--config", p(&cfg), "--seed", "7", "--threads", "1", "run", "--out", p(&a)]);
    assert!(out.contains("friends_three"), "{out}");
    ok(&["--config", p(&cfg), "--seed", "7", "--threads", "3", "run", "--out", p(&b)]);
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    assert!(a.join("tables/ablation_forest.md").is_file());

    let verified = ok(&["verify", "--bundle", p(&a), "--rerun-into", p(&d.path().join("c"))]);
    assert!(verified.contains("rerun reproduced the bundle"), "{verified}");

    fs::write(a.join("events.csv"), "tampered\n").unwrap();
    let bad = drinkctx(&["verify", "--bundle", p(&a)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("modified: events.csv"));
}

#[test]
fn input_errors_exit_with_code_1() {
    let d = tempfile::tempdir().unwrap();
    let missing = drinkctx(&["ingest", "--data-dir", p(&d.path().join("nope")), "--out", p(&d.path().join("o"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("participants.csv"));

    let usage = drinkctx(&["stats", "--metric", "q"]);
    assert_eq!(usage.status.code(), Some(1));

    fs::write(d.path().join("bad.json"), "{ not json").unwrap();
    let bad_cfg = drinkctx(&["--config", p(&d.path().join("bad.json")), "run", "--out", p(&d.path().join("r"))]);
    assert_eq!(bad_cfg.status.code(), Some(1));

    assert!(drinkctx(&["--help"]).status.success());
}

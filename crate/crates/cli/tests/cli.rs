use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rvrp_core::model::Instance;
use rvrp_core::pipeline::{run, Preset, RunConfig, SolutionFile};
use rvrp_core::sp::{brute_force_sp, build_sp, Column, SideConstraints};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn rvrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvrp")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn tiny_instance_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvrp(&["solve", path(&fixture("tiny.json")), "-o", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let instance = Instance::from_json(&std::fs::read_to_string(fixture("tiny.json")).unwrap()).unwrap();
    let pool = run(&instance, &RunConfig::preset(Preset::Exact)).unwrap().pool;
    let cols: Vec<Column> = pool
        .routes()
        .iter()
        .enumerate()
        .map(|(id, r)| Column {
            id,
            cost: r.cost.milli(),
            orders: r.orders.iter().map(|o| o.index()).collect(),
            mode: 0,
        })
        .collect();
    let best = brute_force_sp(&build_sp(instance.orders.len(), cols, SideConstraints::default()).unwrap()).unwrap();

    let file: SolutionFile =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(file.total_cost.milli(), best.objective);
    let mut covered: Vec<String> = file.routes.iter().flat_map(|r| r.orders.clone()).collect();
    covered.sort();
    assert_eq!(covered, ["c1", "e1", "n1", "n2"]);
    assert!(dir.path().join("routes.csv").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn malformed_instance_is_invalid_input() {
    let out = rvrp(&["validate", path(&fixture("malformed.json"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("malformed.json:5:"), "{err}");
}

#[test]
fn tiny_time_limit_reports_incumbent_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("medium.json");
    assert_eq!(code(&rvrp(&["gen", path(&fixture("medium_profile.json")), path(&inst)])), 0);
    let out = rvrp(&["solve", path(&inst), "-o", path(&dir.path().join("out")), "--time-limit", "0.001"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "feasible_with_bound");
    assert!(report["lower_bound"].as_f64().unwrap() <= report["total_cost"].as_f64().unwrap());
}

#[test]
fn route_violations_are_named() {
    let out = rvrp(&["validate-route", path(&fixture("tiny.json")), path(&fixture("overweight_route.json"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation=capacity"));

    let out = rvrp(&["validate-route", path(&fixture("hos.json")), path(&fixture("hos_route.json"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("violation=hos"));

    let out = rvrp(&["validate-route", path(&fixture("hos_wide.json")), path(&fixture("hos_route.json"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("  rest ").count(), 1);
}

#[test]
fn generated_instances_echo_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = rvrp(&["--output-format", "structured", "gen", path(&fixture("profile.json")), path(&a)]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary = &doc["data"]["summary"];
    assert_eq!(summary["orders"], 24);
    assert_eq!(summary["origins"], 2);
    assert_eq!(summary["destinations"], 6);

    assert_eq!(code(&rvrp(&["gen", path(&fixture("profile.json")), path(&b)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = rvrp(&["gen", path(&fixture("bad_profile.json")), path(&dir.path().join("c.json"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("impossible"));
}

#[test]
fn runs_append_manifest_lines() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("runs.jsonl");
    for _ in 0..2 {
        let out = rvrp(&[
            "--manifest",
            path(&manifest),
            "solve",
            path(&fixture("tiny.json")),
            "-o",
            path(&dir.path().join("out")),
            "--preset",
            "bkk",
            "--seed",
            "5",
        ]);
        assert_eq!(code(&out), 0);
    }
    let text = std::fs::read_to_string(&manifest).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["command"], "solve");
    assert_eq!(lines[0]["run"]["seed"], 5);
    assert_eq!(lines[0]["run"]["preset"], "bkk");
    assert_eq!(lines[0]["run"], lines[1]["run"]);
}

#[test]
fn structured_output_is_one_document() {
    let out = rvrp(&["--output-format", "structured", "validate", path(&fixture("tiny.json"))]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["command"], "validate");
    assert_eq!(doc["exit_code"], 0);
    assert_eq!(doc["data"]["summary"]["orders"], 4);
}

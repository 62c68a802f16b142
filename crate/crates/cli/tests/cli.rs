use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_screenlab"));
    c.env("SCREENLAB_THREADS", "2");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not json ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn strip_wall_time(mut v: Value) -> Value {
    v["runtime"].as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn bad_config_exits_2_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("bilinear-demo")).unwrap().replace("\"resolution\"", "\"resolutoin\"");
    let p = write(dir.path(), "bad.json", &text);
    let o = run(&["check", "--problem", p.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/domain_x/resolutoin"), "{err}");
}

#[test]
fn missing_file_exits_2() {
    let o = run(&["solve", "--problem", "/nonexistent/problem.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn check_passes_on_bilinear() {
    let o = run(&["check", "--problem", config("bilinear-demo").to_str().unwrap(), "--b3-samples", "16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["problem"]["name"], "bilinear-demo");
    assert!(v["conditions"]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn check_fails_on_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ex.json");
    let o = run(&["example", "--name", "example-3-3", "--config-out", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["check", "--problem", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let fails = json_out(&o)["conditions"]["failures"].to_string();
    assert!(fails.contains("b2_goods"), "{fails}");
}

#[test]
fn brute_force_refuses_many_free_goods() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "big.json",
        r#"{
  "dims": { "m": 1, "n": 1 },
  "domain_x": { "lower": [0.0], "upper": [1.0], "resolution": [5] },
  "domain_y": { "lower": [0.0], "upper": [1.0], "resolution": [8] },
  "b": "x1*y1", "cost": "y1^2", "density": "1", "null_good": [0.0]
}"#,
    );
    let o = run(&["solve", "--problem", p.to_str().unwrap(), "--method", "brute"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("brute force"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reports_are_deterministic_up_to_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let args = |r: &Path| {
        vec![
            "solve".to_string(),
            "--problem".into(),
            config("bilinear-demo").display().to_string(),
            "--seed".into(),
            "3".into(),
            "--report".into(),
            r.display().to_string(),
        ]
    };
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(code(&bin().args(args(&a)).output().unwrap()), 0);
    assert_eq!(code(&bin().args(args(&b)).env("SCREENLAB_THREADS", "1").output().unwrap()), 0);
    let read = |p: &Path| serde_json::from_str::<Value>(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (mut ra, mut rb) = (strip_wall_time(read(&a)), strip_wall_time(read(&b)));
    ra["runtime"].as_object_mut().unwrap().remove("threads");
    rb["runtime"].as_object_mut().unwrap().remove("threads");
    assert_eq!(ra, rb);
    assert_eq!(ra["runtime"]["seed"], 3);
    assert_eq!(ra["problem"]["hash"].as_str().unwrap().len(), 64);
}

#[test]
fn curve_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = run(&[
        "solve",
        "--problem",
        config("bilinear-demo").to_str().unwrap(),
        "--curve",
        "3",
        "--curve-out",
        csv.to_str().unwrap(),
        "--curve-samples",
        "11",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("price,profit"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn reduce_writes_config_and_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eff.json");
    let o = run(&["reduce", "--problem", config("reduce-types-demo").to_str().unwrap(), "--mode", "types", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mapping: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("eff.json.mapping.json")).unwrap()).unwrap();
    assert!(mapping.is_object());
    // The effective config is itself a loadable problem.
    let o = run(&["check", "--problem", out.to_str().unwrap(), "--b3-samples", "8"]);
    assert_ne!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reduce_then_solve_matches_original_on_types_demo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eff.json");
    let orig = config("reduce-types-demo");
    assert_eq!(code(&run(&["reduce", "--problem", orig.to_str().unwrap(), "--mode", "types", "--out", out.to_str().unwrap()])), 0);
    let profit = |p: &Path| json_out(&run(&["solve", "--problem", p.to_str().unwrap()]))["solve"]["best_profit"].as_f64().unwrap();
    let (full, reduced) = (profit(&orig), profit(&out));
    assert!((full - reduced).abs() <= 1e-6, "full {full} reduced {reduced}");
}

#[test]
fn verify_accepts_theorem_lists() {
    let o = run(&["verify", "--problem", config("reduce-types-demo").to_str().unwrap(), "--theorem", "lemma-4-3,thm-4-4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ids: Vec<String> = json_out(&o)["theorems"].as_array().unwrap().iter().map(|t| t["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["lemma-4-3", "thm-4-4"]);
    assert_eq!(code(&run(&["verify", "--problem", config("reduce-types-demo").to_str().unwrap(), "--theorem", "nope"])), 2);
}

#[test]
fn unknown_example_exits_2() {
    assert_eq!(code(&run(&["example", "--name", "nope"])), 2);
}

#[test]
fn worked_example_reports_two_optima() {
    let o = run(&["example", "--name", "example-3-3"]);
    assert_eq!(code(&o), 0);
    let v = json_out(&o);
    assert_eq!(v["solve"]["all_optima"].as_array().map(Vec::len), Some(2), "{}", v["solve"]);
    assert_eq!(v["theorems"][0]["id"], "prop-3-1");
    assert_eq!(v["theorems"][0]["verdict"], "pass");
}

//! End-to-end runs of the `fraclab` binary: exit codes, determinism, schema.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn config(name: &str) -> PathBuf {
    manifest().join("configs").join(name)
}

fn fraclab(task: &str, config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab"))
        .arg(task)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn run_to_file(task: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, Value) {
    let mut args = vec!["--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = fraclab(task, config, &args);
    let code = o.status.code().expect("exit code");
    assert!(out.exists(), "no report; stderr: {}", String::from_utf8_lossy(&o.stderr));
    (code, serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap())
}

fn assert_schema_valid(report: &Value) {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(manifest().join("schema/report.schema.json")).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("report does not match the schema: {msgs:?}");
    };
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn every_example_config_passes_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut names: Vec<String> = std::fs::read_dir(manifest().join("configs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    let mut tasks = std::collections::BTreeSet::new();
    for name in names {
        let path = config(&name);
        let text = std::fs::read_to_string(&path).unwrap();
        let task: toml::Table = text.parse().unwrap();
        let task = task["task"].as_str().unwrap().to_string();
        let (code, report) = run_to_file(&task, &path, &dir.path().join(format!("{name}.json")), &[]);
        assert_eq!(code, 0, "{name}");
        assert_schema_valid(&report);
        assert_eq!(report["meta"]["task"], Value::String(task.clone()));
        tasks.insert(task);
    }
    assert_eq!(tasks.len(), 4, "examples cover every task");
}

#[test]
fn riesz_report_carries_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to_file("riesz", &config("riesz_disk.toml"), &dir.path().join("r.json"), &[]);
    assert_eq!(code, 0);
    let r = &report["results"];
    for key in ["lambda1", "c0", "bound", "residual"] {
        assert!(r[key].is_f64(), "{key}");
    }
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["lambda1"].as_f64().unwrap() <= r["bound"].as_f64().unwrap());
    assert!(r["residual"].as_f64().unwrap() <= 1e-8);
}

fn strip_clock(mut v: Value) -> Value {
    v["meta"].as_object_mut().unwrap().remove("wall_clock_seconds");
    v
}

#[test]
fn identical_seeds_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("verify_gn.toml");
    let a = dir.path().join("a.json");
    let text = |p: &Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (_, first) = run_to_file("verify", &cfg, &a, &["--seed", "7"]);
    let once = text(&a);
    run_to_file("verify", &cfg, &a, &["--seed", "7"]);
    assert_eq!(once, text(&a));
    let (_, other) = run_to_file("verify", &cfg, &a, &["--seed", "8"]);
    assert_ne!(strip_clock(first)["results"], strip_clock(other)["results"]);
}

#[test]
fn corrupted_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "task = \"riesz\"\nriesz.s = \"fast\"\nriesz.p = 1.5\n");
    let o = fraclab("riesz", &bad, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("riesz.s"));

    let broken = write(dir.path(), "broken.toml", "task = \"riesz\n");
    assert_eq!(fraclab("riesz", &broken, &[]).status.code(), Some(1));

    let koranyi = write(dir.path(), "k.toml", "task = \"riesz\"\nnorm.kind = \"koranyi\"\nriesz.s = 0.9\nriesz.p = 1.5\n");
    let o = fraclab("riesz", &koranyi, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("koranyi requires heisenberg"));

    assert_eq!(fraclab("seminorm", &config("riesz_disk.toml"), &[]).status.code(), Some(1));
    assert_eq!(fraclab("riesz", &dir.path().join("missing.toml"), &[]).status.code(), Some(1));
}

#[test]
fn exceeded_limit_exits_with_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("verify_gn.toml")).unwrap() + "limit = 0.01\n";
    let cfg = write(dir.path(), "limit.toml", &text);
    let (code, report) = run_to_file("verify", &cfg, &dir.path().join("v.json"), &[]);
    assert_eq!(code, 2);
    assert_eq!(report["flags"]["violation"], Value::Bool(true));
    assert_eq!(report["flags"]["pass"], Value::Bool(false));
    assert_schema_valid(&report);
}

#[test]
fn unresolved_refinement_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to_file(
        "seminorm",
        &config("seminorm_gaussian.toml"),
        &dir.path().join("s.json"),
        &["--resolution", "3"],
    );
    assert_eq!(code, 3);
    assert_eq!(report["flags"]["unresolved"], Value::Bool(true));
    assert_schema_valid(&report);
}

#[test]
fn csv_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let (code, report) = run_to_file(
        "seminorm",
        &config("seminorm_gaussian.toml"),
        &dir.path().join("s.json"),
        &["--csv", csv.to_str().unwrap(), "--resolution", "50"],
    );
    assert_eq!(code, 0);
    let text = format!(
        "task = \"seminorm\"\ngroup.dim = 1\ndomain.kind = \"box\"\ndomain.lo = [-6.0]\ndomain.hi = [6.0]\n\
         domain.resolution = 50\nseminorm.s = 0.3\nseminorm.p = 2.0\nseminorm.function = \"csv\"\nseminorm.input = {:?}\n",
        csv.to_str().unwrap()
    );
    let cfg = write(dir.path(), "csv.toml", &text);
    let (code, again) = run_to_file("seminorm", &cfg, &dir.path().join("t.json"), &[]);
    assert_eq!(code, 0);
    let a = report["results"]["seminorm"].as_f64().unwrap();
    let b = again["results"]["seminorm"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
    assert_schema_valid(&again);
}

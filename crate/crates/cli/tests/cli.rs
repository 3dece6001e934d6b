use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gaen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaen")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = gaen(args);
    assert!(out.status.success(), "gaen {:?} failed:\n{}", args, String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn json(p: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

/// Small GA budget so the commands finish quickly.
fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.json");
    let cfg = serde_json::json!({
        "ga": { "population_size": 10, "n_best": 3, "n_random": 1, "n_children": 5, "generations": 3 },
        "n_ga_iterations": 2
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn generate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = s(&dir.join("gen"));
    let mut args = vec!["gen", "--out", &out];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("gen").join("data.csv")
}

#[test]
fn gen_writes_data_and_truth_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["gen", "--n", "30", "--p", "120", "--k", "5", "--seed", "7", "--out", &s(d)]);
    }
    let csv = fs::read_to_string(a.join("data.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 31);
    assert!(lines.iter().all(|l| l.split(',').count() == 121));
    assert_eq!(json(a.join("truth.json"))["support"].as_array().unwrap().len(), 5);
    for f in ["data.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn gen_rejects_more_true_predictors_than_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaen(&["gen", "--k", "200", "--p", "120", "--out", &s(dir.path())]);
    assert!(!out.status.success());
    assert!(!dir.path().join("data.csv").exists());
}

#[test]
fn missing_data_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = gaen(&["run", "--data", &s(&missing), "--out", &s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&s(&missing)));
}

#[test]
fn run_en_writes_no_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "24", "--p", "30", "--k", "3"]);
    let out = dir.path().join("en");
    ok(&["run", "--method", "en", "--data", &s(&data), "--out", &s(&out)]);
    let r = json(out.join("result.json"));
    assert_eq!(r["method"], "EN");
    assert_eq!(r["per_fold"].as_array().unwrap().len(), 3);
    assert!(!out.join("trace.jsonl").exists());
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("relative RMSE_CV"));
    assert_eq!(json(out.join("config.json"))["method"], "EN");
}

#[test]
fn run_ga_en_recovers_noiseless_single_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "30", "--p", "20", "--k", "1", "--noise", "0", "--seed", "3"]);
    let out = dir.path().join("ga");
    ok(&["run", "--method", "ga-en", "--data", &s(&data), "--out", &s(&out), "--seed", "3"]);
    let r = json(out.join("result.json"));
    assert!(r["relative_rmse_cv"].as_f64().unwrap() < 0.05, "{r}");

    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let lines: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // 3 folds x 5 GA runs x (initial population + 10 generations)
    assert_eq!(lines.len(), 3 * 5 * 11);
    assert!(lines.iter().all(|l| l["fold"].is_u64() && l["iteration"].is_u64() && l["best_fitness"].is_f64()));
}

#[test]
fn tune_emits_twelve_cells_and_picks_the_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "24", "--p", "20", "--k", "2"]);
    let cfg = quick_config(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["tune", "--outside", "--config", &s(&cfg), "--data", &s(&data), "--out", &s(&out)]);
        out
    };
    let a = run("t1");
    let mut rdr = csv::Reader::from_path(a.join("tune_grid.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    for col in ["scenario", "fsp", "relative_rmse_cv"] {
        assert!(headers.iter().any(|h| h == col), "missing column {col}");
    }
    let idx = headers.iter().position(|h| h == "relative_rmse_cv").unwrap();
    let values: Vec<f64> = rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect();
    assert_eq!(values.len(), 12);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let r = json(a.join("result.json"));
    assert_eq!(r["eval"]["relative_rmse_cv"].as_f64().unwrap(), min);

    let b = run("t2");
    assert_eq!(fs::read(a.join("tune_grid.csv")).unwrap(), fs::read(b.join("tune_grid.csv")).unwrap());
}

#[test]
fn compare_table_json_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "24", "--p", "30", "--k", "3"]);
    let before = fs::read(&data).unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("c");
    let stdout = ok(&["compare", "--config", &s(&cfg), "--data", &s(&data), "--out", &s(&out), "--seed", "4"]).stdout;
    let table = String::from_utf8(stdout).unwrap();
    let header = table.lines().next().unwrap();
    for col in ["Method", "# final predictors", "relative RMSE_CV (%)"] {
        assert!(header.contains(col), "{header}");
    }
    assert_eq!(table.lines().count(), 5);
    assert_eq!(fs::read_to_string(out.join("report.md")).unwrap(), table);

    let report = json(out.join("report.json"));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row["relative_rmse_cv"].is_f64() && row["display_relative_rmse_cv"].is_string());
    }
    assert_eq!(fs::read(&data).unwrap(), before);

    // rerunning from the echoed config reproduces the report
    let echoed = out.join("config.json");
    let again = dir.path().join("again");
    ok(&["compare", "--config", &s(&echoed), "--out", &s(&again)]);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());

    // a different seed keeps the schema
    let other = dir.path().join("other");
    ok(&["compare", "--config", &s(&echoed), "--out", &s(&other), "--seed", "5"]);
    let o = json(other.join("report.json"));
    assert_ne!(o, report);
    assert_eq!(
        o.as_object().unwrap().keys().collect::<Vec<_>>(),
        report.as_object().unwrap().keys().collect::<Vec<_>>()
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "24", "--p", "10", "--k", "2"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"outer_k": 4, "seed": 9, "response": "y"}"#).unwrap();

    let a = dir.path().join("a");
    ok(&["run", "--method", "en", "--config", &s(&cfg), "--data", &s(&data), "--out", &s(&a)]);
    let echoed = json(a.join("config.json"));
    assert_eq!(echoed["outer_k"], 4);
    assert_eq!(echoed["seed"], 9);
    assert_eq!(echoed["n_ga_iterations"], 5);

    let b = dir.path().join("b");
    ok(&["run", "--method", "en", "--config", &s(&cfg), "--data", &s(&data), "--out", &s(&b), "--outer-k", "5"]);
    assert_eq!(json(b.join("config.json"))["outer_k"], 5);
    assert_eq!(json(b.join("result.json"))["per_fold"].as_array().unwrap().len(), 5);
}

#[test]
fn missing_cells_are_imputed_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), &["--n", "24", "--p", "20", "--k", "2", "--missing", "0.05"]);
    assert!(fs::read_to_string(&data).unwrap().contains(",,"));
    let out = dir.path().join("o");
    ok(&["run", "--method", "en", "--data", &s(&data), "--out", &s(&out)]);
    assert!(json(out.join("result.json"))["relative_rmse_cv"].is_f64());
}

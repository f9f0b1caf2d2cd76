use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lssvm-rmt"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn predict_on_identical_classes() {
    let o = run(&["predict", "--config", config("identical.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["D"].as_f64().unwrap(), 0.0);
    assert!((v["weighted"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    for key in ["tau", "E1", "E2", "Var1", "Var2", "V", "threshold", "eps1", "eps2"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn theory_only_sweep_emits_one_row_per_value() {
    let o = run(&["sweep", "--config", config("local_fp_sweep.toml").to_str().unwrap(), "--trials", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 14);
    assert!(lines[0].starts_with("axis,value"));
    assert!(lines[7].starts_with("fp,0,"));
}

#[test]
fn sweep_is_reproducible_and_json() {
    let path = config("identical.toml");
    let args = ["--format", "json", "sweep", "--config", path.to_str().unwrap(), "--trials", "3", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!(v.is_object() || v.is_array());
}

#[test]
fn estimate_tau_reads_text_samples() {
    let path = std::env::temp_dir().join(format!("lssvm-tau-{}.txt", std::process::id()));
    std::fs::write(&path, "0 0\n1 1\n2 0\n0 2\n").unwrap();
    let o = run(&["estimate-tau", "--data", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("tau,n,p\n"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["predict"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    assert_eq!(run(&["predict", "--config", "/nonexistent/model.toml"]).status.code(), Some(2));
    let dir = std::env::temp_dir();
    assert_eq!(run(&["mnist-stats", "--mnist-dir", dir.to_str().unwrap()]).status.code(), Some(2));
}

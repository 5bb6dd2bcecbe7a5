use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn limlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limlab")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn power_weight(dir: &Path, alpha: f64) -> PathBuf {
    let path = dir.join(format!("power{alpha}.json"));
    std::fs::write(&path, format!(r#"{{"kind": "power", "d": 3, "params": {{"alpha": {alpha}}}}}"#)).unwrap();
    path
}

fn classify(dir: &Path, alpha: f64) -> serde_json::Value {
    let w = power_weight(dir, alpha);
    let out = dir.join(format!("classify{alpha}.json"));
    let o = limlab(&[
        "classify",
        "--weight",
        w.to_str().unwrap(),
        "--p",
        "2",
        "--d",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

fn labels(report: &serde_json::Value) -> (String, String) {
    let p = &report["result"]["predictions"];
    (
        p["radial_limits"]["label"].as_str().unwrap().to_owned(),
        p["vertical_limits"]["label"].as_str().unwrap().to_owned(),
    )
}

#[test]
fn classify_examples() {
    let dir = TempDir::new().unwrap();

    let r = classify(dir.path(), -0.5);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["config"]["weight"]["params"]["alpha"], -0.5);
    assert_eq!(r["result"]["unit_cube_infimum"]["trend"], "Vanishing");
    assert_eq!(labels(&r), ("Yes".into(), "NotGuaranteed".into()));

    assert_eq!(labels(&classify(dir.path(), 0.5)), ("Yes".into(), "Yes".into()));

    let r = classify(dir.path(), -1.0);
    assert_eq!(r["result"]["rp"]["verdict"], "Diverged");
    assert_eq!(labels(&r).0, "No");
}

fn trace_csv(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let mut full = vec!["trace", "--d", "3", "--out", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let o = limlab(&full);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out).unwrap()
}

fn verdict_line(csv: &str) -> &str {
    csv.lines().find(|l| l.starts_with("# verdict:")).unwrap()
}

fn rows(csv: &str) -> Vec<(f64, f64)> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && *l != "t,u")
        .map(|l| {
            let (t, u) = l.split_once(',').unwrap();
            (t.parse().unwrap(), u.parse().unwrap())
        })
        .collect()
}

#[test]
fn trace_examples() {
    let dir = TempDir::new().unwrap();

    let c = trace_csv(dir.path(), "c.csv", &["--function", "constant:2.5", "--ray", "0.3,-0.4,0.5"]);
    assert_eq!(verdict_line(&c), "# verdict: converged c=2.5 residual=0");

    let chain = trace_csv(dir.path(), "chain.csv", &["--function", "axis-chain:40", "--vertical", "0,0"]);
    assert!(verdict_line(&chain).starts_with("# verdict: oscillating"));
    let values = rows(&chain);
    for i in 3..=12 {
        let at = |t: f64| values.iter().find(|(s, _)| *s == t).unwrap().1;
        assert_eq!(at(f64::from(i).exp2()), 1.0);
        assert_eq!(at(1.5 * f64::from(i).exp2()), 0.0);
    }

    let ll = trace_csv(dir.path(), "ll.csv", &["--function", "loglog", "--ray", "1,2,2"]);
    assert!(verdict_line(&ll).starts_with("# verdict: divergent"), "{}", verdict_line(&ll));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.json");
    let o = limlab(&["suite", "no-such-suite", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn lemma_suite_refuses_convergent_weight() {
    let dir = TempDir::new().unwrap();
    let w = power_weight(dir.path(), 0.5);
    let out = dir.path().join("s.json");
    let o = limlab(&["suite", "lemma-3-5", "--weight", w.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
    assert!(!out.exists());
}

#[test]
fn malformed_weight_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let w = dir.path().join("bad.json");
    std::fs::write(&w, r#"{"kind": "power", "d": 3, "params": {"beta": 1}}"#).unwrap();
    let out = dir.path().join("c.json");
    let o = limlab(&["classify", "--weight", w.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn replay_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let o = limlab(&["suite", "estimator-sanity", "--seed", "3", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = dir.path().join("b.json");
    assert_eq!(code(&limlab(&["replay", a.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = trace_csv(dir.path(), "t.csv", &["--function", "loglog", "--ray", "0,0,1", "--t-grid", "1:2:30:1,1.25,1.5"]);
    let d = dir.path().join("t2.csv");
    let t = dir.path().join("t.csv");
    assert_eq!(code(&limlab(&["replay", t.to_str().unwrap(), "--out", d.to_str().unwrap()])), 0);
    assert_eq!(c, std::fs::read_to_string(d).unwrap());

    let census = dir.path().join("census.json");
    let args = ["census", "--function", "strip-chain:12", "--rays", "32", "--seed", "5", "--out"];
    let mut full = args.to_vec();
    full.push(census.to_str().unwrap());
    assert_eq!(code(&limlab(&full)), 0);
    let again = dir.path().join("census2.json");
    assert_eq!(code(&limlab(&["replay", census.to_str().unwrap(), "--out", again.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(census).unwrap(), std::fs::read(again).unwrap());
}

#[test]
fn only_the_output_path_is_written() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("only.csv");
    let o = limlab(&["trace", "--function", "inverse-norm", "--ray", "1,0,0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("only.csv")]);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn panshuf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panshuf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn member(ell: usize, b: i8) -> String {
    format!(r#"{{"family":"P","d":3,"ell":[{ell}],"b":{b},"alpha":0.1}}"#)
}

#[test]
fn tv_between_members() {
    let o = panshuf(&["tv", "--p", &member(1, 1), "--q", &member(1, -1)]);
    assert_eq!(o.status.code(), Some(0));
    assert!((stdout(&o).trim().parse::<f64>().unwrap() - 0.2).abs() < 1e-12);
    let o = panshuf(&["tv", "--p", &member(1, 1), "--q", &member(2, 1)]);
    assert!((stdout(&o).trim().parse::<f64>().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn sample_is_seeded() {
    let a = panshuf(&["sample", "--dist", &member(2, -1), "-n", "5", "--seed", "3"]);
    let b = panshuf(&["sample", "--dist", &member(2, -1), "-n", "5", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 5);
    assert!(stdout(&a).lines().all(|l| l.len() == 3 && l.chars().all(|c| c == '+' || c == '-')));
}

#[test]
fn norm_reports_bound() {
    let o = panshuf(&["norm", "--family", "p", "--d", "3", "--k", "2", "--alpha", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["value_sq"].as_f64().unwrap() - 0.04 / 6.0).abs() < 1e-12);
}

#[test]
fn audit_exit_codes() {
    let rr = r#"{"type":"shuffled_rr","alphabet":2,"params":{"flip":0.25}}"#;
    let eps = (3.0f64).ln().to_string();
    let base = ["audit", "--mechanism", rr, "--x", "0", "--y", "1", "--target-eps"];
    let mut pass: Vec<&str> = base.to_vec();
    pass.extend([eps.as_str(), "--target-delta", "1e-9"]);
    assert_eq!(panshuf(&pass).status.code(), Some(0));
    let mut fail: Vec<&str> = base.to_vec();
    fail.extend(["0.5", "--target-delta", "1e-9"]);
    assert_eq!(panshuf(&fail).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(panshuf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(panshuf(&["tv", "--p", "{}"]).status.code(), Some(1));
    assert_eq!(panshuf(&["--help"]).status.code(), Some(0));
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn spec_kind_must_match_command() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"kind":"norm","trials":1,"seed":0,"out":"x","cells":[]}"#);
    assert_eq!(panshuf(&["sweep", "--spec", &spec]).status.code(), Some(1));
}

#[test]
fn reduce_check_digests_ignore_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"kind":"reduction-check","trials":20000,"seed":9,"out":"unused","ns":[30,60],"flip":0.1,"p_one":0.9}"#,
    );
    let manifest = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = panshuf(&["reduce-check", "--spec", &spec, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["seed"], 9);
        m["files"].clone()
    };
    assert_eq!(manifest("1"), manifest("4"));
}

#[test]
fn distinguish_target_decides_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    let args = ["distinguish", "--trials", "10000", "--seed", "1", "--out", out.to_str().unwrap(), "--d", "3", "--k", "1"];
    let mut wide = args.to_vec();
    wide.extend(["--constant", "16"]);
    assert_eq!(panshuf(&wide).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.extend(["--target", "0.99"]);
    assert_eq!(panshuf(&strict).status.code(), Some(2));
    assert!(out.join("z.jsonl").exists() && out.join("threshold.json").exists());
}

#[test]
fn fit_recovers_slope() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nstar.csv");
    let rows: String = [8.0f64, 16.0, 32.0, 64.0].iter().map(|d| format!("{d},{}\n", 10.0 * d.sqrt())).collect();
    fs::write(&csv, format!("d,n_star\n{rows}")).unwrap();
    let o = panshuf(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let slope: f64 = line.split(',').next().unwrap().parse().unwrap();
    assert!((slope - 0.5).abs() < 1e-9);
}

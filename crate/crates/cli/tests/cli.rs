use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rkhs-complexity"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

struct Files {
    dir: TempDir,
}

impl Files {
    fn new() -> Self {
        Files {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn write(&self, name: &str, body: &str) -> String {
        let p = self.dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_owned()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn orthonormal_files(f: &Files, d: usize) -> (String, String) {
    let rows: String = (0..d)
        .map(|i| {
            let row: Vec<&str> = (0..d).map(|j| if i == j { "1" } else { "0" }).collect();
            row.join(",") + "\n"
        })
        .collect();
    (f.write("pts.csv", &rows), f.write("k.json", r#"{"type": "linear"}"#))
}

fn csv_rows(bytes: &[u8]) -> Vec<Vec<String>> {
    let text = std::str::from_utf8(bytes).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn gain_of_two_orthonormal_points() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 2);
    let out = run(&["gain", "--points", &p, "--kernel", &k, "--lambda", "0.25"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let total = doc["result"]["total"].as_f64().unwrap();
    assert!((total - 2.0 * 5f64.ln()).abs() < 1e-12);
    assert_eq!(format!("{:.4}", total), "3.2189");
    assert_eq!(doc["config"]["command"], "gain");
    assert_eq!(doc["config"]["lambda"].as_f64(), Some(0.25));
    assert!(doc["version"].is_string());
}

#[test]
fn floats_are_written_with_seventeen_significant_digits() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 2);
    let out = run(&["gain", "--points", &p, "--kernel", &k, "--lambda", "0.25"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"total\": 3.2188758248682006e0"), "{text}");
}

#[test]
fn gain_csv_has_one_row_per_step() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 3);
    let out = run(&[
        "gain", "--points", &p, "--kernel", &k, "--lambda", "1", "--sequence", "0,1,1", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows[0], ["lambda", "step", "point", "increment", "total"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][2], "1");
    // repeating a direction halves the residual variance
    let inc: f64 = rows[3][3].parse().unwrap();
    assert!((inc - 1.5f64.ln()).abs() < 1e-11);
}

#[test]
fn exponents_example() {
    let out = run(&["exponents", "--d", "2", "--beta", "10"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["result"];
    assert!((r["yang_exponent"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((r["wang_exponent"].as_f64().unwrap() - (190.0 / 90.0 + 0.5)).abs() < 1e-12);
    assert_eq!(r["winner"], "yang");
}

#[test]
fn missing_lambda_is_a_validation_error() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 2);
    let out = run(&["gain", "--points", &p, "--kernel", &k]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
    assert!(out.stdout.is_empty());
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["sandwich", "--help"])), 0);
}

#[test]
fn precondition_violations_exit_one() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 3);
    let bad = f.write("bad.csv", "0.1,0.2\n0.3\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["gain", "--points", &p, "--kernel", &k, "--lambda", "0"],
        vec!["gain", "--points", &p, "--kernel", &k, "--lambda", "1", "--bound", "0.5"],
        vec!["gain", "--points", &bad, "--kernel", &k, "--lambda", "1"],
        vec!["gain", "--points", "/nonexistent.csv", "--kernel", &k, "--lambda", "1"],
        vec!["exponents", "--d", "2", "--beta", "2.5"],
        vec!["eluder", "--points", &p, "--kernel", &k, "--epsilon", "0.5", "--s", "0"],
        vec!["sandwich", "--points", &p, "--kernel", &k, "--epsilon=-1", "--s", "1"],
    ];
    for args in cases {
        let out = run(&args);
        assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(!stderr.trim().is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn critical_gain_not_found_is_a_numerical_failure() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 2);
    let out = run(&["critical", "--points", &p, "--kernel", &k, "--lambda", "0.01", "--c", "0.7", "--k-max", "2"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn precomputed_gram_input() {
    let f = Files::new();
    let g = f.write("g.csv", "# two correlated points\n1,0.5\n0.5,1\n");
    let out = run(&["maxgain", "--gram", &g, "--lambda", "1", "--t", "2", "--method", "exhaustive"]);
    assert_eq!(code(&out), 0);
    let total = json(&out)["result"]["total"].as_f64().unwrap();
    // log det(I + K) = log(2 * 2 - 0.25)
    assert!((total - 3.75f64.ln()).abs() < 1e-12, "{total}");
    let k = f.write("k.json", r#"{"type": "linear"}"#);
    let conflict = run(&["maxgain", "--gram", &g, "--kernel", &k, "--lambda", "1", "--t", "2"]);
    assert_eq!(code(&conflict), 1);
}

#[test]
fn exact_sandwich_on_orthonormal_points() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 3);
    let out = run(&[
        "sandwich", "--points", &p, "--kernel", &k, "--epsilon", "0.5,1", "--s", "1", "--exact", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out.stdout);
    let header = &rows[0];
    assert_eq!(header.len(), 27);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows[1..] {
        assert_eq!(row.len(), 27);
        assert_eq!(row[col("dim_lower")], "3");
        assert_eq!(row[col("dim_upper")], "3");
        assert_eq!(row[col("dim_exact")], "true");
        assert_eq!(row[col("thm1_verdict")], "pass");
        assert_eq!(row[col("thm2_verdict")], "pass");
        assert_eq!(row[col("error")], "");
    }
}

#[test]
fn undecided_exact_sandwich_exits_three_after_writing() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 3);
    let out = run(&[
        "sandwich", "--points", &p, "--kernel", &k, "--epsilon", "0.5", "--s", "1", "--exact",
        "--brute-force-budget", "2",
    ]);
    assert_eq!(code(&out), 3);
    let doc = json(&out);
    assert_eq!(doc["result"][0]["report"]["dimension"]["exact"], false);
}

#[test]
fn sandwich_json_keeps_grid_order() {
    let f = Files::new();
    let (p, k) = orthonormal_files(&f, 2);
    let out = run(&["sandwich", "--points", &p, "--kernel", &k, "--epsilon", "1,0.25,0.5", "--s", "1", "--c", "0.8,1.0"]);
    assert_eq!(code(&out), 0);
    let cells = json(&out)["result"].as_array().unwrap().clone();
    let got: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| (c["epsilon"].as_f64().unwrap(), c["c"].as_f64().unwrap()))
        .collect();
    let want = [(1.0, 0.8), (1.0, 1.0), (0.25, 0.8), (0.25, 1.0), (0.5, 0.8), (0.5, 1.0)];
    assert_eq!(got, want);
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let f = Files::new();
    let target = f.path("res.json");
    let out = run(&["exponents", "--d", "1", "--beta", "4", "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_slice(&std::fs::read(&target).unwrap()).unwrap();
    assert_eq!(doc["config"]["out"], target.to_str().unwrap());
    assert!(Path::new(&target).exists());
}

#[test]
fn casestudy_csv_is_reproducible() {
    let args = [
        "casestudy", "--mode", "growth", "--beta", "4", "--pool-size", "64", "--t-grid", "4,8,16", "--seed", "5",
        "--format", "csv",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

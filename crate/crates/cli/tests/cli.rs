use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    report: Option<Value>,
}

fn dilation(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_dilation")).current_dir(dir).args(args).output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout);
    Run { code: out.status.code().unwrap_or(-1), report: serde_json::from_str(&text).ok() }
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    let files = [
        ("circle2.json", r#"{"kind":"circle","N":2}"#),
        ("golden.json", r#"{"kind":"sft","matrix":[[1,1],[1,0]]}"#),
        ("basilica.json", r#"{"kind":"rational","p1":[[-1,0],[0,0],[1,0]],"p2":[[1,0]]}"#),
        ("haar.json", r#"{"coeffs":[[0.7071067811865476,0],[0.7071067811865476,0]],"offset":0}"#),
        ("root2.json", r#"{"coeffs":[[1.4142135623730951,0]],"offset":0}"#),
        ("delta.json", r#"{"kind":"dirac","word":"0000000000"}"#),
        ("lebesgue.json", r#"{"kind":"bernoulli","weights":[0.5,0.5]}"#),
        ("brolin.json", r#"{"kind":"brolin","n":20000}"#),
        ("d0.csv", "word,value\n1,1\n2,1\n"),
        ("bad.json", "{not json"),
    ];
    for (name, body) in files {
        fs::write(p.join(name), body).unwrap();
    }
    (dir, p)
}

#[test]
fn haar_fixpoint_passes() {
    let (_d, p) = setup();
    let r = dilation(&p, &["transfer-fixpoint", "--system", "circle2.json", "--filter", "haar.json", "--depth", "12", "--out", "o"]);
    assert_eq!(r.code, 0);
    let rep = r.report.unwrap();
    assert!(rep["residual"].as_f64().unwrap() <= 1e-8);
    assert!((rep["eigenvalue"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(rep["seed"], 0);
    assert_eq!(rep["config"]["command"]["depth"], 12);
    assert!(p.join("o/h.csv").exists() && p.join("o/nu.csv").exists());
    assert!(p.join("o/transfer_fixpoint.json").exists());
}

#[test]
fn delta_zero_fails_strong_invariance() {
    let (_d, p) = setup();
    let r = dilation(&p, &["measure-check", "--system", "circle2.json", "--measure", "delta.json", "--mode", "strong", "--out", "o"]);
    assert_eq!(r.code, 1);
    assert!(r.report.unwrap()["report"]["residual"].as_f64().unwrap() >= 0.5);
    let ok = dilation(&p, &["measure-check", "--system", "circle2.json", "--measure", "delta.json", "--mode", "invariance", "--out", "o"]);
    assert_eq!(ok.code, 0);
    let leb = dilation(&p, &["measure-check", "--system", "circle2.json", "--measure", "lebesgue.json", "--out", "o"]);
    assert_eq!(leb.code, 0);
    assert_eq!(leb.report.unwrap()["report"]["residual"].as_f64(), Some(0.0));
}

#[test]
fn input_errors_exit_two() {
    let (_d, p) = setup();
    assert_eq!(dilation(&p, &["transfer-fixpoint", "--system", "missing.json", "--filter", "haar.json"]).code, 2);
    assert_eq!(dilation(&p, &["system-info", "--system", "bad.json"]).code, 2);
    assert_eq!(dilation(&p, &["measure-check", "--system", "circle2.json", "--measure", "missing.json"]).code, 2);
    assert_eq!(dilation(&p, &["transfer-fixpoint", "--system", "circle2.json"]).code, 2);
    assert_eq!(dilation(&p, &["no-such-command"]).code, 2);
}

#[test]
fn failing_filter_exits_one() {
    let (_d, p) = setup();
    let r = dilation(&p, &["filter-check", "--system", "circle2.json", "--filter", "root2.json", "--out", "o"]);
    assert_eq!(r.code, 1);
    let q = r.report.unwrap()["qmf"]["residual"].as_f64().unwrap();
    assert!((q - 1.0).abs() <= 1e-12);
    assert_eq!(dilation(&p, &["filter-check", "--system", "circle2.json", "--filter", "haar.json", "--out", "o"]).code, 0);
}

#[test]
fn paths_are_deterministic_across_worker_counts() {
    let (_d, p) = setup();
    let base = ["paths-sample", "--system", "circle2.json", "--filter", "haar.json", "--n", "4", "--count", "2000", "--seed", "7"];
    let a = dilation(&p, &[&base[..], &["--out", "a", "--workers", "1"]].concat());
    let b = dilation(&p, &[&base[..], &["--out", "b", "--workers", "4"]].concat());
    assert_eq!((a.code, b.code), (0, 0));
    let pa = fs::read(p.join("a/paths.csv")).unwrap();
    assert_eq!(pa, fs::read(p.join("b/paths.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&pa).lines().count(), 2001);
    let c = dilation(&p, &[&base[..10], &["8", "--out", "c"]].concat());
    assert_eq!(c.code, 0);
    assert_ne!(pa, fs::read(p.join("c/paths.csv")).unwrap());
}

#[test]
fn brolin_cloud_is_reproducible() {
    let (_d, p) = setup();
    let a = dilation(&p, &["measure-check", "--system", "basilica.json", "--measure", "brolin.json", "--out", "a", "--workers", "1"]);
    let b = dilation(&p, &["measure-check", "--system", "basilica.json", "--measure", "brolin.json", "--out", "b", "--workers", "3"]);
    assert_eq!((a.code, b.code), (0, 0));
    assert_eq!(fs::read(p.join("a/cloud.csv")).unwrap(), fs::read(p.join("b/cloud.csv")).unwrap());
    assert!(a.report.unwrap()["report"]["max_z"].as_f64().unwrap() < 3.0);
}

#[test]
fn martingale_verify_on_haar() {
    let (_d, p) = setup();
    let r = dilation(&p, &["martingale-verify", "--system", "circle2.json", "--filter", "haar.json", "--n", "5", "--out", "o"]);
    assert_eq!(r.code, 0);
    let res = &r.report.unwrap()["residuals"];
    assert_eq!(res["covariance"].as_f64(), Some(0.0));
    assert!(res["u_isometry"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn scaling_function_csv() {
    let (_d, p) = setup();
    let r = dilation(&p, &["scaling-function", "--system", "circle2.json", "--filter", "haar.json", "--K", "30", "--x-grid", "0:1:0.5", "--cascade", "1", "--out", "o"]);
    assert_eq!(r.code, 0);
    let csv = fs::read_to_string(p.join("o/scaling_function.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][..3], [0.0, 1.0, 0.0]);
    // phi_hat(1/2) = e^{-i pi/2} 2/pi
    assert!(rows[1][1].abs() < 1e-8 && (rows[1][2] + 2.0 / std::f64::consts::PI).abs() < 1e-8);
    assert!(r.report.unwrap()["l2_defect"].as_f64().unwrap() <= 1e-3);
    assert!(p.join("o/cascade.csv").exists());
}

#[test]
fn multiplicity_detail_on_golden_mean() {
    let (_d, p) = setup();
    let r = dilation(&p, &["multiplicity", "--system", "golden.json", "--input", "d0.csv", "--op", "detail", "--out", "o"]);
    assert_eq!(r.code, 0);
    let csv = fs::read_to_string(p.join("o/multiplicity_detail.csv")).unwrap();
    assert_eq!(csv, "word,value\n1,1\n2,0\n");
    let lift = dilation(&p, &["multiplicity", "--system", "golden.json", "--input", "d0.csv", "--op", "lift", "--out", "o"]);
    assert_eq!(lift.code, 0);
}

#[test]
fn system_info_reports_structure() {
    let (_d, p) = setup();
    let r = dilation(&p, &["system-info", "--system", "golden.json", "--out", "o"]);
    assert_eq!(r.code, 0);
    let rep = r.report.unwrap();
    assert_eq!(rep["onto"], true);
    assert_eq!(rep["word_counts"][2], 3);
    let rat = dilation(&p, &["system-info", "--system", "basilica.json", "--out", "o"]).report.unwrap();
    assert_eq!(rat["degree"], 2);
}

#[test]
fn eigenvalue_off_one_needs_rescale() {
    let (_d, p) = setup();
    fs::write(p.join("w.csv"), "word,value\n0,0.8\n1,0.8\n").unwrap();
    let r = dilation(&p, &["transfer-fixpoint", "--system", "circle2.json", "--weight", "w.csv", "--out", "o"]);
    assert_eq!(r.code, 1);
    assert!((r.report.unwrap()["eigenvalue"].as_f64().unwrap() - 1.6).abs() < 1e-12);
    let r = dilation(&p, &["transfer-fixpoint", "--system", "circle2.json", "--weight", "w.csv", "--rescale", "--out", "o"]);
    assert_eq!(r.code, 0);
    let rep = r.report.unwrap();
    assert!((rep["rescaled_by"].as_f64().unwrap() - 1.6).abs() < 1e-12);
    assert!(rep["residual"].as_f64().unwrap() < 1e-10);
}

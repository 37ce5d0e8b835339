//! End-to-end runs of the `switchsim` binary.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_switchsim"));
    c.env_remove("SWITCHSIM_THREADS");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn state_json_matches_coherent_expansion() {
    let o = run_in(Path::new("."), &["state", "-r", "0", "-x", "2", "-y", "0", "--json", "--amplitudes", "12"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let plus = &v["branches"][0];
    assert_eq!(plus["branch"], "plus");
    assert!((plus["probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let amps = plus["amplitudes"].as_array().unwrap();
    assert_eq!(amps.len(), 12);
    let (mut c, alpha) = ((-2.0f64).exp(), 2.0);
    for (n, a) in amps.iter().enumerate() {
        assert!((a[0].as_f64().unwrap() - c).abs() < 1e-12 && a[1].as_f64().unwrap().abs() < 1e-12, "n={n}");
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    assert_eq!(v["branches"][1]["degenerate"], true);
}

#[test]
fn exit_codes() {
    let here = Path::new(".");
    assert_eq!(code(&run_in(here, &["state", "-r", "abc"])), 2);
    assert_eq!(code(&run_in(here, &["state", "-r", "1", "-x", "0", "-y", "0", "--frame", "sideways"])), 2);
    assert_eq!(code(&run_in(here, &["--grid", "5x4", "wigner", "-r", "0.5", "-x", "1", "-y", "0"])), 2);
    let o = run_in(here, &["--cutoff", "12", "--frame", "number", "state", "-r", "1", "-x", "3", "-y", "0"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutoff 12"));
    assert_eq!(code(&run_in(here, &["wigner", "-r", "1", "-x", "0", "-y", "0", "--branch", "minus"])), 4);
    assert_eq!(code(&bin().env("SWITCHSIM_THREADS", "0").args(["state", "-r", "1", "-x", "1", "-y", "0"]).output().unwrap()), 2);
}

#[test]
fn wigner_csv_is_normalized() {
    let o = run_in(Path::new("."), &["--grid", "65x49", "wigner", "-r", "0.5", "-x", "1", "-y", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "q,p,W");
    let rows: Vec<[f64; 3]> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            [f[0], f[1], f[2]]
        })
        .collect();
    assert_eq!(rows.len(), 65 * 49);
    let mut qs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut ps: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    qs.sort_by(f64::total_cmp);
    ps.sort_by(f64::total_cmp);
    qs.dedup();
    ps.dedup();
    assert_eq!((qs.len(), ps.len()), (65, 49));
    // independent trapezoid sum over the emitted samples
    let (hq, hp) = (qs[1] - qs[0], ps[1] - ps[0]);
    let edge = |v: f64, lo: f64, hi: f64| if v == lo || v == hi { 0.5 } else { 1.0 };
    let total: f64 = rows
        .iter()
        .map(|r| r[2] * edge(r[0], qs[0], qs[64]) * edge(r[1], ps[0], ps[48]))
        .sum::<f64>()
        * hq
        * hp;
    assert!((total - 1.0).abs() < 1e-3, "{total}");
    assert!(rows.iter().any(|r| r[2] < 0.0));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "grid = \"65x33\"\n").unwrap();
    let args = ["--config", "c.toml", "wigner", "-r", "0.5", "-x", "1", "-y", "0"];
    let o = run_in(dir.path(), &args);
    assert_eq!(code(&o), 0);
    assert_eq!(data_lines(&String::from_utf8(o.stdout).unwrap()).len(), 1 + 65 * 33);
    let mut with_flag = vec!["--grid", "33x65"];
    with_flag.extend(args);
    let o = run_in(dir.path(), &with_flag);
    assert_eq!(data_lines(&String::from_utf8(o.stdout).unwrap()).len(), 1 + 33 * 65);
}

#[test]
fn small_sweep_is_fast_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let o = run_in(dir.path(), &["--out", "s", "sweep", "--r-values", "1,4", "--x-range", "-8,8,2", "--y-range", "-8,8,2", "--ng-only"]);
    let secs = t.elapsed().as_secs_f64();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(secs < 5.0, "{secs} s");
    for r in ["1", "4"] {
        let text = std::fs::read_to_string(dir.path().join(format!("s_r{r}.csv"))).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines[0].split(',').count(), 10);
        assert_eq!(lines.len(), 5);
        assert!(lines[1..].iter().all(|l| l.ends_with(",ok") || l.contains(",degenerate")));
        // y outer, x inner
        let xy: Vec<(f64, f64)> = lines[1..]
            .iter()
            .map(|l| {
                let mut it = l.split(',').map(|s| s.parse::<f64>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect();
        assert_eq!(xy, vec![(-8.0, -8.0), (8.0, -8.0), (-8.0, 8.0), (8.0, 8.0)]);
    }
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s_manifest.json")).unwrap()).unwrap();
    assert!(side["manifest"]["parameters"]["r_values"].is_array());
}

#[test]
fn partial_sweep_failure_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["--cutoff", "16", "--out", "f", "sweep", "--r-values", "1", "--x-range", "0.5,5,2", "--y-range", "0,1,2", "--ng-only"],
    );
    assert_eq!(code(&o), 5);
    let text = std::fs::read_to_string(dir.path().join("f_r1.csv")).unwrap();
    let rows = &data_lines(&text)[1..];
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row.split(',').count(), 10, "{row}");
    }
    assert_eq!(rows.iter().filter(|l| l.contains(",error: ")).count(), 2);
}

#[test]
fn json_sweep_and_thread_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--out", "j", "sweep", "--r-values", "0.5", "--x-range", "-1,1,3", "--y-range", "0,1,2", "--ng-only", "--format", "json"];
    let a = bin().current_dir(dir.path()).env("SWITCHSIM_THREADS", "1").args(args).output().unwrap();
    assert_eq!(code(&a), 0);
    let first = std::fs::read(dir.path().join("j_r0.5.json")).unwrap();
    let b = bin().current_dir(dir.path()).env("SWITCHSIM_THREADS", "2").args(args).output().unwrap();
    assert_eq!(code(&b), 0);
    assert_eq!(first, std::fs::read(dir.path().join("j_r0.5.json")).unwrap());
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert!(v["manifest_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn reconcile_reports_residuals() {
    let o = run_in(Path::new("."), &["--json", "--grid", "65x65", "reconcile", "-r", "1", "-x", "1", "-y", "0", "--branch", "plus"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let v = &v["report"];
    let (max, rms) = (v["max_abs"].as_f64().unwrap(), v["rms"].as_f64().unwrap());
    assert!(max.is_finite() && rms.is_finite() && rms <= max);
}

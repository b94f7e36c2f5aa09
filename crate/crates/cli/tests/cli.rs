use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homdyn"))
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homdyn-cli-{}-{test}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone()).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn markov_bound_30() {
    let out = run(&["markov", "--bound", "30"]);
    assert!(out.status.success());
    let v = lines(&out);
    let triples = v.iter().filter(|l| l["kind"] == "triple").count();
    assert_eq!(triples, 5);
    let spectrum: Vec<&Value> = v.iter().filter(|l| l["kind"] == "spectrum").collect();
    assert_eq!(spectrum[0]["m"], 1);
    assert_eq!(spectrum[0]["value"], "4/5");
}

#[test]
fn alpha1_of_identity_and_a2() {
    let dir = scratch("alpha1");
    let e2 = 2f64.exp();
    let f = write(&dir, "p.txt", &format!("1 0 0 0 1 0 0 0 1\n{e2:e} 0 0 0 1 0 0 0 {:e}\n", (-2f64).exp()));
    let out = run(&["alpha1", f.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert!(out.status.success());
    let v = lines(&out);
    assert_eq!(v[0]["alpha1"].as_f64().unwrap(), 1.0);
    assert!((v[1]["alpha1"].as_f64().unwrap() - e2).abs() < 1e-12);
    let csv = std::fs::read_to_string(dir.join("o/alpha1.csv")).unwrap();
    assert!(csv.starts_with("index,alpha1,in_1,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.join("o/alpha1.jsonl").exists());
}

#[test]
fn garbage_reports_line_and_exits_2() {
    let dir = scratch("garbage");
    let f = write(&dir, "p.txt", "# header\n1 0 0 0 1 0 0 0 1\nnot a lattice\n");
    let out = run(&["alpha1", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn validation_failures_exit_2() {
    let dir = scratch("validation");
    let cfg = write(&dir, "bad.toml", "[flows]\niota = 3.0\n");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "markov"]).status.code(), Some(2));
    let unknown = write(&dir, "unknown.toml", "[run]\nsed = 1\n");
    assert_eq!(run(&["--config", unknown.to_str().unwrap(), "markov"]).status.code(), Some(2));
    let definite = write(&dir, "f.txt", "1 1 1 0 0 0\n");
    assert_eq!(run(&["ternary", definite.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["shear", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn ternary_reports_mu() {
    let dir = scratch("ternary");
    let f = write(&dir, "f.txt", "1 1 -1 0 0 0\n1 1 -3 0 0 0  # x² + y² − 3z²\n");
    let out = run(&["ternary", f.to_str().unwrap(), "--n", "10", "--epsilon", "1/4"]);
    assert!(out.status.success());
    let v = lines(&out);
    assert_eq!(v[0]["mu"], "0");
    assert_eq!(v[0]["included"], false);
    assert_eq!(v[1]["mu"], "1/3");
    assert_eq!(v[1]["included"], true);
}

#[test]
fn constant_bump_has_zero_discrepancy() {
    let dir = scratch("constant");
    let f = write(&dir, "f.txt", "1 1 -3 0 0 0\n");
    let out = run(&["birkhoff", f.to_str().unwrap(), "--t", "1,2", "--bump", "constant:0.5", "--samples", "200"]);
    assert!(out.status.success());
    for l in lines(&out) {
        assert_eq!(l["D_value"].as_f64().unwrap(), 0.0);
    }
    let fam = write(&dir, "fam.txt", "1 1 -3 0 0 0\n1 1 -1 0 0 0\n1 1 -7 0 0 0\n");
    let out = run(&["equidist-scan", fam.to_str().unwrap(), "--bump", "constant:2", "--samples", "200"]);
    assert!(out.status.success());
    let v = lines(&out);
    let rows: Vec<&Value> = v.iter().filter(|l| l["kind"] == "form").collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["discrepancy"].as_f64().unwrap() == 0.0));
    assert_eq!(v.last().unwrap()["dropped_isotropic"], 1);
}

#[test]
fn same_form_twice_finds_shared_points() {
    let dir = scratch("pairs");
    let f = write(&dir, "f.txt", "1 1 -3 0 0 0\n");
    let p = f.to_str().unwrap();
    let out = run(&["close-pairs", p, p, "--samples", "300", "--keep", "3"]);
    assert!(out.status.success());
    let v = lines(&out);
    let summary = v.last().unwrap();
    assert!(summary["smallest_norm_r"].as_f64().unwrap() < 1e-12);
}

#[test]
fn reruns_are_bit_identical_and_seed_matters() {
    let dir = scratch("rerun");
    let f = write(&dir, "f.txt", "1 1 -3 0 0 0\n");
    let args = ["--seed", "9", "birkhoff", f.to_str().unwrap(), "--t", "1", "--bump", "battery:2", "--samples", "300"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let s1 = run(&["--seed", "1", "shear", "--trials", "50"]);
    let s1b = run(&["--seed", "1", "shear", "--trials", "50"]);
    let s2 = run(&["--seed", "2", "shear", "--trials", "50"]);
    assert_eq!(s1.stdout, s1b.stdout);
    assert_ne!(s1.stdout, s2.stdout);
}

#[test]
fn config_seed_and_out_are_used() {
    let dir = scratch("config");
    let out_dir = dir.join("results");
    let cfg = write(&dir, "c.toml", &format!("[run]\nseed = 1\nout = {:?}\n", out_dir.to_str().unwrap()));
    let a = run(&["--config", cfg.to_str().unwrap(), "shear", "--trials", "50"]);
    assert!(a.status.success());
    let b = run(&["--seed", "1", "shear", "--trials", "50"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(out_dir.join("shear.jsonl")).unwrap(), a.stdout);
    assert!(std::fs::read_to_string(out_dir.join("shear.csv")).unwrap().starts_with("n,trials,"));
}

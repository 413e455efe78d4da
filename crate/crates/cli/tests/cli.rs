use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn crkernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crkernel")).args(args).env_remove("CRKERNEL_OUT").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A run file next to a copy of the built-in model file.
fn run_file(dir: &Path, run: &str, model: &str) -> PathBuf {
    fs::write(dir.join("model.ini"), model).unwrap();
    let p = dir.join("run.ini");
    fs::write(&p, run).unwrap();
    p
}

fn model_a() -> String {
    fs::read_to_string(configs().join("model_a.ini")).unwrap()
}

#[test]
fn verify_model_a_writes_a_clean_ledger() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = crkernel(&["--config", configs().join("verify_a.ini").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ledger = fs::read_to_string(out.join("verify.csv")).unwrap();
    let mut lines = ledger.lines();
    assert_eq!(lines.next(), Some("identity,residual_terms,status"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 15);
    assert!(rows.contains(&"two_seventeen,0,pass"));
    assert!(rows.iter().all(|r| r.ends_with(",0,pass")), "{ledger}");
}

#[test]
fn scaling_rows_and_byte_identical_reruns() {
    let tmp = TempDir::new().unwrap();
    let cfg = run_file(
        tmp.path(),
        "[run]\ncommand = scaling\nmodel = model.ini\nsamples = 400\nbarrier_samples = 2000\n[probe]\nepsilon = 0.2, 0.1, 0.05, 0.025\n",
        &model_a(),
    );
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = crkernel(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!([0, 1].contains(&code(&o)), "{}", stderr(&o));
        outputs.push((fs::read(out.join("scaling.csv")).unwrap(), fs::read(out.join("scaling_fit.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("kernel,epsilon,estimate,stderr"));
    for k in ["R", "E", "K"] {
        assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{k},"))).count(), 4);
    }
    // A different seed changes the estimates.
    let out = tmp.path().join("c");
    crkernel(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_ne!(fs::read(out.join("scaling.csv")).unwrap(), outputs[0].0);
}

#[test]
fn malformed_polynomial_reports_line_and_column() {
    let tmp = TempDir::new().unwrap();
    let bad = model_a().replace("rho_hat_1 = z3 + conj(z3)", "rho_hat_1 = z3 + conj(z3");
    let cfg = run_file(tmp.path(), "[run]\ncommand = verify\nmodel = model.ini\n", &bad);
    let o = crkernel(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("model.ini:9:"), "{err}");
}

#[test]
fn duplicate_key_names_both_lines() {
    let tmp = TempDir::new().unwrap();
    let cfg = run_file(tmp.path(), "[run]\nseed = 1\nmodel = model.ini\nseed = 2\n", &model_a());
    let o = crkernel(&["--config", cfg.to_str().unwrap(), "--command", "verify"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("run.ini:4:") && err.contains("line 2"), "{err}");
}

#[test]
fn large_codimension_hits_the_desk_scale_bound() {
    let tmp = TempDir::new().unwrap();
    let wide = model_a().replace("k = 1", "k = 5");
    let cfg = run_file(tmp.path(), "[run]\ncommand = verify\nmodel = model.ini\n", &wide);
    let o = crkernel(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("desk-scale bound"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_warn_unless_strict() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("verify.csv"), "identity,residual_terms,status\nx,0,pass\n").unwrap();
    let cfg = run_file(tmp.path(), "[run]\ncommand = report\nmodel = model.ini\nsamplez = 5\n", &model_a());
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let o = crkernel(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("samplez"));
    let o = crkernel(&[&args[..], &["--strict"]].concat());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run.ini:4:1"), "{}", stderr(&o));
}

#[test]
fn report_merges_tables_and_fails_on_a_failed_row() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let cfg = run_file(tmp.path(), "[run]\ncommand = report\nmodel = model.ini\n", &model_a());
    let args = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&crkernel(&args)), 2, "nothing to report");
    fs::write(out.join("verify.csv"), "identity,residual_terms,status\na,0,pass\nb,0,pass\n").unwrap();
    fs::write(out.join("holder_fit.csv"), "order,exponent,min,status\nzeta_z,0.3,0.45,fail\n").unwrap();
    assert_eq!(code(&crkernel(&args)), 1);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(report, "verify: 2/2 pass\nholder: 0/1 pass; failing: zeta_z\noverall: fail\n");
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("env-out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("verify.csv"), "identity,residual_terms,status\na,0,pass\n").unwrap();
    let cfg = run_file(tmp.path(), "[run]\ncommand = report\nmodel = model.ini\n", &model_a());
    let o = Command::new(env!("CARGO_BIN_EXE_crkernel"))
        .args(["--config", cfg.to_str().unwrap()])
        .env("CRKERNEL_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("report.txt").exists());
}

#[test]
fn bad_invocations_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = run_file(tmp.path(), "[run]\nmodel = model.ini\n", &model_a());
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&crkernel(&["--config", c])), 2, "no command");
    assert_eq!(code(&crkernel(&["--config", c, "--command", "plot"])), 2);
    assert_eq!(code(&crkernel(&["--config", c, "--command", "verify", "--samples", "0"])), 2);
    assert_eq!(code(&crkernel(&["--config", tmp.path().join("missing.ini").to_str().unwrap()])), 2);
    // An output path that is a file cannot be created.
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = crkernel(&["--config", c, "--command", "verify", "--out", blocker.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

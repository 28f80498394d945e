use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn enpp(args: &[&str], env: Option<(&str, &Path)>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_enpp"));
    cmd.args(args).env_remove("ENPP_OUT_DIR");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "nz=48\nntheta=16\ns_max=0.1\n";

#[test]
fn zero_amplitudes_give_zero_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &format!("{SMALL}eps0_amplitude=0\npi0_amplitude=0\n"));
    let out = tmp.path().join("out");
    let o = enpp(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,lambda,mu,energy,eps_norm,G_norm,LK0"));
    let mut n = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[3], 0.0);
        assert!((cols[1] - (-cols[0]).exp()).abs() < 1e-12);
        n += 1;
    }
    assert_eq!(n, 21);
}

#[test]
fn simulate_is_deterministic_and_honours_env_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(enpp(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    assert!(enpp(&["simulate", "--config", &cfg], Some(("ENPP_OUT_DIR", &b))).status.success());
    let sa = fs::read(a.join("series.csv")).unwrap();
    assert_eq!(sa, fs::read(b.join("series.csv")).unwrap());
    // 17 significant digits per value
    let first = String::from_utf8(sa).unwrap().lines().nth(1).unwrap().to_string();
    assert!(first.split(',').all(|v| v.split('e').next().unwrap().replace(['.', '-'], "").len() == 17), "{first}");
}

#[test]
fn config_errors_exit_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "nz=48\nalpha=0.5\n");
    let o = enpp(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("alpha <= 0.2"), "{err}");
    assert!(enpp(&["simulate"], None).status.code() != Some(0));
}

#[test]
fn coercivity_reports_and_writes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "alpha=0.001\nnz=128\nntheta=32\n");
    let o = enpp(&["coercivity", "--config", &cfg, "--samples", "8", "--out", tmp.path().to_str().unwrap()], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("k0 min") && stdout.contains("coercivity_k1_min"));
    assert_eq!(fs::read_to_string(tmp.path().join("coercivity.csv")).unwrap().lines().count(), 9);
}

#[test]
fn verify_writes_table_and_csv_twin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "nz=128\nntheta=32\n");
    let o = enpp(&["verify", "--config", &cfg, "--out", tmp.path().to_str().unwrap()], None);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let csv = fs::read_to_string(tmp.path().join("verify.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert_eq!(stdout.lines().filter(|l| l.ends_with("PASS") || l.ends_with("FAIL")).count(), rows);
    // exit status follows the table
    assert_eq!(o.status.success(), !stdout.contains("FAIL"));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vrlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn ring_params_row_has_tiny_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let w = (1.0 / (4.0 * std::f64::consts::PI)).to_string();
    let o = vrlab(&["ring-params", "--kappa", "1", "--W", &w, "--eps", "1e-3", "--p", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("ring_params.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][5] <= 1e-12 && rows[0][6] <= 1e-12, "{:?}", rows[0]);
    let m = manifest(dir.path());
    assert_eq!(m["command"], "ring-params");
    assert_eq!(m["config"]["eps"], 1e-3);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn unit_speed_constant_has_no_ring_at_moderate_eps() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrlab(&["ring-params", "--kappa", "1", "--W", "1", "--eps", "1e-3", "--p", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no ring radius"));
    let o = vrlab(&["ring-params", "--kappa", "1", "--W", "1", "--eps", "1e-6", "--p", "2"], dir.path());
    assert!(o.status.success());
}

#[test]
fn sweep_writes_one_row_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrlab(&["ring-params", "--sweep", "0.1,0.05,0.025"], dir.path());
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("ring_params.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.1, 0.05, 0.025]);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["ring-params", "--eps", "1.5"][..],
        &["ring-params", "--p", "1"],
        &["ring-params", "--no-such-flag"],
        &["solve-steady", "--grid", "64"],
        &["solve-steady", "--domain", "1,0,-1,1"],
    ] {
        assert_eq!(vrlab(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    assert_eq!(vrlab(&["ground-state"], &file.join("sub")).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"eps": 0.1, "kappa": 2.0}"#).unwrap();
    let out = dir.path().join("out");
    let o = vrlab(&["ring-params", "--config", cfg.to_str().unwrap(), "--eps", "0.05"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["eps"], 0.05);
    assert_eq!(m["config"]["kappa"], 2.0);

    std::fs::write(&cfg, r#"{"eps": 0.1, "typo": 1}"#).unwrap();
    let o = vrlab(&["ring-params", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_seed_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(vrlab(&["green-check", "--seed", "5", "--threads", "1"], d).status.success());
    }
    for f in ["green.csv", "bound.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn maximizer_from_a_solved_ring_is_a_translate() {
    let dir = tempfile::tempdir().unwrap();
    let ring = dir.path().join("ring");
    let o = vrlab(&["solve-steady", "--eps", "0.05", "--grid", "256x256"], &ring);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&ring);
    assert!(m["metrics"]["diagnostics"]["defect"].as_f64().unwrap() <= 1e-10);

    let max = dir.path().join("max");
    let o = vrlab(&["maximize", "--from-ring", ring.to_str().unwrap()], &max);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&max)["metrics"]["uniqueness"]["same"], true);
}

#[test]
fn evolve_writes_monitors() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrlab(&["evolve", "--grid", "128x128", "--steps", "5", "--delta", "0.02"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("monitors.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 8));
}

#[test]
fn quick_acceptance_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrlab(&["verify-all", "--quick"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12, "{stdout}");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MINIMAL: &str = "\
mode = gill
algebra = so3
domain.kind = flat_torus
domain.lengths = 6.283185307179586, 6.283185307179586
domain.grid = 32, 32
N = 8
epsilon = 0.05
dt = 0.001
T = 0.2
initial = twist_x
output.stride = 10
";

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lie-galerkin")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn simulate(dir: &Path, text: &str, out: &str) -> Output {
    let cfg = write_config(dir, &format!("{out}.cfg"), text);
    bin(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out], dir)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed(m: &Value) -> Vec<(String, Option<String>)> {
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().map(str::to_string)))
        .collect()
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(root, &p, out);
        } else {
            out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
        }
    }
}

#[test]
fn minimal_simulation_writes_complete_output() {
    let tmp = TempDir::new().unwrap();
    let o = simulate(tmp.path(), MINIMAL, "run");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = tmp.path().join("run");
    let ledger = fs::read_to_string(run.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,l2_norm_sq,grad_energy,sphere_violation,damping_energy_integral,demag_energy,weak_residual_latest"));
    assert_eq!(ledger.lines().count(), 22);

    let m = manifest(&run);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let mut names: Vec<String> = listed(&m).into_iter().map(|(p, _)| p).collect();
    let mut present = Vec::new();
    walk(&run, &run, &mut present);
    names.sort();
    present.sort();
    assert_eq!(names, present);
    assert!(present.contains(&"snapshots/snap_000020.fld".to_string()));
    assert!(present.contains(&"snapshots/dudt_000020.fld".to_string()));
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for t in [&a, &b] {
        assert_eq!(simulate(t.path(), MINIMAL, "run").status.code(), Some(0));
    }
    let (ma, mb) = (manifest(&a.path().join("run")), manifest(&b.path().join("run")));
    assert_eq!(listed(&ma), listed(&mb));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
}

#[test]
fn negative_alpha_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = simulate(tmp.path(), &format!("{MINIMAL}alpha = -0.5\n"), "run");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn unknown_key_and_missing_config_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let o = simulate(tmp.path(), &format!("{MINIMAL}epsilonn = 1\n"), "run");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilonn"));
    assert_eq!(bin(&["simulate"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"], tmp.path()).status.code(), Some(2));
}

#[test]
fn mass_breach_exits_one_and_points_at_the_ledger() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", MINIMAL);
    let o = bin(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "run", "--tolerance", "1e-300"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("ledger.csv"), "{}", stderr(&o));
    assert!(tmp.path().join("run/ledger.csv").exists());
}

#[test]
fn verify_passes_by_default_and_fails_at_zero_tolerance() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(simulate(tmp.path(), MINIMAL, "run").status.code(), Some(0));
    let o = bin(&["verify", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("run/verify/weak_verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
    let residuals = |text: &str| -> Vec<f64> {
        text.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect()
    };
    let stored = residuals(&fs::read_to_string(tmp.path().join("run/weak_report.csv")).unwrap());
    for (a, b) in residuals(&csv).iter().zip(&stored) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    let o = bin(&["verify", "run", "--tolerance", "0", "--out", "v0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(tmp.path().join("v0/weak_verify.csv").exists());
}

#[test]
fn verify_reads_battery_config() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(simulate(tmp.path(), MINIMAL, "run").status.code(), Some(0));
    let b = write_config(tmp.path(), "battery.cfg", "modes = 3\nform = derivative\ntolerance = 0.5\n");
    let o = bin(&["verify", "run", "--config", b.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("run/verify/weak_verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    let b = write_config(tmp.path(), "bad.cfg", "form = sideways\n");
    assert_eq!(bin(&["verify", "run", "--config", b.to_str().unwrap()], tmp.path()).status.code(), Some(2));
}

#[test]
fn corrupted_or_missing_snapshots_are_named() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(simulate(tmp.path(), MINIMAL, "run").status.code(), Some(0));
    let snap = tmp.path().join("run/snapshots/snap_000007.fld");
    let mut bytes = fs::read(&snap).unwrap();
    let k = bytes.len() - 3;
    bytes[k] ^= 0x40;
    fs::write(&snap, &bytes).unwrap();
    let o = bin(&["verify", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("snap_000007.fld"), "{}", stderr(&o));

    fs::remove_file(&snap).unwrap();
    let o = bin(&["verify", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("snap_000007.fld"), "{}", stderr(&o));
}

#[test]
fn unlisted_file_breaks_manifest_completeness() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(simulate(tmp.path(), MINIMAL, "run").status.code(), Some(0));
    fs::write(tmp.path().join("run/snapshots/stray.fld"), b"x").unwrap();
    let o = bin(&["verify", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stray.fld"));
}

#[test]
fn epsilon_sweep_writes_comparison() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", MINIMAL);
    let o = bin(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "sw", "--epsilon", "0.1,0.05,0.025", "--jobs", "2"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sw = tmp.path().join("sw");
    let csv = fs::read_to_string(sw.join("epsilon_sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > rows[2][1]);
    for k in 0..3 {
        let d = fs::read_dir(&sw).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().starts_with(&format!("run_{k:02}_epsilon"))
        });
        assert_eq!(d.count(), 1);
    }
    let mut names: Vec<String> = listed(&manifest(&sw)).into_iter().map(|(p, _)| p).collect();
    let mut present = Vec::new();
    walk(&sw, &sw, &mut present);
    names.sort();
    present.sort();
    assert_eq!(names, present);

    let o = bin(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "bad", "--epsilon", "0.05,0.1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn alpha_sweep_includes_reference() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", &MINIMAL.replace("T = 0.2", "T = 0.05"));
    let o = bin(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "sw", "--alpha", "0.2,0.1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("sw/alpha_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(tmp.path().join("sw/reference_alpha_0/ledger.csv").exists());
}

#[test]
fn eigen_dumps_sorted_spectrum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", MINIMAL);
    let o = bin(&["eigen", "--config", cfg.to_str().unwrap(), "--out", "eig"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("eig/eigenvalues.csv")).unwrap();
    let lam: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(lam, vec![0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
    assert!(tmp.path().join("eig/mode_0008.fld").exists());
}

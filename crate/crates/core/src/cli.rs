//! `lie-galerkin` command line.
//!
//! Exit status: 0 success, 1 a computation or check failed, 2 bad usage,
//! configuration or input files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Scenario};
use crate::domain::{read_snapshot, write_snapshot, Field, Snapshot};
use crate::error::{Error, Result};
use crate::flow::{continuation_alpha, continuation_epsilon, run, ContinuationSetup, Sample, Trajectory};
use crate::selftest::{selftest, SelftestOptions};
use crate::verify::{
    mass_identity_check, sphere_report, standard_battery, weak_residual, Profile, TestFunction, WeakForm,
    WeakResidualReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "lie-galerkin", version, about = "Spectral-Galerkin Landau-Lifshitz flows in compact Lie algebras")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration (or battery configuration for `verify`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for sampled constants; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pass threshold: `tolerance.mass` for simulate and sweep,
    /// `tolerance.weak` for verify.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one flow and write snapshots, ledger and weak report.
    Simulate,
    /// Run a family along decreasing epsilon or alpha.
    Sweep {
        /// Comma-separated epsilon values; defaults to `sweep.epsilon`.
        #[arg(long, value_delimiter = ',', conflicts_with = "alpha")]
        epsilon: Option<Vec<f64>>,
        /// Comma-separated alpha values; defaults to `sweep.alpha`.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
    /// Re-evaluate the weak battery on a finished simulation directory.
    Verify {
        /// Directory written by `simulate`.
        dir: PathBuf,
    },
    /// Write the eigenbasis of the configured domain.
    Eigen,
    /// Run the invariant suite.
    Selftest {
        #[arg(long, hide = true)]
        inject_bracket_sign_flip: bool,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAILED
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate => cmd_simulate(&load_config(c)?),
        Command::Sweep { epsilon, alpha } => cmd_sweep(&load_config(c)?, epsilon.clone(), alpha.clone(), c.jobs),
        Command::Verify { dir } => cmd_verify(dir, c),
        Command::Eigen => cmd_eigen(&load_config(c)?),
        Command::Selftest { inject_bracket_sign_flip } => {
            let opts = SelftestOptions {
                seed: c.seed.unwrap_or(0),
                jobs: c.jobs,
                inject_bracket_sign_flip: *inject_bracket_sign_flip,
            };
            let rep = selftest(&opts)?;
            print!("{}", rep.table());
            Ok(if rep.passed() { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let path = c.config.as_ref().ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.tolerance {
        cfg.mass_tolerance = t;
    }
    cfg.check()?;
    Ok(cfg)
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that remembers every file it writes.
struct OutDir {
    root: PathBuf,
    files: Vec<(String, usize, String)>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push((rel.to_string(), bytes.len(), sha256_hex(bytes)));
        Ok(path)
    }

    fn snapshot(&mut self, rel: &str, field: &Field, t: f64) -> Result<()> {
        self.write(rel, &Snapshot::from_field(field, t).encode())?;
        Ok(())
    }

    fn finish(mut self, cfg: &RunConfig, start: f64, summary: Value) -> Result<PathBuf> {
        self.files.sort();
        let mut files: Vec<Value> =
            self.files.iter().map(|(p, n, h)| json!({"path": p, "bytes": n, "sha256": h})).collect();
        files.push(json!({"path": MANIFEST}));
        let m = json!({
            "config_hash": cfg.hash(),
            "version": env!("CARGO_PKG_VERSION"),
            "start_time": start,
            "end_time": now(),
            "summary": summary,
            "files": files,
        });
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn run_summary(tr: &Trajectory) -> Value {
    let mc = mass_identity_check(&tr.ledger);
    let sr = sphere_report(&tr.ledger, 0.0);
    json!({
        "steps": tr.steps,
        "halvings": tr.halvings,
        "final_time": tr.last().t,
        "samples": tr.samples.len(),
        "max_sphere_violation": sr.max_violation,
        "max_q": sr.max_q,
        "mass_identity_rel_drift": mc.max_rel_drift,
        "weak_residual_max": tr.weak.max,
        "failure": tr.failure,
    })
}

/// Ledger, weak report and (optionally) snapshots of one run.
fn write_run(out: &mut OutDir, prefix: &str, sc: &Scenario, tr: &Trajectory, snapshots: bool) -> Result<PathBuf> {
    out.write(&format!("{prefix}config.txt"), sc.config.to_text().as_bytes())?;
    let ledger = out.write(&format!("{prefix}ledger.csv"), tr.ledger.to_csv().as_bytes())?;
    out.write(&format!("{prefix}weak_report.csv"), tr.weak.to_csv().as_bytes())?;
    if snapshots {
        let sys = &sc.system;
        let (d, m) = (sys.domain().clone(), sys.m());
        for (k, s) in tr.samples.iter().enumerate() {
            out.snapshot(&format!("{prefix}snapshots/snap_{k:06}.fld"), &Field::new(d.clone(), m, sys.synthesize(&s.beta))?, s.t)?;
            out.snapshot(
                &format!("{prefix}snapshots/dudt_{k:06}.fld"),
                &Field::new(d.clone(), m, sys.synthesize(&s.beta_dot))?,
                s.t,
            )?;
        }
    }
    Ok(ledger)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let start = now();
    let sc = cfg.resolve()?;
    let tr = run(&sc.system, sc.beta0())?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    let ledger = write_run(&mut out, "", &sc, &tr, true)?;
    let summary = run_summary(&tr);
    out.finish(cfg, start, summary)?;
    println!("{}", tr.weak.summary());
    match &tr.failure {
        None => {
            println!("{} samples written to {}", tr.samples.len(), cfg.out_dir.display());
            Ok(EXIT_OK)
        }
        Some(msg) => {
            eprintln!("ledger assertion breached at t = {}: {msg}", tr.last().t);
            eprintln!("ledger written to {}", ledger.display());
            Ok(EXIT_FAILED)
        }
    }
}

pub fn cmd_sweep(cfg: &RunConfig, eps: Option<Vec<f64>>, alpha: Option<Vec<f64>>, jobs: Option<usize>) -> Result<i32> {
    let start = now();
    let sc = cfg.resolve()?;
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs, seed: cfg.seed };
    let eps = eps.unwrap_or_else(|| cfg.sweep_epsilon.clone());
    let alpha = alpha.unwrap_or_else(|| cfg.sweep_alpha.clone());
    let by_alpha = eps.is_empty() && !alpha.is_empty();
    if !by_alpha && eps.is_empty() {
        return Err(Error::config("sweep.epsilon", "no sweep values given"));
    }
    let mut out = OutDir::create(&cfg.out_dir)?;
    let result = if by_alpha {
        continuation_alpha(&setup, &alpha).map(|rep| {
            let mut runs: Vec<(String, String, Trajectory)> = alpha
                .iter()
                .zip(&rep.trajectories)
                .enumerate()
                .map(|(k, (a, tr))| (format!("run_{k:02}_alpha_{a}/"), format!("alpha = {a}"), tr.clone()))
                .collect();
            runs.push(("reference_alpha_0/".into(), "alpha = 0".into(), rep.reference_trajectory.clone()));
            (runs, "alpha_sweep.csv", rep.to_csv(), rep.flags)
        })
    } else {
        continuation_epsilon(&setup, &eps).map(|rep| {
            let runs = eps
                .iter()
                .zip(&rep.trajectories)
                .enumerate()
                .map(|(k, (e, tr))| (format!("run_{k:02}_epsilon_{e}/"), format!("epsilon = {e}"), tr.clone()))
                .collect();
            (runs, "epsilon_sweep.csv", rep.to_csv(), rep.flags)
        })
    };
    let (runs, name, csv, flags) = match result {
        Ok(r) => r,
        Err(e) if e.is_usage() => return Err(e),
        Err(e) => {
            eprintln!("error: {e}");
            out.finish(cfg, start, json!({"failure": e.to_string()}))?;
            return Ok(EXIT_FAILED);
        }
    };
    let mut summaries = Vec::new();
    for (dir, overrides, tr) in &runs {
        let rsc = Scenario { config: cfg.with_overrides(overrides)?, ..sc.clone() };
        write_run(&mut out, dir, &rsc, tr, false)?;
        summaries.push(json!({"dir": dir, "summary": run_summary(tr)}));
    }
    out.write(name, csv.as_bytes())?;
    for f in &flags {
        println!("flag: {f}");
    }
    print!("{csv}");
    out.finish(cfg, start, json!({"runs": summaries, "flags": flags}))?;
    Ok(EXIT_OK)
}

/// Battery options read by `verify --config`: `modes`, `form`, `tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryConfig {
    pub modes: usize,
    pub form: Option<WeakForm>,
    pub tolerance: Option<f64>,
}

impl BatteryConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut b = BatteryConfig { modes: 8, form: None, tolerance: None };
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::config(line, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "modes" => b.modes = v.parse().map_err(|_| Error::config("modes", format!("`{v}` is not an integer")))?,
                "form" => {
                    b.form = Some(match v {
                        "derivative" => WeakForm::Derivative,
                        "integrated" => WeakForm::IntegratedByParts,
                        _ => return Err(Error::config("form", format!("unknown form `{v}`"))),
                    })
                }
                "tolerance" => {
                    b.tolerance =
                        Some(v.parse().map_err(|_| Error::config("tolerance", format!("`{v}` is not a number")))?)
                }
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        Ok(b)
    }
}

/// Checks the manifest against the directory and returns the file list.
fn check_manifest(dir: &Path) -> Result<Vec<String>> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let m: Value = serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    let files = m["files"].as_array().ok_or_else(|| Error::format(&mpath, "no file list"))?;
    let mut names = Vec::new();
    for f in files {
        let p = f["path"].as_str().ok_or_else(|| Error::format(&mpath, "file entry without path"))?;
        if p == MANIFEST {
            continue;
        }
        let path = dir.join(p);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if f["sha256"].as_str() != Some(sha256_hex(&bytes).as_str()) {
            return Err(Error::format(&path, "content does not match the manifest checksum"));
        }
        names.push(p.to_string());
    }
    let mut present = Vec::new();
    list_files(dir, dir, &mut present)?;
    if let Some(extra) = present.iter().find(|p| !names.contains(p) && p.as_str() != MANIFEST) {
        return Err(Error::format(dir.join(extra), "file is not listed in the manifest"));
    }
    Ok(names)
}

/// Relative paths of all files under `dir`, skipping a `verify/` subdirectory.
fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        if path.is_dir() {
            if rel != "verify" {
                list_files(root, &path, out)?;
            }
        } else {
            out.push(rel);
        }
    }
    Ok(())
}

fn load_samples(dir: &Path, files: &[String], sc: &Scenario) -> Result<Vec<Sample>> {
    let sys = &sc.system;
    let snaps: Vec<&String> = files.iter().filter(|f| f.starts_with("snapshots/snap_")).collect();
    if snaps.is_empty() {
        return Err(Error::format(dir, "no snapshots listed in the manifest"));
    }
    let mut samples = Vec::with_capacity(snaps.len());
    for s in snaps {
        let d = s.replacen("snap_", "dudt_", 1);
        if !files.contains(&d) {
            return Err(Error::format(dir.join(&d), "missing time-derivative snapshot"));
        }
        let read = |name: &str| -> Result<(f64, Vec<f64>)> {
            let path = dir.join(name);
            let snap = read_snapshot(&path)?;
            let f = snap.to_field(sys.domain().kind())?;
            f.domain().check_same(sys.domain()).map_err(|e| Error::format(&path, e.to_string()))?;
            if f.algebra_dim() != sys.m() {
                return Err(Error::format(&path, "algebra dimension does not match the configuration"));
            }
            Ok((snap.time, sys.analyze(f.values())))
        };
        let (t, beta) = read(s)?;
        let (_, beta_dot) = read(&d)?;
        samples.push(Sample { t, beta, beta_dot });
    }
    Ok(samples)
}

pub fn cmd_verify(dir: &Path, c: &Common) -> Result<i32> {
    let start = now();
    let files = check_manifest(dir)?;
    let mut cfg = RunConfig::load(&dir.join("config.txt"))?;
    let battery_cfg = match &c.config {
        Some(p) => BatteryConfig::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => BatteryConfig { modes: 8, form: None, tolerance: None },
    };
    let tol = c.tolerance.or(battery_cfg.tolerance).unwrap_or(cfg.weak_tolerance);
    cfg.weak_tolerance = tol;
    let sc = cfg.resolve()?;
    let samples = load_samples(dir, &files, &sc)?;
    let battery: Vec<TestFunction> = standard_battery(battery_cfg.modes.min(sc.system.basis().len()));
    let form = battery_cfg.form.unwrap_or(WeakForm::default_for(cfg.alpha));
    let report: WeakResidualReport = weak_residual(&sc.system, &samples, &battery, form)?;
    let out_dir = c.out.clone().unwrap_or_else(|| dir.join("verify"));
    let mut out = OutDir::create(&out_dir)?;
    out.write("weak_verify.csv", report.to_csv().as_bytes())?;
    let passed = report.max < tol;
    println!("{}", report.summary());
    println!("tolerance {tol:.3e}: {}", if passed { "pass" } else { "FAIL" });
    out.finish(
        &cfg,
        start,
        json!({"weak_residual_max": report.max, "weak_residual_mean": report.mean, "tolerance": tol, "passed": passed,
               "profiles": Profile::ALL.len(), "tests": report.entries.len()}),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

pub fn cmd_eigen(cfg: &RunConfig) -> Result<i32> {
    let start = now();
    let sc = cfg.resolve()?;
    let basis = sc.system.basis();
    let mut out = OutDir::create(&cfg.out_dir)?;
    let mut csv = String::from("index,label,eigenvalue,residual\n");
    let labels = basis.labels();
    for (i, lam) in basis.eigenvalues().iter().enumerate() {
        let label = labels.get(i).map_or(String::new(), |l| {
            l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        });
        csv.push_str(&format!("{},{label},{lam:.17e},{:.17e}\n", i + 1, basis.residuals()[i]));
        let f = Field::new(basis.domain().clone(), 1, basis.mode(i).to_vec())?;
        out.snapshot(&format!("mode_{:04}.fld", i + 1), &f, 0.0)?;
    }
    out.write("eigenvalues.csv", csv.as_bytes())?;
    let gram = basis.gram();
    let defect = (0..gram.nrows())
        .flat_map(|i| (0..gram.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| (gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    out.finish(cfg, start, json!({"modes": basis.len(), "gram_defect": defect}))?;
    print!("{csv}");
    Ok(EXIT_OK)
}

/// Writes `snap`/`dudt` pairs for externally produced samples.
pub fn write_samples(dir: &Path, sc: &Scenario, samples: &[Sample]) -> Result<()> {
    let sys = &sc.system;
    for (k, s) in samples.iter().enumerate() {
        for (name, v) in [("snap", &s.beta), ("dudt", &s.beta_dot)] {
            let f = Field::new(sys.domain().clone(), sys.m(), sys.synthesize(v))?;
            write_snapshot(&dir.join(format!("{name}_{k:06}.fld")), &Snapshot::from_field(&f, s.t))?;
        }
    }
    Ok(())
}

//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! mode = gill_torus
//! algebra = so3
//! domain.kind = flat_torus
//! domain.lengths = 6.283185307179586, 6.283185307179586
//! domain.grid = 32, 32
//! N = 16
//! epsilon = 0.05
//! ```
//!
//! Unknown or repeated keys are errors. [`RunConfig::to_text`] writes every
//! key in a fixed order, so the text (and its hash) does not depend on the
//! order of the input.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::algebra::{
    resolve_algebra, AlgebraKernel, AnisotropyKind, AnisotropySpec, Cutoff, ForcingRegion, ForcingSpec,
};
use crate::domain::{read_snapshot, DomainKind, DomainSpec, EigenMethod, Field, ModeBasis};
use crate::error::{Error, Result};
use crate::flow::{init_coeffs, FlowMode, FlowParams, FlowSystem, InitialCoeffs, Physics, Scheme};

/// Named initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    /// `(cos x cos y, cos x sin y, sin x)` in the first three coordinates.
    TwistX,
    /// `(cos y cos x, cos y sin x, sin y)`.
    TwistY,
    /// Spatially uniform, polar angle in degrees from `e3` toward `e1`.
    Uniform(f64),
    Constant(Vec<f64>),
    Snapshot(PathBuf),
}

impl InitialSpec {
    fn parse(s: &str) -> Result<Self> {
        let err = |m: String| Error::config("initial", m);
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (head, arg) {
            ("twist_x", None) => Ok(InitialSpec::TwistX),
            ("twist_y", None) => Ok(InitialSpec::TwistY),
            ("uniform", Some(a)) => a
                .parse()
                .map(InitialSpec::Uniform)
                .map_err(|_| err(format!("bad polar angle `{a}`"))),
            ("constant", Some(a)) => Ok(InitialSpec::Constant(parse_list("initial", a)?)),
            ("snapshot", Some(a)) => Ok(InitialSpec::Snapshot(PathBuf::from(a))),
            _ => Err(err(format!(
                "unknown profile `{s}` (twist_x, twist_y, uniform:<deg>, constant:<list>, snapshot:<path>)"
            ))),
        }
    }

    fn to_text(&self) -> String {
        match self {
            InitialSpec::TwistX => "twist_x".into(),
            InitialSpec::TwistY => "twist_y".into(),
            InitialSpec::Uniform(a) => format!("uniform:{a}"),
            InitialSpec::Constant(v) => format!("constant:{}", join(v)),
            InitialSpec::Snapshot(p) => format!("snapshot:{}", p.display()),
        }
    }

    /// Samples the profile on `domain` for an `m`-dimensional algebra.
    pub fn field(&self, domain: &DomainSpec, m: usize) -> Result<Field> {
        let need3 = || {
            if m < 3 {
                Err(Error::config("initial", format!("profile needs an algebra of dimension >= 3, got {m}")))
            } else {
                Ok(())
            }
        };
        let coord = |x: &[f64], a: usize| -> f64 {
            // scale each axis to a 2 pi period
            x.get(a).map_or(0.0, |v| 2.0 * PI * v / domain.lengths()[a])
        };
        match self {
            InitialSpec::TwistX | InitialSpec::TwistY => {
                need3()?;
                let (pa, sa) = if *self == InitialSpec::TwistX { (0, 1) } else { (1, 0) };
                Ok(Field::from_fn(domain, m, |x, o| {
                    let (p, s) = (coord(x, pa), coord(x, sa));
                    o[0] = p.cos() * s.cos();
                    o[1] = p.cos() * s.sin();
                    o[2] = p.sin();
                }))
            }
            InitialSpec::Uniform(deg) => {
                need3()?;
                let th = deg.to_radians();
                Ok(Field::from_fn(domain, m, |_, o| {
                    o[0] = th.sin();
                    o[2] = th.cos();
                }))
            }
            InitialSpec::Constant(v) => {
                if v.len() != m {
                    return Err(Error::config("initial", format!("constant has {} entries, algebra has {m}", v.len())));
                }
                Ok(Field::from_fn(domain, m, |_, o| o.copy_from_slice(v)))
            }
            InitialSpec::Snapshot(path) => {
                let snap = read_snapshot(path)?;
                let f = snap.to_field(domain.kind())?;
                f.domain()
                    .check_same(domain)
                    .map_err(|e| Error::config("initial", format!("{}: {e}", path.display())))?;
                if f.algebra_dim() != m {
                    return Err(Error::config("initial", format!("{}: snapshot has m = {}", path.display(), f.algebra_dim())));
                }
                Ok(f)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnisotropyConfig {
    None,
    QuadraticDiagonal(Vec<f64>),
    CustomTable(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingConfig {
    None,
    /// `[a, z]`.
    Bracket(Vec<f64>),
    /// `cos(k.x - omega t) [a, z]`.
    BracketWave { a: Vec<f64>, k: Vec<f64>, omega: f64 },
}

/// Coupling function `f` of the weighted operator.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightConfig {
    Constant,
    /// `c + a sin(2 pi x1 / L1)`.
    Sine { c: f64, a: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: FlowMode,
    /// Built-in name or structure-constant file.
    pub algebra: String,
    pub domain_kind: DomainKind,
    pub lengths: Vec<f64>,
    pub grid: Vec<usize>,
    pub n_modes: usize,
    pub weight: WeightConfig,
    pub weight_tol: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub anisotropy: AnisotropyConfig,
    pub delta0: f64,
    pub demag: bool,
    pub forcing: ForcingConfig,
    pub initial: InitialSpec,
    pub stride: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub mass_tolerance: f64,
    /// Pass threshold of `verify` on the battery maximum.
    pub weak_tolerance: f64,
    pub sphere_tolerance: f64,
    pub q_tolerance: f64,
    pub sweep_epsilon: Vec<f64>,
    pub sweep_alpha: Vec<f64>,
}

/// The reference scenario: so(3) on the `(2 pi)^2` torus, `32^2` points,
/// 16 modes, `f = 1`, `epsilon = 0.05`, `T = 1`.
pub const REFERENCE_CONFIG: &str = "\
mode = gill_torus
algebra = so3
domain.kind = flat_torus
domain.lengths = 6.283185307179586, 6.283185307179586
domain.grid = 32, 32
N = 16
epsilon = 0.05
dt = 0.001
T = 1
initial = twist_x
output.stride = 10
";

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: FlowMode::LlgBoundary,
            algebra: "so3".into(),
            domain_kind: DomainKind::NeumannBox,
            lengths: vec![1.0],
            grid: vec![32],
            n_modes: 8,
            weight: WeightConfig::Constant,
            weight_tol: 1e-10,
            epsilon: 0.0,
            alpha: 0.0,
            alpha0: 1.0,
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::Rk4,
            anisotropy: AnisotropyConfig::None,
            delta0: 0.25,
            demag: false,
            forcing: ForcingConfig::None,
            initial: InitialSpec::TwistX,
            stride: 10,
            out_dir: PathBuf::from("out"),
            seed: 0,
            mass_tolerance: 1e-6,
            weak_tolerance: 0.5,
            sphere_tolerance: 1e-6,
            q_tolerance: 1e-8,
            sweep_epsilon: Vec::new(),
            sweep_alpha: Vec::new(),
        }
    }
}

const KEYS: &[&str] = &[
    "mode",
    "algebra",
    "domain.kind",
    "domain.lengths",
    "domain.grid",
    "N",
    "weight",
    "weight.tol",
    "epsilon",
    "alpha",
    "alpha0",
    "dt",
    "T",
    "scheme",
    "anisotropy",
    "anisotropy.lambdas",
    "anisotropy.table",
    "anisotropy.delta0",
    "demag",
    "forcing",
    "forcing.a",
    "forcing.k",
    "forcing.omega",
    "initial",
    "output.stride",
    "output.dir",
    "seed",
    "tolerance.mass",
    "tolerance.weak",
    "tolerance.sphere",
    "tolerance.q",
    "sweep.epsilon",
    "sweep.alpha",
];

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::config(key, format!("`{s}` is not a number")))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(key, x)).collect()
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::config(key, format!("`{s}` is not a non-negative integer")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("`{s}` is not a boolean"))),
    }
}

fn as_text_f64(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

impl RunConfig {
    /// Parses configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in Self::parse_pairs(text)? {
            if raw.insert(k.clone(), v).is_some() {
                return Err(Error::config(k, "key given twice"));
            }
        }
        Self::from_map(&raw)
    }

    fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", no + 1), format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::config(k, "unknown key"));
            }
            out.push((k, v));
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn from_map(raw: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        let get = |k: &str| raw.get(k).map(|s| s.as_str());
        if let Some(v) = get("mode") {
            c.mode = FlowMode::parse(v).ok_or_else(|| Error::config("mode", format!("unknown mode `{v}`")))?;
        }
        if let Some(v) = get("algebra") {
            c.algebra = v.to_string();
        }
        if let Some(v) = get("domain.kind") {
            c.domain_kind =
                DomainKind::parse(v).ok_or_else(|| Error::config("domain.kind", format!("unknown domain `{v}`")))?;
        } else if c.mode == FlowMode::GillTorus {
            c.domain_kind = DomainKind::FlatTorus;
        }
        if let Some(v) = get("domain.lengths") {
            c.lengths = parse_list("domain.lengths", v)?;
        }
        if let Some(v) = get("domain.grid") {
            c.grid = v.split(',').map(|s| parse_usize("domain.grid", s)).collect::<Result<_>>()?;
        }
        if let Some(v) = get("N") {
            c.n_modes = parse_usize("N", v)?;
        }
        if let Some(v) = get("weight") {
            c.weight = match v.split(':').collect::<Vec<_>>()[..] {
                ["1"] | ["constant"] => WeightConfig::Constant,
                ["sine", cs, a] => WeightConfig::Sine { c: parse_f64("weight", cs)?, a: parse_f64("weight", a)? },
                _ => return Err(Error::config("weight", format!("expected `constant` or `sine:<c>:<a>`, got `{v}`"))),
            };
        }
        let f = |k: &str, d: f64| -> Result<f64> { get(k).map_or(Ok(d), |v| parse_f64(k, v)) };
        c.weight_tol = f("weight.tol", c.weight_tol)?;
        c.epsilon = f("epsilon", c.epsilon)?;
        c.alpha = f("alpha", c.alpha)?;
        c.alpha0 = f("alpha0", c.alpha0)?;
        c.dt = f("dt", c.dt)?;
        c.t_final = f("T", c.t_final)?;
        if let Some(v) = get("scheme") {
            c.scheme = Scheme::parse(v).ok_or_else(|| Error::config("scheme", format!("unknown scheme `{v}`")))?;
        }
        c.delta0 = f("anisotropy.delta0", c.delta0)?;
        c.anisotropy = match get("anisotropy").unwrap_or("none") {
            "none" => AnisotropyConfig::None,
            "quadratic_diagonal" => AnisotropyConfig::QuadraticDiagonal(parse_list(
                "anisotropy.lambdas",
                get("anisotropy.lambdas").ok_or_else(|| Error::config("anisotropy.lambdas", "required"))?,
            )?),
            "custom_table" => AnisotropyConfig::CustomTable(parse_list(
                "anisotropy.table",
                get("anisotropy.table").ok_or_else(|| Error::config("anisotropy.table", "required"))?,
            )?),
            other => return Err(Error::config("anisotropy", format!("unknown kind `{other}`"))),
        };
        if let Some(v) = get("demag") {
            c.demag = parse_bool("demag", v)?;
        }
        let list = |k: &str| -> Result<Vec<f64>> {
            parse_list(k, get(k).ok_or_else(|| Error::config(k, "required"))?)
        };
        c.forcing = match get("forcing").unwrap_or("none") {
            "none" => ForcingConfig::None,
            "bracket" => ForcingConfig::Bracket(list("forcing.a")?),
            "bracket_wave" => {
                ForcingConfig::BracketWave { a: list("forcing.a")?, k: list("forcing.k")?, omega: f("forcing.omega", 0.0)? }
            }
            other => return Err(Error::config("forcing", format!("unknown forcing `{other}`"))),
        };
        if let Some(v) = get("initial") {
            c.initial = InitialSpec::parse(v)?;
        }
        if let Some(v) = get("output.stride") {
            c.stride = parse_usize("output.stride", v)?;
        }
        if let Some(v) = get("output.dir") {
            c.out_dir = PathBuf::from(v);
        }
        if let Some(v) = get("seed") {
            c.seed = v.trim().parse().map_err(|_| Error::config("seed", format!("`{v}` is not an integer")))?;
        }
        c.mass_tolerance = f("tolerance.mass", c.mass_tolerance)?;
        c.weak_tolerance = f("tolerance.weak", c.weak_tolerance)?;
        c.sphere_tolerance = f("tolerance.sphere", c.sphere_tolerance)?;
        c.q_tolerance = f("tolerance.q", c.q_tolerance)?;
        if let Some(v) = get("sweep.epsilon") {
            c.sweep_epsilon = parse_list("sweep.epsilon", v)?;
        }
        if let Some(v) = get("sweep.alpha") {
            c.sweep_alpha = parse_list("sweep.alpha", v)?;
        }
        c.check()?;
        Ok(c)
    }

    /// Checks that do not need the algebra or the basis.
    pub fn check(&self) -> Result<()> {
        let tol = |k: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(k, format!("{v} must be a non-negative number")))
            }
        };
        tol("tolerance.weak", self.weak_tolerance)?;
        tol("tolerance.sphere", self.sphere_tolerance)?;
        tol("tolerance.q", self.q_tolerance)?;
        if !(self.weight_tol > 0.0) {
            return Err(Error::config("weight.tol", "must be positive"));
        }
        if let WeightConfig::Sine { c, a } = self.weight {
            if !(c - a.abs() > 0.0) {
                return Err(Error::config("weight", format!("f = {c} + {a} sin(.) is not positive")));
            }
            if self.mode != FlowMode::GillTorus {
                return Err(Error::config("weight", "a coupling function needs mode = gill_torus"));
            }
        }
        if self.n_modes == 0 {
            return Err(Error::config("N", "mode count must be positive"));
        }
        self.flow_params().validate_basic()
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            mode: self.mode,
            alpha0: self.alpha0,
            alpha: self.alpha,
            epsilon: self.epsilon,
            dt: self.dt,
            t_final: self.t_final,
            scheme: self.scheme,
            demag: self.demag,
            stride: self.stride,
            mass_tolerance: self.mass_tolerance,
        }
    }

    /// Canonical text: every key, fixed order, round-trip exact numbers.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let fl = |v: &[f64]| v.iter().map(|x| as_text_f64(*x)).collect::<Vec<_>>().join(", ");
        kv("mode", self.mode.as_str().into());
        kv("algebra", self.algebra.clone());
        kv("domain.kind", self.domain_kind.as_str().into());
        kv("domain.lengths", fl(&self.lengths));
        kv("domain.grid", join(&self.grid));
        kv("N", self.n_modes.to_string());
        kv(
            "weight",
            match self.weight {
                WeightConfig::Constant => "constant".into(),
                WeightConfig::Sine { c, a } => format!("sine:{}:{}", as_text_f64(c), as_text_f64(a)),
            },
        );
        kv("weight.tol", as_text_f64(self.weight_tol));
        kv("epsilon", as_text_f64(self.epsilon));
        kv("alpha", as_text_f64(self.alpha));
        kv("alpha0", as_text_f64(self.alpha0));
        kv("dt", as_text_f64(self.dt));
        kv("T", as_text_f64(self.t_final));
        kv("scheme", self.scheme.as_str().into());
        match &self.anisotropy {
            AnisotropyConfig::None => kv("anisotropy", "none".into()),
            AnisotropyConfig::QuadraticDiagonal(l) => {
                kv("anisotropy", "quadratic_diagonal".into());
                kv("anisotropy.lambdas", fl(l));
            }
            AnisotropyConfig::CustomTable(t) => {
                kv("anisotropy", "custom_table".into());
                kv("anisotropy.table", fl(t));
            }
        }
        kv("anisotropy.delta0", as_text_f64(self.delta0));
        kv("demag", self.demag.to_string());
        match &self.forcing {
            ForcingConfig::None => kv("forcing", "none".into()),
            ForcingConfig::Bracket(a) => {
                kv("forcing", "bracket".into());
                kv("forcing.a", fl(a));
            }
            ForcingConfig::BracketWave { a, k, omega } => {
                kv("forcing", "bracket_wave".into());
                kv("forcing.a", fl(a));
                kv("forcing.k", fl(k));
                kv("forcing.omega", as_text_f64(*omega));
            }
        }
        kv("initial", self.initial.to_text());
        kv("output.stride", self.stride.to_string());
        kv("output.dir", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("tolerance.mass", as_text_f64(self.mass_tolerance));
        kv("tolerance.weak", as_text_f64(self.weak_tolerance));
        kv("tolerance.sphere", as_text_f64(self.sphere_tolerance));
        kv("tolerance.q", as_text_f64(self.q_tolerance));
        kv("sweep.epsilon", fl(&self.sweep_epsilon));
        kv("sweep.alpha", fl(&self.sweep_alpha));
        s
    }

    /// This configuration with the keys in `text` replaced.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let mut lines: Vec<(String, String)> = self
            .to_text()
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
            .collect();
        for o in Self::parse_pairs(text)? {
            match lines.iter_mut().find(|(k, _)| *k == o.0) {
                Some(slot) => slot.1 = o.1,
                None => lines.push(o),
            }
        }
        let merged: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::parse(&merged)
    }

    /// SHA-256 of the canonical text, hex.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_text().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.domain_kind, self.lengths.clone(), self.grid.clone())
            .map_err(|e| retag(e, "domain"))
    }

    /// Builds algebra, basis, physics and initial coefficients.
    pub fn resolve(&self) -> Result<Scenario> {
        let alg = resolve_algebra(&self.algebra).map_err(|e| retag(e, "algebra"))?;
        let domain = self.domain()?;
        let m = alg.dim();
        let basis = match self.weight {
            WeightConfig::Constant => match self.domain_kind {
                DomainKind::NeumannBox => ModeBasis::neumann(&domain, self.n_modes),
                DomainKind::FlatTorus => ModeBasis::fourier(&domain, self.n_modes),
            },
            WeightConfig::Sine { c, a } => {
                let l = domain.lengths()[0];
                let f: Vec<f64> = domain.points().iter().map(|x| c + a * (2.0 * PI * x[0] / l).sin()).collect();
                ModeBasis::weighted(&domain, &f, self.n_modes, self.weight_tol, EigenMethod::Auto)
            }
        }
        .map_err(|e| retag(e, "N"))?;
        let cutoff = Cutoff::new(self.delta0).map_err(|e| retag(e, "anisotropy.delta0"))?;
        let anisotropy = match &self.anisotropy {
            AnisotropyConfig::None => None,
            AnisotropyConfig::QuadraticDiagonal(l) => Some(
                AnisotropySpec::new(alg.clone(), AnisotropyKind::QuadraticDiagonal(l.clone()), cutoff)
                    .map_err(|e| retag(e, "anisotropy.lambdas"))?,
            ),
            AnisotropyConfig::CustomTable(t) => Some(
                AnisotropySpec::new(alg.clone(), AnisotropyKind::CustomTable(t.clone()), cutoff)
                    .map_err(|e| retag(e, "anisotropy.table"))?,
            ),
        };
        let region = ForcingRegion { lengths: domain.lengths().to_vec(), t_max: self.t_final, samples: 10_000, seed: self.seed };
        let check_len = |k: &str, v: &[f64], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::config(k, format!("expected {n} entries, got {}", v.len())))
            }
        };
        let forcing = match &self.forcing {
            ForcingConfig::None => None,
            ForcingConfig::Bracket(a) => {
                check_len("forcing.a", a, m)?;
                let cb = ForcingSpec::bracket_callback(alg.clone(), a.clone());
                Some(ForcingSpec::register("bracket", alg.clone(), cb, cutoff, &region)?)
            }
            ForcingConfig::BracketWave { a, k, omega } => {
                check_len("forcing.a", a, m)?;
                check_len("forcing.k", k, domain.space_dim())?;
                let cb = ForcingSpec::bracket_wave_callback(alg.clone(), a.clone(), k.clone(), *omega);
                Some(ForcingSpec::register("bracket_wave", alg.clone(), cb, cutoff, &region)?)
            }
        };
        let physics = Physics { anisotropy, forcing, demag: None };
        let basis = Arc::new(basis);
        let system = FlowSystem::new(alg.clone(), basis.clone(), self.flow_params(), physics)?;
        let u0 = self.initial.field(&domain, m)?;
        let initial = init_coeffs(&basis, alg.as_ref(), &u0)?;
        Ok(Scenario { config: self.clone(), algebra: alg, system, initial })
    }
}

/// Moves algebra/domain/basis errors onto the config key that caused them.
fn retag(e: Error, field: &str) -> Error {
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::Format { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

/// A resolved configuration, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: RunConfig,
    pub algebra: Arc<dyn AlgebraKernel>,
    pub system: FlowSystem,
    pub initial: InitialCoeffs,
}

impl Scenario {
    pub fn reference() -> Result<Self> {
        RunConfig::parse(REFERENCE_CONFIG)?.resolve()
    }

    pub fn beta0(&self) -> &[f64] {
        &self.initial.state.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn reference_parses_and_resolves() {
        let sc = Scenario::reference().unwrap();
        let c = &sc.config;
        assert_eq!(c.mode, FlowMode::GillTorus);
        assert_eq!(c.domain_kind, DomainKind::FlatTorus);
        assert_eq!(sc.system.basis().len(), 16);
        assert_eq!(sc.beta0().len(), 48);
        assert!(sc.initial.reconstruction_error < 1e-10);
    }

    #[test]
    fn round_trip_is_exact() {
        let text = "mode = llg\nalgebra = so3\ndomain.lengths = 1, 0.1\ndomain.grid = 8, 6\nepsilon = 0.1\n\
                    anisotropy = quadratic_diagonal\nanisotropy.lambdas = 0, 1, 1\nforcing = bracket\nforcing.a = 0.1, 0.2, 0.3\n\
                    sweep.epsilon = 0.1, 0.05\ninitial = uniform:60\n";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
        assert_eq!(c.lengths, vec![1.0, 0.1]);
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = RunConfig::parse("epsilon = 0.05\nalpha = 0.1\nN = 4").unwrap();
        let b = RunConfig::parse("N = 4\nalpha = 0.1\n# comment\n\nepsilon = 0.05").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse("N = 4\nalpha = 0.2\nepsilon = 0.05").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(RunConfig::parse("alpha = -1").unwrap_err()), "alpha");
        assert_eq!(field_of(RunConfig::parse("alpha = x").unwrap_err()), "alpha");
        assert_eq!(field_of(RunConfig::parse("bogus = 1").unwrap_err()), "bogus");
        assert_eq!(field_of(RunConfig::parse("N = 1\nN = 2").unwrap_err()), "N");
        assert_eq!(field_of(RunConfig::parse("scheme = euler").unwrap_err()), "scheme");
        assert_eq!(field_of(RunConfig::parse("anisotropy = quadratic_diagonal").unwrap_err()), "anisotropy.lambdas");
        assert_eq!(field_of(RunConfig::parse("mode = gill\ndemag = true").unwrap_err()), "demag");
        assert_eq!(field_of(RunConfig::parse("weight = sine:1:2\nmode = gill").unwrap_err()), "weight");
        assert_eq!(field_of(RunConfig::parse("just text").unwrap_err()), "line 1");
        let bad = RunConfig::parse("algebra = nope").unwrap();
        assert_eq!(field_of(bad.resolve().unwrap_err()), "algebra");
        let bad = RunConfig::parse("domain.grid = 2").unwrap();
        assert_eq!(field_of(bad.resolve().unwrap_err()), "domain.grid");
        let bad = RunConfig::parse("initial = constant:1, 1, 0").unwrap();
        assert_eq!(field_of(bad.resolve().unwrap_err()), "initial");
    }

    #[test]
    fn weighted_basis_from_config() {
        let c = RunConfig::parse(
            "mode = gill\ndomain.lengths = 6.283185307179586\ndomain.grid = 64\nN = 5\nweight = sine:2:1\ninitial = twist_x",
        )
        .unwrap();
        let sc = c.resolve().unwrap();
        assert!(sc.system.basis().weight().is_some());
        assert!(sc.system.basis().eigenvalues()[0].abs() < 1e-10);
    }
}

//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL`
//! line to stderr, bypassing the test harness capture.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lie_galerkin::algebra::{builtin, AlgebraKernel, LieAlgebra};
use lie_galerkin::config::Scenario;
use lie_galerkin::demag::DemagOperator;
use lie_galerkin::domain::DomainSpec;
use lie_galerkin::flow::{
    block_inner, continuation_alpha, continuation_epsilon, run, ContinuationSetup, FlowParams, Trajectory,
};
use lie_galerkin::selftest::{
    ball_interior_deviation, energy_config, macrospin_config, random_field, reference_with, weighted_basis_errors,
};
use lie_galerkin::verify::{energy_ledger_check, mass_identity_check, sphere_report, BoundConstants};

static SERIAL: Mutex<()> = Mutex::new(());

struct Criterion {
    id: u32,
    name: &'static str,
    start: Instant,
    limit: Duration,
    lines: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u32, name: &'static str, limit_secs: u64) -> Self {
        Criterion { id, name, start: Instant::now(), limit: Duration::from_secs(limit_secs), lines: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.lines.push((what.into(), ok));
    }

    fn finish(mut self) {
        let el = self.start.elapsed();
        self.check(format!("runtime {:.1}s < {}s", el.as_secs_f64(), self.limit.as_secs()), el < self.limit);
        let ok = self.lines.iter().all(|(_, o)| *o);
        let detail: Vec<String> =
            self.lines.iter().map(|(s, o)| if *o { s.clone() } else { format!("{s} [FAILED]") }).collect();
        let line = format!(
            "\ncriterion {:>2} {:<28} {}  {}\n",
            self.id,
            self.name,
            if ok { "PASS" } else { "FAIL" },
            detail.join("; ")
        );
        let _ = std::io::stderr().write_all(line.as_bytes());
        assert!(ok, "{line}");
    }
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect()
}

fn max_beta_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.samples.len(), b.samples.len());
    a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| x.beta.iter().zip(&y.beta).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_algebra_identities() {
    let _g = lock();
    let mut c = Criterion::new(1, "algebra identities", 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in ["so3", "su2", "so4"] {
        let alg: LieAlgebra = builtin(name).unwrap();
        let m = alg.dim();
        let (mut ad, mut jac): (f64, f64) = (0.0, 0.0);
        for _ in 0..1000 {
            let (x, y, z) = (uniform(&mut rng, m), uniform(&mut rng, m), uniform(&mut rng, m));
            let scale = alg.norm(&x) * alg.norm(&y) * alg.norm(&z);
            let r = alg.inner(&alg.bracket(&x, &y), &z) + alg.inner(&y, &alg.bracket(&x, &z));
            ad = ad.max(r.abs() / scale);
            let j1 = alg.bracket(&x, &alg.bracket(&y, &z));
            let j2 = alg.bracket(&y, &alg.bracket(&z, &x));
            let j3 = alg.bracket(&z, &alg.bracket(&x, &y));
            let jr = (0..m).map(|k| (j1[k] + j2[k] + j3[k]).abs()).fold(0.0, f64::max);
            jac = jac.max(jr / scale);
        }
        // B_ij = sum_{k,l} c_ik^l c_jl^k from the structure constants
        let killing = DMatrix::from_fn(m, m, |i, j| {
            let mut s = 0.0;
            for k in 0..m {
                for l in 0..m {
                    s += alg.structure_constant(i, k, l) * alg.structure_constant(j, l, k);
                }
            }
            s
        });
        let top = SymmetricEigen::new(killing).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.check(format!("{name} ad {ad:.1e} <= 1e-12"), ad <= 1e-12);
        c.check(format!("{name} jacobi {jac:.1e} < 1e-12"), jac < 1e-12);
        c.check(format!("{name} max eig(B) {top:.2} < 0"), top < 0.0);
    }
    c.finish();
}

#[test]
fn criterion_02_a_antisymmetry() {
    let _g = lock();
    let mut c = Criterion::new(2, "A antisymmetry", 10);
    for (label, overrides) in [("gill", "alpha = 0.5"), ("llg", "mode = llg\ndomain.kind = neumann_box\nalpha = 0.5")] {
        let sc = reference_with(overrides).unwrap();
        let sys = &sc.system;
        let alg = sys.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut anti, mut trip): (f64, f64) = (0.0, 0.0);
        for _ in 0..10 {
            let beta: Vec<f64> = uniform(&mut rng, sys.dim()).iter().map(|v| 2.0 * v).collect();
            let j = sys.project(&sys.synthesize(&beta));
            for _ in 0..20 {
                let (v, w) = (uniform(&mut rng, sys.dim()), uniform(&mut rng, sys.dim()));
                let s = block_inner(alg.as_ref(), &sys.apply_a(&j, &v), &w)
                    + block_inner(alg.as_ref(), &v, &sys.apply_a(&j, &w));
                anti = anti.max(s.abs());
            }
            let b = uniform(&mut rng, sys.dim());
            let x = sys.solve_velocity(&j, &b).unwrap();
            let ax = sys.apply_a(&j, &x);
            trip = trip.max((0..b.len()).map(|k| (x[k] + ax[k] - b[k]).abs()).fold(0.0, f64::max));
        }
        c.check(format!("{label} <Av,w>+<v,Aw> {anti:.1e} < 1e-10"), anti < 1e-10);
        c.check(format!("{label} round trip {trip:.1e} < 1e-12"), trip < 1e-12);
    }
    c.finish();
}

#[test]
fn criterion_03_discrete_l2_law() {
    let _g = lock();
    let mut c = Criterion::new(3, "discrete L2 law", 60);
    let sc = reference_with("epsilon = 0\ninitial = twist_y").unwrap();
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let l0 = tr.ledger.rows[0].l2_norm_sq;
    let drift = tr.ledger.rows.iter().map(|r| (r.l2_norm_sq - l0).abs()).fold(0.0, f64::max);
    c.check(format!("eps=0 drift {drift:.1e} < 1e-8"), drift < 1e-8);
    c.check("reaches t=1", (tr.last().t - 1.0).abs() < 1e-12);

    let sc = reference_with("initial = twist_y").unwrap();
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let eps = sc.system.params().epsilon;
    let ident: Vec<f64> = tr.ledger.rows.iter().map(|r| r.l2_norm_sq + 2.0 * eps * r.grad_integral).collect();
    let dev = ident.iter().map(|v| (v - ident[0]).abs()).fold(0.0, f64::max);
    let loss = ident[0] - tr.ledger.rows.last().unwrap().l2_norm_sq;
    c.check(format!("eps=0.05 identity drift {dev:.1e} < 1e-6"), dev < 1e-6);
    c.check(format!("dissipated {loss:.2e} > 0"), loss > 1e-3);
    c.check(
        format!("ledger agrees {:.1e}", mass_identity_check(&tr.ledger).max_abs_drift),
        (mass_identity_check(&tr.ledger).max_abs_drift - dev).abs() < 1e-12,
    );
    c.finish();
}

#[test]
fn criterion_04_sphere_bound() {
    let _g = lock();
    let mut c = Criterion::new(4, "sphere bound", 60);
    let sc = Scenario::reference().unwrap();
    let u0 = sc.system.synthesize(sc.beta0());
    let alg = sc.system.algebra().clone();
    let m = sc.system.m();
    let unit = u0.chunks(m).map(|x| (alg.norm(x) - 1.0).abs()).fold(0.0, f64::max);
    c.check(format!("|u0| = 1 within {unit:.1e}"), unit < 1e-12);
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let r = sphere_report(&tr.ledger, 1e-8);
    c.check(format!("reference max(|u|-1) {:.1e} <= 1e-6", r.max_violation), r.max_violation <= 1e-6);
    c.check(format!("reference max q {:.1e} <= 1e-8", r.max_q), r.max_q <= 1e-8);

    let sc = reference_with("initial = twist_y\nN = 45").unwrap();
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let r = sphere_report(&tr.ledger, 1e-8);
    c.check(format!("twist_y N=45 max(|u|-1) {:.1e} <= 1e-6", r.max_violation), r.max_violation <= 1e-6);
    c.check(format!("twist_y N=45 max q {:.1e} <= 1e-8", r.max_q), r.max_q <= 1e-8);

    // truncation of a nonlinear profile at N=16 is not unit length; reported only
    let sc = reference_with("initial = twist_y").unwrap();
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let r = sphere_report(&tr.ledger, 1e-8);
    c.check(format!("info: twist_y N=16 max(|u|-1) {:.1e}", r.max_violation), true);
    c.finish();
}

#[test]
fn criterion_05_macrospin() {
    let _g = lock();
    let mut c = Criterion::new(5, "macrospin closed form", 5);
    let cfg = macrospin_config();
    assert_eq!((cfg.alpha, cfg.epsilon, cfg.dt, cfg.t_final), (0.0, 0.0, 1e-3, 1.0));
    let sc = cfg.resolve().unwrap();
    let tr = run(&sc.system, sc.beta0()).unwrap();
    // u_t = -u x h with h = -grad(u3^2) = -2 u3 e3: rotation about e3 at rate 2 u3
    let th = PI / 3.0;
    let w = 2.0 * th.cos();
    let mut worst: f64 = 0.0;
    for s in &tr.samples {
        let exact = [th.sin() * (w * s.t).cos(), -th.sin() * (w * s.t).sin(), th.cos()];
        worst = worst.max((0..3).map(|a| (s.beta[a] - exact[a]).abs()).fold(0.0, f64::max));
    }
    let end = tr.last();
    let exact = [th.sin() * w.cos(), -th.sin() * w.sin(), th.cos()];
    let terminal = (0..3).map(|a| (end.beta[a] - exact[a]).abs()).fold(0.0, f64::max);
    c.check(format!("terminal error {terminal:.1e} < 1e-6"), terminal < 1e-6 && (end.t - 1.0).abs() < 1e-12);
    c.check(format!("path error {worst:.1e} < 1e-6"), worst < 1e-6);
    c.finish();
}

#[test]
fn criterion_06_cross_product_equivalence() {
    let _g = lock();
    let mut c = Criterion::new(6, "cross product equivalence", 30);
    let mac = macrospin_config();
    let mut cross = mac.clone();
    cross.algebra = "cross".into();
    let (a, b) = (mac.resolve().unwrap(), cross.resolve().unwrap());
    let d = max_beta_diff(&run(&a.system, a.beta0()).unwrap(), &run(&b.system, b.beta0()).unwrap());
    c.check(format!("macrospin {d:.1e} < 1e-12"), d < 1e-12);

    let torus = "alpha = 0.1\ninitial = twist_y\ndomain.grid = 16, 16\nN = 9\nT = 0.25";
    let a = reference_with(torus).unwrap();
    let b = reference_with(&format!("{torus}\nalgebra = cross")).unwrap();
    assert_eq!(b.system.algebra().name(), "cross");
    let d = max_beta_diff(&run(&a.system, a.beta0()).unwrap(), &run(&b.system, b.beta0()).unwrap());
    c.check(format!("16^2 torus {d:.1e} < 1e-12"), d < 1e-12);
    c.finish();
}

#[test]
fn criterion_07_stray_field_bounds() {
    let _g = lock();
    let mut c = Criterion::new(7, "stray field bounds", 120);
    let d = DomainSpec::neumann_box(&[1.0, 1.0, 1.0], &[32, 32, 32]).unwrap();
    let op = DemagOperator::new(&d, 3).unwrap();
    let (mut contraction, mut lipschitz) = (f64::INFINITY, f64::INFINITY);
    let mut prev = random_field(&d, 3, 7000);
    for k in 0..100 {
        let u = random_field(&d, 3, 7001 + k);
        let (h2, u2) = op.lemma_norms(&u).unwrap();
        contraction = contraction.min(u2 - h2);
        let (h2, u2) = op.lemma_norms(&u.sub(&prev).unwrap()).unwrap();
        lipschitz = lipschitz.min(u2 - h2);
        prev = u;
    }
    c.check(format!("contraction slack {contraction:.2e} >= -1e-10"), contraction >= -1e-10);
    c.check(format!("lipschitz slack {lipschitz:.2e} >= -1e-10"), lipschitz >= -1e-10);
    let ball = ball_interior_deviation(32).unwrap();
    c.check(format!("ball interior 32^3 {:.1}% < 10%", 100.0 * ball), ball < 0.10);
    if std::env::var_os("LIE_GALERKIN_LARGE").is_some() {
        c.limit = Duration::from_secs(720);
        let ball = ball_interior_deviation(64).unwrap();
        c.check(format!("ball interior 64^3 {:.1}% < 5%", 100.0 * ball), ball < 0.05);
    } else {
        c.check("64^3 ball skipped (set LIE_GALERKIN_LARGE)", true);
    }
    c.finish();
}

#[test]
fn criterion_08_energy_ledger() {
    let _g = lock();
    let mut c = Criterion::new(8, "energy ledger", 120);
    let sc = energy_config().resolve().unwrap();
    let p = sc.system.params();
    assert!(p.demag && p.alpha == 0.1 && p.epsilon == 0.05);
    let tr = run(&sc.system, sc.beta0()).unwrap();
    let k = BoundConstants::sample(&sc.system, 100_000, 10_000, 8).unwrap();
    let check = energy_ledger_check(&sc.system, &tr.ledger, &k);
    let later = check.points.iter().skip(1).map(|p| p.rhs - p.lhs).fold(f64::INFINITY, f64::min);
    c.check(format!("min margin {:.2e} >= 0", check.min_margin), check.min_margin >= -1e-10);
    c.check(format!("min margin t>0 {later:.2e}"), later >= -1e-10);

    for (label, overrides) in [
        ("torus", "epsilon = 0\ninitial = twist_y\nscheme = implicit_midpoint"),
        (
            "box",
            "mode = llg\ndomain.kind = neumann_box\ndomain.lengths = 1, 1\ndomain.grid = 16, 16\nN = 12\n\
             epsilon = 0\ninitial = twist_x\nscheme = implicit_midpoint\nT = 0.5",
        ),
    ] {
        let sc = reference_with(overrides).unwrap();
        let tr = run(&sc.system, sc.beta0()).unwrap();
        let e0 = tr.ledger.rows[0].grad_energy;
        let drift = tr.ledger.rows.iter().map(|r| (r.grad_energy - e0).abs()).fold(0.0, f64::max)
            / sc.system.params().t_final;
        let moved = tr.samples[0].beta.iter().zip(&tr.last().beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.check(format!("schrodinger {label} drift/T {drift:.1e} < 1e-6"), drift < 1e-6);
        c.check(format!("{label} state moved {moved:.1e}"), moved > 1e-6);
    }
    c.finish();
}

#[test]
fn criterion_09_weak_residual_convergence() {
    let _g = lock();
    let mut c = Criterion::new(9, "weak residual convergence", 300);
    let sc = Scenario::reference().unwrap();
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs: None, seed: 9 };
    let eps = continuation_epsilon(&setup, &[0.1, 0.05, 0.025]).unwrap();
    assert_eq!(eps.trajectories[0].weak.entries.len(), 32);
    for w in eps.rows.windows(2) {
        let r = w[1].weak_max / w[0].weak_max;
        c.check(format!("eps {}->{} ratio {r:.3}", w[0].epsilon, w[1].epsilon), r <= 1.05);
    }
    let coarse = &eps.trajectories[1];
    let base = sc.system.params();
    let p = FlowParams { dt: 0.5 * base.dt, stride: 2 * base.stride, ..base.clone() };
    let fine = run(&sc.system.with_params(p).unwrap(), sc.beta0()).unwrap();
    let r = fine.weak.max / coarse.weak.max;
    c.check(format!("dt halving max ratio {r:.4}"), r <= 1.05);
    let worst = coarse
        .weak
        .entries
        .iter()
        .zip(&fine.weak.entries)
        .filter(|(a, _)| a.residual > 1e-12)
        .map(|(a, b)| b.residual / a.residual)
        .fold(0.0, f64::max);
    c.check(format!("dt halving per-test ratio {worst:.4}"), worst <= 1.05);
    c.finish();
}

#[test]
fn criterion_10_alpha_continuation() {
    let _g = lock();
    let mut c = Criterion::new(10, "alpha continuation", 300);
    // twist_x keeps the bracket terms at round-off; twist_y at a resolved N exercises them
    let sc = reference_with("initial = twist_y\nN = 45").unwrap();
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs: None, seed: 10 };
    let rep = continuation_alpha(&setup, &[0.1, 0.05, 0.01]).unwrap();
    let bound = rep.common_bound;
    for r in &rep.rows {
        c.check(format!("a={} damping {:.2e} <= {bound:.2e}", r.alpha, r.damping_integral), r.damping_integral <= bound);
    }
    let pairings: Vec<f64> = rep.rows.iter().map(|r| r.damping_pairing).collect();
    let decreasing = pairings.windows(2).all(|w| w[1] < w[0]) && rep.reference.damping_pairing <= pairings[2];
    c.check(format!("pairing active {:.1e} > 1e-3", pairings[0]), pairings[0] > 1e-3);
    let shown: Vec<String> = pairings.iter().map(|p| format!("{p:.1e}")).collect();
    c.check(format!("pairing {} -> {:.1e}", shown.join(" > "), rep.reference.damping_pairing), decreasing);
    c.finish();
}

#[test]
fn criterion_11_weighted_eigenbasis() {
    let _g = lock();
    let mut c = Criterion::new(11, "weighted eigenbasis", 10);
    let e = weighted_basis_errors(256, 8).unwrap();
    c.check(format!("eigenvalues {:.1e} < 1e-8", e.eigenvalue), e.eigenvalue < 1e-8);
    c.check(format!("eigenvectors {:.1e} < 1e-8", e.eigenvector), e.eigenvector < 1e-8);
    c.check(format!("lambda1 {:.1e} < 1e-10", e.lambda1), e.lambda1 < 1e-10);
    c.check(format!("first mode spread {:.1e}", e.constant_spread), e.constant_spread < 1e-8);
    c.finish();
}

#[test]
fn criterion_12_selftest() {
    let _g = lock();
    let mut c = Criterion::new(12, "selftest end to end", 600);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let t = Instant::now();
        let o = Command::new(env!("CARGO_BIN_EXE_lie-galerkin")).arg("selftest").output().unwrap();
        let el = t.elapsed().as_secs_f64();
        c.check(format!("run {} exit {:?} in {el:.1}s < 300s", k + 1, o.status.code()), o.status.success() && el < 300.0);
        outputs.push(o.stdout);
    }
    c.check("identical tables", outputs[0] == outputs[1]);
    let table = String::from_utf8_lossy(&outputs[0]);
    c.check(format!("{}", table.lines().last().unwrap_or("")), table.contains(" 0 failed"));
    c.finish();
}

//! Desk-scale invariant suite behind `lie-galerkin selftest`.
//!
//! Every check is seeded; the printed table depends only on the options.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{builtin, validate_algebra, AlgebraKernel, LieAlgebra};
use crate::config::{RunConfig, Scenario, REFERENCE_CONFIG};
use crate::demag::DemagOperator;
use crate::domain::{assemble_weighted_operator, DomainSpec, EigenMethod, Field, ModeBasis};
use crate::error::Result;
use crate::flow::{
    block_inner, continuation_alpha, continuation_epsilon, run, ContinuationSetup, FlowParams,
};
use crate::verify::{energy_ledger_check, mass_identity_check, sphere_report, BoundConstants};

#[derive(Clone, Debug, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    pub jobs: Option<usize>,
    /// Flips the sign of `[e1, e2]` in so(3) before the algebra checks.
    pub inject_bracket_sign_flip: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<36} {}  {:>11.4e}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.limit
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }

    fn below(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!("<= {limit:.1e}"), value <= limit);
    }

    fn above(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!(">= {limit:.1e}"), value >= limit);
    }

    fn push(&mut self, name: &str, value: f64, limit: String, passed: bool) {
        self.checks.push(CheckResult { name: name.into(), value, limit, passed: passed && value.is_finite() });
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect()
}

/// Largest `|<[X,Y],Z> + <Y,[X,Z]>| / (|X||Y||Z|)` over random triples.
pub fn ad_invariance_sample(alg: &dyn AlgebraKernel, samples: usize, seed: u64) -> f64 {
    let m = alg.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, y, z) = (uniform(&mut rng, m), uniform(&mut rng, m), uniform(&mut rng, m));
        let r = alg.inner(&alg.bracket(&x, &y), &z) + alg.inner(&y, &alg.bracket(&x, &z));
        worst = worst.max(r.abs() / (alg.norm(&x) * alg.norm(&y) * alg.norm(&z)));
    }
    worst
}

fn algebra_checks(rep: &mut SelftestReport, opts: &SelftestOptions) {
    for name in ["so3", "su2", "so4"] {
        let mut alg: LieAlgebra = builtin(name).expect("built-in algebra");
        if name == "so3" && opts.inject_bracket_sign_flip {
            let c = alg.structure_constant(0, 1, 2);
            alg = alg.with_constant_overridden(0, 1, 2, -c).with_constant_overridden(1, 0, 2, c);
        }
        let v = validate_algebra(&alg);
        rep.below(&format!("algebra.{name}.ad_invariance"), ad_invariance_sample(&alg, 1000, opts.seed), 1e-12);
        rep.below(&format!("algebra.{name}.jacobi"), v.jacobi_residual, 1e-12);
        rep.push(
            &format!("algebra.{name}.killing_definite"),
            v.min_neg_killing_eigenvalue,
            "> 0".into(),
            v.min_neg_killing_eigenvalue > 0.0,
        );
    }
}

/// Reference configuration with some keys replaced.
pub fn reference_with(overrides: &str) -> Result<Scenario> {
    RunConfig::parse(REFERENCE_CONFIG)?.with_overrides(overrides)?.resolve()
}

fn flow_checks(rep: &mut SelftestReport, opts: &SelftestOptions) -> Result<()> {
    // antisymmetry and the velocity solve on random states
    let sc = reference_with("alpha = 0.5")?;
    let sys = &sc.system;
    let alg = sys.algebra().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 1);
    let (mut anti, mut solve): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let beta: Vec<f64> = uniform(&mut rng, sys.dim()).iter().map(|v| 2.0 * v).collect();
        let j = sys.project(&sys.synthesize(&beta));
        for _ in 0..20 {
            let v = uniform(&mut rng, sys.dim());
            let w = uniform(&mut rng, sys.dim());
            let s = block_inner(alg.as_ref(), &sys.apply_a(&j, &v), &w)
                + block_inner(alg.as_ref(), &v, &sys.apply_a(&j, &w));
            anti = anti.max(s.abs());
        }
        let b = uniform(&mut rng, sys.dim());
        let x = sys.solve_velocity(&j, &b)?;
        let ax = sys.apply_a(&j, &x);
        for k in 0..b.len() {
            solve = solve.max((x[k] + ax[k] - b[k]).abs());
        }
    }
    rep.below("flow.a_antisymmetry", anti, 1e-10);
    rep.below("flow.solve_round_trip", solve, 1e-12);

    // L^2 law
    let sc = reference_with("epsilon = 0\ninitial = twist_y")?;
    let tr = run(&sc.system, sc.beta0())?;
    rep.below("flow.l2_conservation_eps0", mass_identity_check(&tr.ledger).max_l2_drift, 1e-8);
    let sc = reference_with("initial = twist_y")?;
    let tr = run(&sc.system, sc.beta0())?;
    rep.below("flow.l2_identity_eps0.05", mass_identity_check(&tr.ledger).max_rel_drift, 1e-6);

    // sphere bound: reference run, then a nonlinear profile at a resolved N
    let sc = Scenario::reference()?;
    let tr = run(&sc.system, sc.beta0())?;
    let sr = sphere_report(&tr.ledger, 1e-8);
    rep.below("sphere.reference.max_violation", sr.max_violation, 1e-6);
    rep.below("sphere.reference.max_q", sr.max_q, 1e-8);
    let sc = reference_with("initial = twist_y\nN = 45")?;
    let tr = run(&sc.system, sc.beta0())?;
    let sr = sphere_report(&tr.ledger, 1e-8);
    rep.below("sphere.twist_y_n45.max_violation", sr.max_violation, 1e-6);

    // macrospin and the hand-written cross product
    let mac = macrospin_config();
    let sc = mac.resolve()?;
    let tr = run(&sc.system, sc.beta0())?;
    let th = PI / 3.0;
    let rate = 2.0 * th.cos();
    let exact = [th.sin() * rate.cos(), -th.sin() * rate.sin(), th.cos()];
    let err = (0..3).map(|a| (tr.last().beta[a] - exact[a]).abs()).fold(0.0, f64::max);
    rep.below("flow.macrospin", err, 1e-6);
    let mut cross = mac.clone();
    cross.algebra = "cross".into();
    let tc = run(&cross.resolve()?.system, sc.beta0())?;
    let mut diff = max_sample_diff(&tr, &tc);
    let sc = reference_with("alpha = 0.1\ninitial = twist_y\ndomain.grid = 16, 16\nN = 9\nT = 0.25")?;
    let a = run(&sc.system, sc.beta0())?;
    let cs = reference_with("alpha = 0.1\ninitial = twist_y\ndomain.grid = 16, 16\nN = 9\nT = 0.25\nalgebra = cross")?;
    let b = run(&cs.system, cs.beta0())?;
    diff = diff.max(max_sample_diff(&a, &b));
    rep.below("flow.cross_product_equivalence", diff, 1e-12);
    Ok(())
}

pub fn macrospin_config() -> RunConfig {
    RunConfig::parse(
        "mode = llg\nalgebra = so3\ndomain.kind = neumann_box\ndomain.lengths = 1\ndomain.grid = 4\nN = 1\n\
         anisotropy = quadratic_diagonal\nanisotropy.lambdas = 0, 0, 1\ninitial = uniform:60\nT = 1\ndt = 0.001",
    )
    .expect("static configuration")
}

fn max_sample_diff(a: &crate::flow::Trajectory, b: &crate::flow::Trajectory) -> f64 {
    if a.samples.len() != b.samples.len() {
        return f64::INFINITY;
    }
    a.samples
        .iter()
        .zip(&b.samples)
        .flat_map(|(x, y)| x.beta.iter().zip(&y.beta).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Uniform field in `[-1, 1]^m` per cell.
pub fn random_field(d: &DomainSpec, m: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(d, m, |_, o| o.iter_mut().for_each(|v| *v = 2.0 * rng.gen::<f64>() - 1.0))
}

/// Worst relative deviation from `-u/3` in the inner half of a uniformly
/// magnetized ball of radius 0.45 in the unit cube.
pub fn ball_interior_deviation(n: usize) -> Result<f64> {
    let d = DomainSpec::neumann_box(&[1.0; 3], &[n; 3])?;
    let op = DemagOperator::new(&d, 3)?;
    let r = 0.45;
    let dist2 = |x: &[f64]| x.iter().map(|c| (c - 0.5) * (c - 0.5)).sum::<f64>();
    let u = Field::from_fn(&d, 3, |x, o| {
        if dist2(x) < r * r {
            o[2] = 1.0;
        }
    });
    let h = op.demag_field(&u)?;
    let mut worst: f64 = 0.0;
    for (p, x) in d.points().iter().enumerate() {
        if dist2(x) < 0.25 * r * r {
            let v = h.at(p);
            worst = worst.max(3.0 * (v[0] * v[0] + v[1] * v[1] + (v[2] + 1.0 / 3.0).powi(2)).sqrt());
        }
    }
    Ok(worst)
}

fn demag_checks(rep: &mut SelftestReport, opts: &SelftestOptions) -> Result<()> {
    let d = DomainSpec::neumann_box(&[1.0, 0.8, 1.2], &[16, 16, 16])?;
    let op = DemagOperator::new(&d, 3)?;
    let mut slack = f64::INFINITY;
    let mut lip = f64::INFINITY;
    for k in 0..10 {
        let u = random_field(&d, 3, opts.seed + 100 + k);
        let (lhs, rhs) = op.lemma_norms(&u)?;
        slack = slack.min(rhs - lhs);
        let v = random_field(&d, 3, opts.seed + 200 + k);
        let (lhs, rhs) = op.lemma_norms(&u.sub(&v)?)?;
        lip = lip.min(rhs - lhs);
    }
    rep.above("demag.l2_contraction_slack", slack, -1e-10);
    rep.above("demag.lipschitz_slack", lip, -1e-10);
    rep.below("demag.ball_interior_32", ball_interior_deviation(32)?, 0.10);
    Ok(())
}

/// The damped llg run with stray field and anisotropy on a 3D box.
pub fn energy_config() -> RunConfig {
    RunConfig::parse(
        "mode = llg\nalgebra = so3\ndomain.kind = neumann_box\ndomain.lengths = 1, 1, 1\ndomain.grid = 12, 12, 12\nN = 8\n\
         alpha = 0.1\nepsilon = 0.05\ndemag = true\nanisotropy = quadratic_diagonal\nanisotropy.lambdas = 0, 1, 1\n\
         initial = twist_x\nT = 0.5\ndt = 0.001",
    )
    .expect("static configuration")
}

fn energy_checks(rep: &mut SelftestReport, opts: &SelftestOptions) -> Result<()> {
    let sc = energy_config().resolve()?;
    let tr = run(&sc.system, sc.beta0())?;
    let c = BoundConstants::sample(&sc.system, 100_000, 10_000, opts.seed)?;
    let check = energy_ledger_check(&sc.system, &tr.ledger, &c);
    let scale = check.points.iter().map(|p| p.lhs.abs()).fold(1.0, f64::max);
    rep.above("energy.ledger_margin", check.min_margin / scale, -1e-10);

    let sc = reference_with("epsilon = 0\ninitial = twist_y\nscheme = implicit_midpoint")?;
    let tr = run(&sc.system, sc.beta0())?;
    let e0 = tr.ledger.rows[0].grad_energy;
    let drift = tr.ledger.rows.iter().map(|r| (r.grad_energy - e0).abs()).fold(0.0, f64::max);
    rep.below("energy.schrodinger_drift_per_time", drift / sc.config.t_final, 1e-6);
    Ok(())
}

fn weak_checks(rep: &mut SelftestReport, opts: &SelftestOptions) -> Result<()> {
    let sc = Scenario::reference()?;
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), jobs: opts.jobs, seed: opts.seed };
    let eps = continuation_epsilon(&setup, &[0.1, 0.05, 0.025])?;
    let worst = eps.rows.windows(2).map(|w| w[1].weak_max / w[0].weak_max).fold(0.0, f64::max);
    rep.below("weak.epsilon_ratio", worst, 1.05);

    let coarse = &eps.trajectories[1];
    let p = FlowParams { dt: 0.5 * sc.system.params().dt, stride: 2 * sc.system.params().stride, ..sc.system.params().clone() };
    let fine = run(&sc.system.with_params(p)?, sc.beta0())?;
    let worst = coarse
        .weak
        .entries
        .iter()
        .zip(&fine.weak.entries)
        .map(|(c, f)| if c.residual > 1e-12 { f.residual / c.residual } else { 0.0 })
        .fold(0.0, f64::max);
    rep.below("weak.dt_halving_ratio", worst, 1.05);

    let sc = reference_with("initial = twist_y")?;
    let setup = ContinuationSetup { system: sc.system.clone(), beta0: sc.beta0().to_vec(), ..setup };
    let al = continuation_alpha(&setup, &[0.1, 0.05, 0.01])?;
    let ratio = al.rows.iter().map(|r| r.damping_integral / al.common_bound).fold(0.0, f64::max);
    rep.below("alpha.damping_over_bound", ratio, 1.0);
    rep.push(
        "alpha.pairing_decreasing",
        al.rows.first().map_or(0.0, |r| r.damping_pairing),
        "monotone to 0".into(),
        al.pairing_decreasing() && al.rows.first().is_some_and(|r| r.damping_pairing > 1e-3),
    );
    Ok(())
}

/// Iterative weighted basis against a dense diagonalization of the same
/// operator, for `f = 2 + sin x` on a 1D torus of length `2 pi`.
#[derive(Clone, Debug)]
pub struct WeightedBasisErrors {
    pub eigenvalue: f64,
    /// Distance of each unit mode from the dense eigenspace of its cluster.
    pub eigenvector: f64,
    pub residual: f64,
    pub lambda1: f64,
    /// Spread of the first mode over the grid.
    pub constant_spread: f64,
}

pub fn weighted_basis_errors(points: usize, count: usize) -> Result<WeightedBasisErrors> {
    let d = DomainSpec::torus(&[2.0 * PI], &[points])?;
    let f: Vec<f64> = d.points().iter().map(|x| 2.0 + x[0].sin()).collect();
    let basis = ModeBasis::weighted(&d, &f, count, 1e-13, EigenMethod::Iterative)?;
    let op = assemble_weighted_operator(&d, &f)?;
    let dense = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&a, &b| dense.eigenvalues[a].total_cmp(&dense.eigenvalues[b]));
    let lam = basis.eigenvalues();
    let scale = d.cell_volume().sqrt();
    let mut out = WeightedBasisErrors {
        eigenvalue: 0.0,
        eigenvector: 0.0,
        residual: basis.residuals().iter().copied().fold(0.0, f64::max),
        lambda1: lam[0].abs(),
        constant_spread: 0.0,
    };
    for i in 0..count {
        out.eigenvalue = out.eigenvalue.max((lam[i] - dense.eigenvalues[order[i]]).abs());
        let mut r: Vec<f64> = basis.mode(i).iter().map(|x| x * scale).collect();
        for &j in &order {
            if (dense.eigenvalues[j] - lam[i]).abs() < 1e-3 {
                let w = dense.eigenvectors.column(j);
                let c: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(w.iter()).for_each(|(x, y)| *x -= c * y);
            }
        }
        out.eigenvector = out.eigenvector.max(r.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    let w0 = basis.mode(0);
    out.constant_spread =
        w0.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) - w0.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    Ok(out)
}

fn basis_checks(rep: &mut SelftestReport) -> Result<()> {
    let e = weighted_basis_errors(256, 8)?;
    rep.below("basis.weighted_eigenvalues", e.eigenvalue, 1e-8);
    rep.below("basis.weighted_eigenvectors", e.eigenvector, 1e-8);
    rep.below("basis.weighted_lambda1", e.lambda1, 1e-10);
    rep.below("basis.weighted_constant_mode", e.constant_spread, 1e-8);
    Ok(())
}

pub fn selftest(opts: &SelftestOptions) -> Result<SelftestReport> {
    let mut rep = SelftestReport::default();
    algebra_checks(&mut rep, opts);
    flow_checks(&mut rep, opts)?;
    demag_checks(&mut rep, opts)?;
    energy_checks(&mut rep, opts)?;
    weak_checks(&mut rep, opts)?;
    basis_checks(&mut rep)?;
    Ok(rep)
}

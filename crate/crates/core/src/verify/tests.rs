use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::algebra::{resolve_algebra, AlgebraKernel, AnisotropyKind, AnisotropySpec, Cutoff};
use crate::domain::{DomainSpec, Field, ModeBasis};
use crate::flow::{run, FlowMode, FlowParams, FlowSystem, Physics, Trajectory};

fn so3() -> Arc<dyn AlgebraKernel> {
    resolve_algebra("so3").unwrap()
}

fn torus_basis(n: usize, count: usize) -> Arc<ModeBasis> {
    let d = DomainSpec::torus(&[2.0 * PI, 2.0 * PI], &[n, n]).unwrap();
    Arc::new(ModeBasis::fourier(&d, count).unwrap())
}

fn twist_y(d: &DomainSpec, sign: f64) -> Field {
    Field::from_fn(d, 3, |x, o| {
        o[0] = sign * x[1].cos() * x[0].cos();
        o[1] = sign * x[1].cos() * x[0].sin();
        o[2] = sign * x[1].sin();
    })
}

fn gill(alpha: f64, epsilon: f64) -> FlowParams {
    FlowParams { mode: FlowMode::GillTorus, alpha, epsilon, ..Default::default() }
}

fn simulate(params: FlowParams, n: usize, count: usize, sign: f64) -> (FlowSystem, Trajectory) {
    let basis = torus_basis(n, count);
    let beta = basis.analyze(&twist_y(basis.domain(), sign)).unwrap();
    let sys = FlowSystem::new(so3(), basis, params, Physics::default()).unwrap();
    let tr = run(&sys, &beta).unwrap();
    (sys, tr)
}

#[test]
fn sphere_functional_closed_forms() {
    let alg = so3();
    let d = DomainSpec::torus(&[2.0, 3.0], &[8, 6]).unwrap();
    let unit = twist_y(&d, 1.0);
    assert_eq!(sphere_functional(alg.as_ref(), unit.values(), d.cell_volume()), 0.0);
    let big = unit.scaled(1.1);
    let q = sphere_functional(alg.as_ref(), big.values(), d.cell_volume());
    let exact = d.volume() * 1.21 * (1.0 - 1.0 / 1.1);
    assert!((q - exact).abs() < 1e-12 * exact);
    assert!((sphere_violation(alg.as_ref(), big.values()) - 0.1).abs() < 1e-12);
}

#[test]
fn battery_layout() {
    let b = standard_battery(16);
    assert_eq!(b.len(), 32);
    assert_eq!(b[5].label(), "w2*t");
    assert_eq!(standard_battery(3).len(), 12);
    for p in Profile::ALL {
        let h = 1e-6;
        let fd = (p.value(0.3 + h, 0.7) - p.value(0.3 - h, 0.7)) / (2.0 * h);
        assert!((fd - p.derivative(0.3, 0.7)).abs() < 1e-8);
    }
}

#[test]
fn ledger_is_consistent() {
    let (_, tr) = simulate(FlowParams { t_final: 0.1, ..gill(0.1, 0.05) }, 16, 13, 1.0);
    let csv = tr.ledger.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), LEDGER_COLUMNS.join(","));
    assert_eq!(lines.count(), tr.ledger.rows.len());
    assert_eq!(tr.ledger.rows.len(), 11);
    for w in tr.ledger.rows.windows(2) {
        assert!(w[1].grad_integral >= w[0].grad_integral);
        assert!(w[1].lap_integral >= w[0].lap_integral);
        assert!(w[1].ut_integral >= w[0].ut_integral);
        assert!(w[1].damping_energy_integral >= w[0].damping_energy_integral);
    }
    assert!(tr.ledger.rows.iter().all(|r| r.q >= 0.0));
    let mc = mass_identity_check(&tr.ledger);
    assert!(mc.max_rel_drift < 1e-10);
}

#[test]
fn gill_mirrors_llg_on_the_torus() {
    // v = -u maps gill solutions onto llg solutions when f = 1 and F = Phi = 0
    let p = FlowParams { t_final: 0.2, ..gill(0.2, 0.05) };
    let (_, g) = simulate(p.clone(), 16, 13, 1.0);
    let (_, l) = simulate(FlowParams { mode: FlowMode::LlgBoundary, ..p }, 16, 13, -1.0);
    for (a, b) in g.samples.iter().zip(&l.samples) {
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x + y).abs() < 1e-12);
        }
    }
    assert_eq!(g.weak.entries.len(), l.weak.entries.len());
    for (a, b) in g.weak.entries.iter().zip(&l.weak.entries) {
        assert!((a.residual - b.residual).abs() < 1e-12);
        assert!((a.lhs - b.lhs).abs() < 1e-12);
    }
}

#[test]
fn time_term_is_homogeneous_in_alpha0() {
    let (sys, tr) = simulate(FlowParams { t_final: 0.2, ..gill(0.0, 0.0) }, 16, 13, 1.0);
    let battery = standard_battery(8);
    let ev = WeakEvaluator::new(&sys, 8);
    let mut one = WeakAccumulator::new(&sys, battery.clone());
    let mut two = WeakAccumulator::new(&sys, battery).with_alpha0(2.0);
    for s in &tr.samples {
        one.push(ev.pairings(s.t, &s.beta, &s.beta_dot).unwrap()).unwrap();
        two.push(ev.pairings(s.t, &s.beta, &s.beta_dot).unwrap()).unwrap();
    }
    let (r1, r2) = (one.report(WeakForm::Derivative), two.report(WeakForm::Derivative));
    for (a, b) in r1.entries.iter().zip(&r2.entries) {
        assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-12 * (1.0 + a.lhs));
        assert_eq!(a.rhs, b.rhs);
    }
}

#[test]
fn zero_duration_run_has_no_residual() {
    let (_, tr) = simulate(FlowParams { t_final: 1e-10, dt: 1e-10, ..gill(0.1, 0.05) }, 16, 13, 1.0);
    assert_eq!(tr.steps, 1);
    assert!(tr.weak.max < 1e-10, "{}", tr.weak.max);
}

fn form_gap(dt: f64) -> f64 {
    let p = FlowParams { t_final: 0.5, dt, stride: 1, ..gill(0.1, 0.05) };
    let (sys, tr) = simulate(p, 16, 13, 1.0);
    let battery = standard_battery(8);
    let d = weak_residual(&sys, &tr.samples, &battery, WeakForm::Derivative).unwrap();
    let i = weak_residual(&sys, &tr.samples, &battery, WeakForm::IntegratedByParts).unwrap();
    assert_eq!(d, tr.weak);
    d.entries.iter().zip(&i.entries).map(|(a, b)| (a.residual - b.residual).abs()).fold(0.0, f64::max)
}

#[test]
fn derivative_and_integrated_forms_agree() {
    // the gap is trapezoid error and shrinks like dt^2
    let (g1, g2) = (form_gap(2e-3), form_gap(1e-3));
    assert!(g1 < 5e-4 && g2 < 1.5e-4, "{g1} {g2}");
    assert!(g1 / g2 > 3.5, "{g1} {g2}");
}

#[test]
fn constant_test_function_sees_conserved_mass() {
    let p = FlowParams { t_final: 0.5, ..gill(0.0, 0.0) };
    let (_, tr) = simulate(p, 16, 13, 1.0);
    let e = &tr.weak.entries[0];
    assert_eq!(e.test.label(), "w1*1");
    assert!(e.residual < 1e-8);
    assert!(e.lhs < 1e-8);
}

#[test]
fn residual_refuses_unresolved_modes() {
    let (sys, tr) = simulate(FlowParams { t_final: 0.01, ..gill(0.0, 0.0) }, 8, 5, 1.0);
    let battery = vec![TestFunction { mode: 6, profile: Profile::Linear }];
    assert!(weak_residual(&sys, &tr.samples, &battery, WeakForm::Derivative).is_err());
}

#[test]
fn orthogonality_and_mass_rate() {
    let (sys, tr) = simulate(FlowParams { t_final: 0.1, ..gill(0.1, 0.05) }, 16, 16, 1.0);
    for s in &tr.samples {
        let r = orthogonality_probe(&sys, s).unwrap();
        assert!(r.max_pointwise < 1e-12);
        assert!(r.relative_mismatch() < 1e-8);
    }
    let (sys, tr) = simulate(FlowParams { t_final: 0.1, ..gill(0.0, 0.0) }, 16, 16, 1.0);
    let r = orthogonality_probe(&sys, tr.last()).unwrap();
    assert!(r.mass_rate.abs() < 1e-10);
}

#[test]
fn energy_check_holds_on_a_damped_run() {
    let alg = so3();
    let basis = torus_basis(16, 13);
    let beta = basis.analyze(&twist_y(basis.domain(), 1.0)).unwrap();
    let an = AnisotropySpec::new(alg.clone(), AnisotropyKind::QuadraticDiagonal(vec![0.0, 1.0, 1.0]), Cutoff::default())
        .unwrap();
    let physics = Physics { anisotropy: Some(an), ..Default::default() };
    let sys = FlowSystem::new(alg, basis, FlowParams { t_final: 0.2, ..gill(0.1, 0.05) }, physics).unwrap();
    let tr = run(&sys, &beta).unwrap();
    let c = BoundConstants::sample(&sys, 20_000, 2_000, 1).unwrap();
    assert!(c.m1 > 1.9 && c.c2 > 0.0);
    let check = energy_ledger_check(&sys, &tr.ledger, &c);
    assert!(check.points[0].margin.abs() < 1e-10);
    assert!(check.passed(1e-10 * check.points[0].lhs));
}

#[test]
fn sphere_report_finds_first_exceedance() {
    let mut ledger = DiagnosticsLedger::default();
    let (_, tr) = simulate(FlowParams { t_final: 0.02, ..gill(0.0, 0.05) }, 8, 5, 1.0);
    ledger.rows = tr.ledger.rows.clone();
    ledger.rows[1].q = 1e-3;
    let r = sphere_report(&ledger, 1e-8);
    assert_eq!(r.first_exceedance, Some(ledger.rows[1].t));
    assert_eq!(r.max_q, 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prop_q_is_nonnegative_and_vanishes_inside(scale in 0.0f64..2.0) {
        let alg = so3();
        let d = DomainSpec::torus(&[1.0, 1.0], &[6, 6]).unwrap();
        let u = twist_y(&d, scale);
        let q = sphere_functional(alg.as_ref(), u.values(), d.cell_volume());
        prop_assert!(q >= 0.0);
        if scale <= 1.0 {
            prop_assert_eq!(q, 0.0);
        }
    }
}

//! Per-sample diagnostics of a run.

use std::fmt::Write as _;

use crate::algebra::AlgebraKernel;
use crate::error::Result;
use crate::flow::{weighted_norm_sq, Accumulators, FlowSystem};

use super::weak::{standard_battery, WeakAccumulator, WeakEvaluator, WeakForm, WeakResidualReport};

pub const LEDGER_COLUMNS: [&str; 13] = [
    "t",
    "l2_norm_sq",
    "grad_energy",
    "sphere_violation",
    "damping_energy_integral",
    "demag_energy",
    "weak_residual_latest",
    "q",
    "lap_integral",
    "grad_integral",
    "ut_integral",
    "anisotropy_energy",
    "mass_identity",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    /// `sum |beta_i|^2 = int |u^N|^2`.
    pub l2_norm_sq: f64,
    /// `sum lambda_i |beta_i|^2 = int f |grad u^N|^2`.
    pub grad_energy: f64,
    /// `max (|u^N| - 1, 0)` over the grid.
    pub sphere_violation: f64,
    /// `alpha int_0^t int |u_t|^2`.
    pub damping_energy_integral: f64,
    pub demag_energy: f64,
    /// Battery maximum of the weak residual over `[0, t]`.
    pub weak_residual_latest: f64,
    /// `int_{|u|>1} |u|^2 (1 - 1/|u|)`.
    pub q: f64,
    /// `int_0^t int |Lap_f u|^2`.
    pub lap_integral: f64,
    /// `int_0^t int f |grad u|^2`.
    pub grad_integral: f64,
    /// `int_0^t int |u_t|^2`.
    pub ut_integral: f64,
    pub anisotropy_energy: f64,
    /// `alpha0 int |u|^2 + 2 eps int_0^t int f |grad u|^2`.
    pub mass_identity: f64,
}

impl LedgerRow {
    fn values(&self) -> [f64; 13] {
        [
            self.t,
            self.l2_norm_sq,
            self.grad_energy,
            self.sphere_violation,
            self.damping_energy_integral,
            self.demag_energy,
            self.weak_residual_latest,
            self.q,
            self.lap_integral,
            self.grad_integral,
            self.ut_integral,
            self.anisotropy_energy,
            self.mass_identity,
        ]
    }
}

/// Time series of [`LedgerRow`]s.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsLedger {
    pub rows: Vec<LedgerRow>,
    /// `|u0^N - u0|_{L^2}` when known.
    pub reconstruction_error: Option<f64>,
    /// Largest sphere violation over all steps, not just samples.
    pub max_step_sphere_violation: f64,
}

impl DiagnosticsLedger {
    pub fn to_csv(&self) -> String {
        let mut s = LEDGER_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            let v = r.values();
            let line: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn last(&self) -> Option<&LedgerRow> {
        self.rows.last()
    }

    pub fn max_of(&self, f: impl Fn(&LedgerRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max(|u| - 1, 0)` over the grid.
pub fn sphere_violation(alg: &dyn AlgebraKernel, u: &[f64]) -> f64 {
    u.chunks(alg.dim()).map(|c| alg.norm(c) - 1.0).fold(0.0, f64::max)
}

/// `q = int_{|u|>1} |u|^2 (1 - 1/|u|)` by grid quadrature.
pub fn sphere_functional(alg: &dyn AlgebraKernel, u: &[f64], cell_volume: f64) -> f64 {
    u.chunks(alg.dim())
        .map(|c| {
            let r = alg.norm(c);
            if r > 1.0 {
                r * r * (1.0 - 1.0 / r)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        * cell_volume
}

/// Builds ledger rows from samples and keeps the weak battery running.
#[derive(Clone, Debug)]
pub struct LedgerRecorder {
    sys: FlowSystem,
    evaluator: WeakEvaluator,
    weak: WeakAccumulator,
    form: WeakForm,
}

impl LedgerRecorder {
    pub fn new(sys: &FlowSystem) -> Self {
        let battery = standard_battery(sys.basis().len());
        let count = battery.iter().map(|t| t.mode + 1).max().unwrap_or(0);
        LedgerRecorder {
            sys: sys.clone(),
            evaluator: WeakEvaluator::new(sys, count),
            weak: WeakAccumulator::new(sys, battery),
            form: WeakForm::default_for(sys.params().alpha),
        }
    }

    pub fn form(&self) -> WeakForm {
        self.form
    }

    pub fn weak_report(&self) -> WeakResidualReport {
        self.weak.report(self.form)
    }

    pub fn record(&mut self, t: f64, beta: &[f64], beta_dot: &[f64], acc: &Accumulators) -> Result<LedgerRow> {
        let sys = &self.sys;
        let alg = sys.algebra().as_ref();
        let m = sys.m();
        let lam = sys.basis().eigenvalues();
        let p = sys.params();
        let w = sys.domain().cell_volume();
        let u = sys.synthesize(beta);
        let l2 = weighted_norm_sq(alg, beta, |_| 1.0);
        let grad = weighted_norm_sq(alg, beta, |i| lam[i]);
        let demag_energy = match sys.demag() {
            Some(op) => {
                let mut h = vec![0.0; u.len()];
                op.demag_field_values(&u, &mut h);
                op.energy_of(&u, &h)
            }
            None => 0.0,
        };
        let anisotropy_energy = match &sys.physics().anisotropy {
            Some(an) => {
                let mut s = 0.0;
                for c in u.chunks(m) {
                    s += an.value(c)?;
                }
                s * w
            }
            None => 0.0,
        };
        self.weak.push(self.evaluator.pairings(t, beta, beta_dot)?)?;
        let weak = self.weak.report(self.form);
        Ok(LedgerRow {
            t,
            l2_norm_sq: l2,
            grad_energy: grad,
            sphere_violation: sphere_violation(alg, &u),
            damping_energy_integral: p.alpha * acc.ut,
            demag_energy,
            weak_residual_latest: weak.max,
            q: sphere_functional(alg, &u, w),
            lap_integral: acc.lap,
            grad_integral: acc.grad,
            ut_integral: acc.ut,
            anisotropy_energy,
            mass_identity: p.alpha0 * l2 + 2.0 * p.epsilon * acc.grad,
        })
    }
}

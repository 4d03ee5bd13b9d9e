use crate::error::{Error, Result};
use crate::verify::{sphere_violation, DiagnosticsLedger, LedgerRecorder, LedgerRow, WeakResidualReport};

use super::{weighted_norm_sq, FlowSystem, Scheme};

const MIDPOINT_TOL: f64 = 1e-12;
const MIDPOINT_ITERS: usize = 50;
const MAX_HALVINGS: usize = 10;

/// A recorded state with its time derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub beta: Vec<f64>,
    pub beta_dot: Vec<f64>,
}

/// Running time integrals, advanced inside the time stepper.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulators {
    /// `int_0^t sum lambda_i |beta_i|^2`.
    pub grad: f64,
    /// `int_0^t sum |beta_i'|^2`.
    pub ut: f64,
    /// `int_0^t sum lambda_i^2 |beta_i|^2`.
    pub lap: f64,
}

impl Accumulators {
    fn add_scaled(&mut self, w: f64, o: &Accumulators) {
        self.grad += w * o.grad;
        self.ut += w * o.ut;
        self.lap += w * o.lap;
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub ledger: DiagnosticsLedger,
    /// Battery residuals over the whole run.
    pub weak: WeakResidualReport,
    /// Set when a runtime identity was breached; the run stopped there.
    pub failure: Option<String>,
    pub steps: usize,
    pub halvings: usize,
    pub accumulators: Accumulators,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Turns a recorded failure into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            None => Ok(self),
            Some(msg) => Err(Error::Assertion {
                check: "l2_identity".into(),
                t: self.last().t,
                message: msg.clone(),
            }),
        }
    }
}

fn integrands(sys: &FlowSystem, beta: &[f64], v: &[f64]) -> Accumulators {
    let alg = sys.algebra().as_ref();
    let lam = sys.basis().eigenvalues();
    Accumulators {
        grad: weighted_norm_sq(alg, beta, |i| lam[i]),
        ut: weighted_norm_sq(alg, v, |_| 1.0),
        lap: weighted_norm_sq(alg, beta, |i| lam[i] * lam[i]),
    }
}

fn axpy(x: &[f64], h: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(sys: &FlowSystem, t: f64, beta: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Accumulators)> {
    let b2 = axpy(beta, 0.5 * h, k1);
    let k2 = sys.velocity(t + 0.5 * h, &b2)?;
    let b3 = axpy(beta, 0.5 * h, &k2);
    let k3 = sys.velocity(t + 0.5 * h, &b3)?;
    let b4 = axpy(beta, h, &k3);
    let k4 = sys.velocity(t + h, &b4)?;
    let next: Vec<f64> = (0..beta.len())
        .map(|k| beta[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
        .collect();
    let mut acc = Accumulators::default();
    acc.add_scaled(h / 6.0, &integrands(sys, beta, k1));
    acc.add_scaled(h / 3.0, &integrands(sys, &b2, &k2));
    acc.add_scaled(h / 3.0, &integrands(sys, &b3, &k3));
    acc.add_scaled(h / 6.0, &integrands(sys, &b4, &k4));
    Ok((next, acc))
}

fn midpoint_step(
    sys: &FlowSystem,
    t: f64,
    beta: &[f64],
    v0: &[f64],
    h: f64,
    depth: usize,
    halvings: &mut usize,
) -> Result<(Vec<f64>, Accumulators)> {
    let mut x = axpy(beta, h, v0);
    let mut change = f64::INFINITY;
    for _ in 0..MIDPOINT_ITERS {
        let mid: Vec<f64> = beta.iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
        let vm = sys.velocity(t + 0.5 * h, &mid)?;
        let next = axpy(beta, h, &vm);
        change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if change <= MIDPOINT_TOL {
            let mut acc = Accumulators::default();
            acc.add_scaled(h, &integrands(sys, &mid, &vm));
            return Ok((x, acc));
        }
        if !change.is_finite() {
            break;
        }
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::Step {
            t,
            message: format!("implicit midpoint did not converge after {MAX_HALVINGS} halvings (last change {change:.3e})"),
        });
    }
    *halvings += 1;
    let (x1, a1) = midpoint_step(sys, t, beta, v0, 0.5 * h, depth + 1, halvings)?;
    let v1 = sys.velocity(t + 0.5 * h, &x1)?;
    let (x2, a2) = midpoint_step(sys, t + 0.5 * h, &x1, &v1, 0.5 * h, depth + 1, halvings)?;
    let mut acc = a1;
    acc.add_scaled(1.0, &a2);
    Ok((x2, acc))
}

pub fn run(sys: &FlowSystem, beta0: &[f64]) -> Result<Trajectory> {
    run_with(sys, beta0, |_, _| Ok(()))
}

/// Integrates from `beta0` over `[0, T]`, calling `observer` at every sample.
pub fn run_with<F>(sys: &FlowSystem, beta0: &[f64], mut observer: F) -> Result<Trajectory>
where
    F: FnMut(&Sample, &LedgerRow) -> Result<()>,
{
    if beta0.len() != sys.dim() {
        return Err(Error::contract(format!(
            "initial coefficients have {} entries, expected {}",
            beta0.len(),
            sys.dim()
        )));
    }
    let params = sys.params().clone();
    let alg = sys.algebra().clone();
    let (n, h) = params.steps();
    let mut recorder = LedgerRecorder::new(sys);
    let mut ledger = DiagnosticsLedger::default();
    let mut samples = Vec::new();
    let mut halvings = 0;
    let mut acc = Accumulators::default();
    let mut beta = beta0.to_vec();
    let mut t = 0.0;
    let (mut v, ev) = sys.velocity_eval(t, &beta)?;
    ledger.max_step_sphere_violation = sphere_violation(alg.as_ref(), &ev.u);
    let mass = |b: &[f64], a: &Accumulators| {
        params.alpha0 * weighted_norm_sq(alg.as_ref(), b, |_| 1.0) + 2.0 * params.epsilon * a.grad
    };
    let mass0 = mass(&beta, &acc);

    let mut record = |t: f64, beta: &[f64], v: &[f64], acc: &Accumulators, ledger: &mut DiagnosticsLedger| -> Result<()> {
        let row = recorder.record(t, beta, v, acc)?;
        let sample = Sample { t, beta: beta.to_vec(), beta_dot: v.to_vec() };
        observer(&sample, &row)?;
        ledger.rows.push(row);
        samples.push(sample);
        Ok(())
    };
    record(t, &beta, &v, &acc, &mut ledger)?;

    let mut failure = None;
    let mut steps = 0;
    for s in 0..n {
        let (next, inc) = match params.scheme {
            Scheme::Rk4 => rk4_step(sys, t, &beta, &v, h)?,
            Scheme::ImplicitMidpoint => midpoint_step(sys, t, &beta, &v, h, 0, &mut halvings)?,
        };
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Step { t, message: "non-finite coefficients".into() });
        }
        beta = next;
        acc.add_scaled(1.0, &inc);
        t = (s + 1) as f64 * h;
        steps += 1;
        let (nv, ev) = sys.velocity_eval(t, &beta)?;
        v = nv;
        ledger.max_step_sphere_violation =
            ledger.max_step_sphere_violation.max(sphere_violation(alg.as_ref(), &ev.u));

        let drift = (mass(&beta, &acc) - mass0).abs();
        let breached = drift > params.mass_tolerance * mass0.max(f64::MIN_POSITIVE);
        if breached {
            failure = Some(format!(
                "alpha0 |u|^2 + 2 eps int |grad u|^2 drifted by {drift:.3e} (relative {:.3e})",
                drift / mass0.max(f64::MIN_POSITIVE)
            ));
        }
        if breached || (s + 1) % params.stride == 0 || s + 1 == n {
            record(t, &beta, &v, &acc, &mut ledger)?;
        }
        if breached {
            break;
        }
    }
    drop(record);
    Ok(Trajectory {
        samples,
        weak: recorder.weak_report(),
        ledger,
        failure,
        steps,
        halvings,
        accumulators: acc,
    })
}

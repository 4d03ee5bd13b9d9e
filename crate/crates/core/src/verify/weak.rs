//! Weak-form residuals against space-time test functions
//! `phi = omega^i(x) eta(t) e_a`.
//!
//! For each test mode the residual is an algebra-valued vector (one entry per
//! direction `e_a`); entries report the norm of its metric-lowered form.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::flow::{FlowMode, FlowSystem, Sample};
use crate::error::{Error, Result};

/// Number of leading modes in the standard battery.
pub const BATTERY_MODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Profile {
    Constant,
    Linear,
    Sine,
    Cosine,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::Constant, Profile::Linear, Profile::Sine, Profile::Cosine];

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Constant => "1",
            Profile::Linear => "t",
            Profile::Sine => "sin",
            Profile::Cosine => "cos",
        }
    }

    fn omega(t_final: f64) -> f64 {
        if t_final > 0.0 {
            PI / t_final
        } else {
            0.0
        }
    }

    pub fn value(&self, t: f64, t_final: f64) -> f64 {
        let w = Self::omega(t_final);
        match self {
            Profile::Constant => 1.0,
            Profile::Linear => t,
            Profile::Sine => (w * t).sin(),
            Profile::Cosine => (w * t).cos(),
        }
    }

    pub fn derivative(&self, t: f64, t_final: f64) -> f64 {
        let w = Self::omega(t_final);
        match self {
            Profile::Constant => 0.0,
            Profile::Linear => 1.0,
            Profile::Sine => w * (w * t).cos(),
            Profile::Cosine => -w * (w * t).sin(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TestFunction {
    pub mode: usize,
    pub profile: Profile,
}

impl TestFunction {
    pub fn label(&self) -> String {
        format!("w{}*{}", self.mode + 1, self.profile.name())
    }
}

/// Leading `min(modes, 8)` modes times the four temporal profiles.
pub fn standard_battery(modes: usize) -> Vec<TestFunction> {
    let k = modes.min(BATTERY_MODES);
    (0..k)
        .flat_map(|mode| Profile::ALL.iter().map(move |&profile| TestFunction { mode, profile }))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakForm {
    /// Pairs `u_t` with `phi` directly.
    Derivative,
    /// Moves the time derivative onto `phi` and keeps the boundary terms.
    IntegratedByParts,
}

impl WeakForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeakForm::Derivative => "derivative",
            WeakForm::IntegratedByParts => "integrated",
        }
    }

    /// The form used by default: derivative when damped, integrated otherwise.
    pub fn default_for(alpha: f64) -> Self {
        if alpha > 0.0 {
            WeakForm::Derivative
        } else {
            WeakForm::IntegratedByParts
        }
    }
}

/// Spatial pairings of one sample against the leading `count` modes, each
/// an `m`-vector per mode.
#[derive(Clone, Debug)]
pub struct Pairings {
    pub t: f64,
    pub count: usize,
    pub beta: Vec<f64>,
    pub beta_dot: Vec<f64>,
    /// `int [u, u_t] omega^i`.
    pub damping: Vec<f64>,
    /// `sum_p int [u, f d_p u] d_p omega^i`.
    pub exchange: Vec<f64>,
    /// Stray field, anisotropy and forcing: the terms without derivatives.
    pub source: Vec<f64>,
}

/// Computes [`Pairings`] for a flow system.
#[derive(Clone, Debug)]
pub struct WeakEvaluator {
    sys: FlowSystem,
    count: usize,
    /// `mode_grads[i][axis]` on the grid.
    mode_grads: Vec<Vec<Vec<f64>>>,
}

impl WeakEvaluator {
    pub fn new(sys: &FlowSystem, count: usize) -> Self {
        let count = count.min(sys.basis().len());
        let ops = sys.basis().diff_ops();
        let mode_grads = (0..count).map(|i| ops.gradient(sys.basis().mode(i), 1)).collect();
        WeakEvaluator { sys: sys.clone(), count, mode_grads }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn system(&self) -> &FlowSystem {
        &self.sys
    }

    pub fn pairings(&self, t: f64, beta: &[f64], beta_dot: &[f64]) -> Result<Pairings> {
        let sys = &self.sys;
        let alg = sys.algebra().as_ref();
        let m = sys.m();
        let k = self.count;
        let basis = sys.basis();
        let domain = sys.domain();
        let g = domain.num_points();
        let w = domain.cell_volume();
        let u = sys.synthesize(beta);
        let ut = sys.synthesize(beta_dot);

        let mut tmp = vec![0.0; g * m];
        for ((o, a), b) in tmp.chunks_mut(m).zip(u.chunks(m)).zip(ut.chunks(m)) {
            alg.bracket_into(a, b, o);
        }
        let damping = sys.analyze_leading(&tmp, k);

        let grads = basis.diff_ops().gradient(&u, m);
        let mut exchange = vec![0.0; k * m];
        let mut c = vec![0.0; m];
        let mut fd = vec![0.0; m];
        for p in 0..g {
            let up = &u[p * m..(p + 1) * m];
            let f = basis.weight_at(p);
            for (axis, gr) in grads.iter().enumerate() {
                for a in 0..m {
                    fd[a] = f * gr[p * m + a];
                }
                alg.bracket_into(up, &fd, &mut c);
                for i in 0..k {
                    let d = w * self.mode_grads[i][axis][p];
                    if d != 0.0 {
                        for a in 0..m {
                            exchange[i * m + a] += d * c[a];
                        }
                    }
                }
            }
        }

        // source term on the right of the weak identity
        let mut src = vec![0.0; g * m];
        let mut any = false;
        let mut field = vec![0.0; g * m];
        let mut have_field = false;
        if let Some(op) = sys.demag() {
            op.demag_field_values(&u, &mut field);
            have_field = true;
        }
        if let Some(an) = &sys.physics().anisotropy {
            let mut gr = vec![0.0; m];
            for (fp, up) in field.chunks_mut(m).zip(u.chunks(m)) {
                an.grad_into(up, &mut gr)?;
                for a in 0..m {
                    fp[a] -= gr[a];
                }
            }
            have_field = true;
        }
        if have_field {
            // llg: -[u, h_d - grad Phi];  gill: -[u, grad Phi] (field holds -grad Phi)
            for ((sp, up), fp) in src.chunks_mut(m).zip(u.chunks(m)).zip(field.chunks(m)) {
                alg.bracket_into(up, fp, &mut c);
                let sign = match sys.params().mode {
                    FlowMode::LlgBoundary => -1.0,
                    FlowMode::GillTorus => 1.0,
                };
                for a in 0..m {
                    sp[a] += sign * c[a];
                }
            }
            any = true;
        }
        if let Some(fs) = &sys.physics().forcing {
            for (p, (sp, up)) in src.chunks_mut(m).zip(u.chunks(m)).enumerate() {
                fs.value_into(&sys.point_coords(p), t, up, &mut c);
                for a in 0..m {
                    sp[a] += c[a];
                }
            }
            any = true;
        }
        let source = if any { sys.analyze_leading(&src, k) } else { vec![0.0; k * m] };

        Ok(Pairings {
            t,
            count: k,
            beta: beta[..k * m].to_vec(),
            beta_dot: beta_dot[..k * m].to_vec(),
            damping,
            exchange,
            source,
        })
    }
}

/// Running time integrals for one test function.
#[derive(Clone, Debug)]
struct Sums {
    eta_beta_dot: Vec<f64>,
    etap_beta: Vec<f64>,
    eta_damping: Vec<f64>,
    eta_exchange: Vec<f64>,
    eta_source: Vec<f64>,
}

impl Sums {
    fn zeros(m: usize) -> Self {
        Sums {
            eta_beta_dot: vec![0.0; m],
            etap_beta: vec![0.0; m],
            eta_damping: vec![0.0; m],
            eta_exchange: vec![0.0; m],
            eta_source: vec![0.0; m],
        }
    }
}

/// Coefficients `(c_t, c_D, c_E)` of the time, damping and exchange terms.
fn coefficients(mode: FlowMode, alpha0: f64, alpha: f64) -> (f64, f64, f64) {
    match mode {
        FlowMode::LlgBoundary => (1.0, -alpha, -1.0),
        FlowMode::GillTorus => (alpha0, alpha, 1.0),
    }
}

/// Online trapezoid accumulation of the battery pairings.
#[derive(Clone, Debug)]
pub struct WeakAccumulator {
    battery: Vec<TestFunction>,
    mode: FlowMode,
    alpha0: f64,
    alpha: f64,
    t_final: f64,
    m: usize,
    metric: Vec<f64>,
    start: Option<(f64, Vec<f64>)>,
    last: Option<Pairings>,
    sums: Vec<Sums>,
}

impl WeakAccumulator {
    pub fn new(sys: &FlowSystem, battery: Vec<TestFunction>) -> Self {
        let p = sys.params();
        let m = sys.m();
        let sums = battery.iter().map(|_| Sums::zeros(m)).collect();
        WeakAccumulator {
            battery,
            mode: p.mode,
            alpha0: p.alpha0,
            alpha: p.alpha,
            t_final: p.t_final,
            m,
            metric: sys.algebra().metric().to_vec(),
            start: None,
            last: None,
            sums,
        }
    }

    /// Overrides `alpha0` (the trajectory is left unchanged).
    pub fn with_alpha0(mut self, alpha0: f64) -> Self {
        self.alpha0 = alpha0;
        self
    }

    pub fn battery(&self) -> &[TestFunction] {
        &self.battery
    }

    pub fn push(&mut self, pr: Pairings) -> Result<()> {
        let m = self.m;
        if let Some(tf) = self.battery.iter().find(|tf| tf.mode >= pr.count) {
            return Err(Error::contract(format!("test mode {} is not resolved", tf.mode + 1)));
        }
        if let Some(last) = &self.last {
            let dt = pr.t - last.t;
            if !(dt > 0.0) {
                return Err(Error::contract("sample times must increase"));
            }
            let tf_ = self.t_final;
            for (tf, s) in self.battery.iter().zip(self.sums.iter_mut()) {
                let i = tf.mode;
                let (e0, e1) = (tf.profile.value(last.t, tf_), tf.profile.value(pr.t, tf_));
                let (d0, d1) = (tf.profile.derivative(last.t, tf_), tf.profile.derivative(pr.t, tf_));
                let h = 0.5 * dt;
                for a in 0..m {
                    let k = i * m + a;
                    s.eta_beta_dot[a] += h * (e0 * last.beta_dot[k] + e1 * pr.beta_dot[k]);
                    s.etap_beta[a] += h * (d0 * last.beta[k] + d1 * pr.beta[k]);
                    s.eta_damping[a] += h * (e0 * last.damping[k] + e1 * pr.damping[k]);
                    s.eta_exchange[a] += h * (e0 * last.exchange[k] + e1 * pr.exchange[k]);
                    s.eta_source[a] += h * (e0 * last.source[k] + e1 * pr.source[k]);
                }
            }
        } else {
            self.start = Some((pr.t, pr.beta.clone()));
        }
        self.last = Some(pr);
        Ok(())
    }

    fn lowered_norm(&self, v: &[f64]) -> f64 {
        let m = self.m;
        (0..m)
            .map(|a| (0..m).map(|b| self.metric[a * m + b] * v[b]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Residuals over `[t_start, t_latest]`.
    pub fn report(&self, form: WeakForm) -> WeakResidualReport {
        let m = self.m;
        let (c_t, c_d, c_e) = coefficients(self.mode, self.alpha0, self.alpha);
        let mut entries = Vec::with_capacity(self.battery.len());
        let (t0, t1) = match (&self.start, &self.last) {
            (Some((t0, _)), Some(l)) => (*t0, l.t),
            _ => (0.0, 0.0),
        };
        for (tf, s) in self.battery.iter().zip(&self.sums) {
            let mut time = vec![0.0; m];
            if let (Some((_, b0)), Some(last)) = (&self.start, &self.last) {
                let i = tf.mode;
                match form {
                    WeakForm::Derivative => time.copy_from_slice(&s.eta_beta_dot),
                    WeakForm::IntegratedByParts => {
                        let (e0, e1) = (tf.profile.value(t0, self.t_final), tf.profile.value(t1, self.t_final));
                        for a in 0..m {
                            time[a] = last.beta[i * m + a] * e1 - b0[i * m + a] * e0 - s.etap_beta[a];
                        }
                    }
                }
            }
            let lhs: Vec<f64> = (0..m).map(|a| c_t * time[a] + c_d * s.eta_damping[a]).collect();
            let rhs: Vec<f64> = (0..m).map(|a| -c_e * s.eta_exchange[a] + s.eta_source[a]).collect();
            let res: Vec<f64> = (0..m).map(|a| lhs[a] - rhs[a]).collect();
            let scale = self.lowered_norm(&time.iter().map(|v| c_t * v).collect::<Vec<_>>())
                + self.lowered_norm(&s.eta_damping) * c_d.abs()
                + self.lowered_norm(&s.eta_exchange) * c_e.abs()
                + self.lowered_norm(&s.eta_source);
            let residual = self.lowered_norm(&res);
            entries.push(WeakEntry {
                test: *tf,
                lhs: self.lowered_norm(&lhs),
                rhs: self.lowered_norm(&rhs),
                residual,
                relative: if scale > 0.0 { residual / scale } else { 0.0 },
                damping: c_d.abs() * self.lowered_norm(&s.eta_damping),
            });
        }
        WeakResidualReport::new(form, t0, t1, entries)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakEntry {
    pub test: TestFunction,
    /// Norm of the time and damping terms.
    pub lhs: f64,
    /// Norm of the exchange and source terms.
    pub rhs: f64,
    pub residual: f64,
    pub relative: f64,
    /// Norm of the damping pairing `alpha int int [u, u_t] phi`.
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakResidualReport {
    pub form: WeakForm,
    pub t_start: f64,
    pub t_end: f64,
    pub entries: Vec<WeakEntry>,
    pub max: f64,
    pub mean: f64,
}

impl WeakResidualReport {
    pub fn new(form: WeakForm, t_start: f64, t_end: f64, entries: Vec<WeakEntry>) -> Self {
        let max = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
        let mean = if entries.is_empty() {
            0.0
        } else {
            entries.iter().map(|e| e.residual).sum::<f64>() / entries.len() as f64
        };
        WeakResidualReport { form, t_start, t_end, entries, max, mean }
    }

    pub fn damping_max(&self) -> f64 {
        self.entries.iter().map(|e| e.damping).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,test,mode,profile,lhs,rhs,residual,relative,damping\n");
        for (k, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                s,
                "{k},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                e.test.label(),
                e.test.mode + 1,
                e.test.profile.name(),
                e.lhs,
                e.rhs,
                e.residual,
                e.relative,
                e.damping
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "weak residual ({} form, t in [{:.4}, {:.4}], {} test functions): max {:.3e}, mean {:.3e}",
            self.form.as_str(),
            self.t_start,
            self.t_end,
            self.entries.len(),
            self.max,
            self.mean
        )
    }
}

/// Battery residuals of a sampled trajectory. Pairings are computed in
/// parallel and accumulated in sample order.
pub fn weak_residual(
    sys: &FlowSystem,
    samples: &[Sample],
    battery: &[TestFunction],
    form: WeakForm,
) -> Result<WeakResidualReport> {
    let count = battery.iter().map(|t| t.mode + 1).max().unwrap_or(0);
    if count > sys.basis().len() {
        return Err(Error::contract(format!(
            "test mode {count} exceeds the {} resolved modes",
            sys.basis().len()
        )));
    }
    let ev = WeakEvaluator::new(sys, count);
    let pairings: Vec<Pairings> = samples
        .par_iter()
        .map(|s| ev.pairings(s.t, &s.beta, &s.beta_dot))
        .collect::<Result<_>>()?;
    let mut acc = WeakAccumulator::new(sys, battery.to_vec());
    for p in pairings {
        acc.push(p)?;
    }
    Ok(acc.report(form))
}

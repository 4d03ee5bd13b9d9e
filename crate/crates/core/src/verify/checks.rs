//! Energy bounds, the L^2 identity, the sphere functional and pointwise
//! orthogonality, checked against a finished trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::BallSampler;
use crate::error::Result;
use crate::flow::{block_inner, weighted_norm_sq, FlowMode, FlowSystem, Sample};

use super::ledger::DiagnosticsLedger;

/// Sampled constants entering the energy bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConstants {
    /// `sup |grad Phi~|` over the ball.
    pub m1: f64,
    /// `sup |Hess Phi~|_F` over the ball.
    pub m2: f64,
    /// Derivative bound of the combined forcing.
    pub c1: f64,
    /// `sup |G|` of the combined forcing `G = F~ - [z, grad Phi~(z)]`.
    pub c2: f64,
    pub volume: f64,
    pub f_max: f64,
    pub space_dim: usize,
}

impl BoundConstants {
    /// `M1, M2` from `phi_samples` ball points; `C1, C2` from `forcing_samples`
    /// random `(x, t, z)`.
    pub fn sample(sys: &FlowSystem, phi_samples: usize, forcing_samples: usize, seed: u64) -> Result<Self> {
        let (m1, m2) = match &sys.physics().anisotropy {
            Some(an) => an.sample_sups(phi_samples),
            None => (0.0, 0.0),
        };
        let (c1, c2) = if sys.params().mode == FlowMode::GillTorus
            && (sys.physics().forcing.is_some() || sys.physics().anisotropy.is_some())
        {
            combined_forcing_sups(sys, forcing_samples, seed)?
        } else {
            (0.0, 0.0)
        };
        let domain = sys.domain();
        Ok(BoundConstants {
            m1,
            m2,
            c1,
            c2,
            volume: domain.volume(),
            f_max: sys.basis().weight_max(),
            space_dim: domain.space_dim(),
        })
    }
}

fn combined_value(sys: &FlowSystem, x: &[f64], t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
    let alg = sys.algebra().as_ref();
    let m = alg.dim();
    out.fill(0.0);
    if let Some(f) = &sys.physics().forcing {
        f.value_into(x, t, z, out);
    }
    if let Some(an) = &sys.physics().anisotropy {
        let g = an.grad(z)?;
        let b = alg.bracket(z, &g);
        for a in 0..m {
            out[a] -= b[a];
        }
    }
    Ok(())
}

fn combined_forcing_sups(sys: &FlowSystem, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let alg = sys.algebra().as_ref();
    let m = alg.dim();
    let lengths = sys.domain().lengths().to_vec();
    let t_max = sys.params().t_final;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut v = vec![0.0; m];
    let mut vp = vec![0.0; m];
    let mut vm = vec![0.0; m];
    let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
    for z in BallSampler::new(alg).take(samples) {
        // keep the shifted points inside the ball
        let z: Vec<f64> = z.iter().map(|c| c * (1.0 - 2.0 * h)).collect();
        let x: Vec<f64> = lengths.iter().map(|l| rng.gen::<f64>() * l).collect();
        let t = rng.gen::<f64>() * t_max;
        combined_value(sys, &x, t, &z, &mut v)?;
        c2 = c2.max(alg.norm(&v));
        let mut xs = x.clone();
        for p in 0..x.len() {
            xs[p] = x[p] + h;
            combined_value(sys, &xs, t, &z, &mut vp)?;
            xs[p] = x[p] - h;
            combined_value(sys, &xs, t, &z, &mut vm)?;
            xs[p] = x[p];
            let d: Vec<f64> = vp.iter().zip(&vm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            c1 = c1.max(alg.norm(&d));
        }
        let mut zs = z.clone();
        let mut frob = 0.0;
        for b in 0..m {
            zs[b] = z[b] + h;
            combined_value(sys, &x, t, &zs, &mut vp)?;
            zs[b] = z[b] - h;
            combined_value(sys, &x, t, &zs, &mut vm)?;
            zs[b] = z[b];
            frob += vp.iter().zip(&vm).map(|(a, c)| ((a - c) / (2.0 * h)).powi(2)).sum::<f64>();
        }
        c1 = c1.max(2.0 * frob.sqrt());
    }
    Ok((c1, c2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyPoint {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCheck {
    pub points: Vec<EnergyPoint>,
    pub min_margin: f64,
    /// `sup_t int |grad u|^2` over the run (llg bound only).
    pub m3: f64,
    pub constants: BoundConstants,
}

impl EnergyCheck {
    /// Every margin at least `-tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.min_margin >= -tol
    }
}

/// Checks the a-priori energy inequality at every ledger row.
///
/// llg: `(1 + a e) E(t) + a I_ut + 2 e I_lap
///       <= (1 + a e) E(0) + 2 a (1 + M1^2) vol t + (2 M2 + 1 + n) M3 t`.
///
/// gill: `(a0 + a e)/2 E(t) + e I_lap + a a0/2 I_ut
///       <= (a C2^2/(2 a0) + 3/2 C1 |f|_inf) vol t + 3/2 C1 I_grad + (a0 + a e)/2 E(0)`.
pub fn energy_ledger_check(sys: &FlowSystem, ledger: &DiagnosticsLedger, constants: &BoundConstants) -> EnergyCheck {
    let p = sys.params();
    let (a, e, a0) = (p.alpha, p.epsilon, p.alpha0);
    let c = constants;
    let e0 = ledger.rows.first().map_or(0.0, |r| r.grad_energy);
    let m3 = ledger.max_of(|r| r.grad_energy).max(0.0);
    let n = c.space_dim as f64;
    let points: Vec<EnergyPoint> = ledger
        .rows
        .iter()
        .map(|r| {
            let t = r.t;
            let (lhs, rhs) = match p.mode {
                FlowMode::LlgBoundary => (
                    (1.0 + a * e) * r.grad_energy + a * r.ut_integral + 2.0 * e * r.lap_integral,
                    (1.0 + a * e) * e0
                        + 2.0 * a * (1.0 + c.m1 * c.m1) * c.volume * t
                        + (2.0 * c.m2 + 1.0 + n) * m3 * t,
                ),
                FlowMode::GillTorus => (
                    0.5 * (a0 + a * e) * r.grad_energy + e * r.lap_integral + 0.5 * a * a0 * r.ut_integral,
                    (a * c.c2 * c.c2 / (2.0 * a0) + 1.5 * c.c1 * c.f_max) * c.volume * t
                        + 1.5 * c.c1 * r.grad_integral
                        + 0.5 * (a0 + a * e) * e0,
                ),
            };
            EnergyPoint { t, lhs, rhs, margin: rhs - lhs }
        })
        .collect();
    let min_margin = points.iter().map(|q| q.margin).fold(f64::INFINITY, f64::min);
    EnergyCheck { points, min_margin, m3, constants: c.clone() }
}

/// Drift of the identity `alpha0 int |u|^2 + 2 eps int_0^t int f |grad u|^2 = const`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassCheck {
    pub initial: f64,
    pub max_abs_drift: f64,
    pub max_rel_drift: f64,
    /// Largest `|sum |beta(t)|^2 - sum |beta(0)|^2|`.
    pub max_l2_drift: f64,
}

pub fn mass_identity_check(ledger: &DiagnosticsLedger) -> MassCheck {
    let first = ledger.rows.first();
    let initial = first.map_or(0.0, |r| r.mass_identity);
    let l0 = first.map_or(0.0, |r| r.l2_norm_sq);
    let max_abs = ledger.rows.iter().map(|r| (r.mass_identity - initial).abs()).fold(0.0, f64::max);
    let max_l2 = ledger.rows.iter().map(|r| (r.l2_norm_sq - l0).abs()).fold(0.0, f64::max);
    MassCheck {
        initial,
        max_abs_drift: max_abs,
        max_rel_drift: if initial > 0.0 { max_abs / initial } else { max_abs },
        max_l2_drift: max_l2,
    }
}

/// Summary of the sphere functional over the samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereReport {
    pub max_q: f64,
    pub max_violation: f64,
    /// First sample time with `q > tol`.
    pub first_exceedance: Option<f64>,
}

pub fn sphere_report(ledger: &DiagnosticsLedger, tol: f64) -> SphereReport {
    SphereReport {
        max_q: ledger.rows.iter().map(|r| r.q).fold(0.0, f64::max),
        max_violation: ledger
            .rows
            .iter()
            .map(|r| r.sphere_violation)
            .fold(ledger.max_step_sphere_violation, f64::max),
        first_exceedance: ledger.rows.iter().find(|r| r.q > tol).map(|r| r.t),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalityReport {
    /// `max |<u, [J(u), L]>| / (|u| |L|)` over the grid, `L` the local field.
    pub max_pointwise: f64,
    /// `d/dt sum |beta|^2 = 2 sum <beta, beta'>`.
    pub mass_rate: f64,
    /// `-2 eps sum lambda |beta|^2 / alpha0`.
    pub predicted_rate: f64,
    pub rate_mismatch: f64,
}

impl OrthogonalityReport {
    pub fn relative_mismatch(&self) -> f64 {
        let s = self.predicted_rate.abs();
        if s > 0.0 {
            self.rate_mismatch / s
        } else {
            self.rate_mismatch
        }
    }
}

pub fn orthogonality_probe(sys: &FlowSystem, sample: &Sample) -> Result<OrthogonalityReport> {
    let alg = sys.algebra().as_ref();
    let m = sys.m();
    let p = sys.params();
    let u = sys.synthesize(&sample.beta);
    let j = sys.project(&u);
    let l = sys.local_field(&sample.beta, &u, &j)?;
    let mut br = vec![0.0; m];
    let mut worst: f64 = 0.0;
    for ((up, jp), lp) in u.chunks(m).zip(j.chunks(m)).zip(l.chunks(m)) {
        let scale = alg.norm(up) * alg.norm(lp);
        if scale > 0.0 {
            alg.bracket_into(jp, lp, &mut br);
            worst = worst.max(alg.inner(up, &br).abs() / scale);
        }
    }
    let lam = sys.basis().eigenvalues();
    let rate = 2.0 * block_inner(alg, &sample.beta, &sample.beta_dot);
    let predicted = -2.0 * p.epsilon * weighted_norm_sq(alg, &sample.beta, |i| lam[i]) / p.alpha0;
    Ok(OrthogonalityReport {
        max_pointwise: worst,
        mass_rate: rate,
        predicted_rate: predicted,
        rate_mismatch: (rate - predicted).abs(),
    })
}

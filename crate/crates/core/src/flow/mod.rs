//! Galerkin ODE systems `(Id + A(beta)) dbeta/dt = B(beta)` for the two model
//! equations, and their time integration.
//!
//! `llg_boundary` is the regularized Landau-Lifshitz-Gilbert equation
//!
//! ```text
//! u_t - alpha [J(u), u_t] = eps Lap u + [J(u), -Lap u - h_d(u) + grad Phi~(J(u))]
//! ```
//!
//! and `gill_torus` is the inhomogeneous equation on a flat torus
//!
//! ```text
//! alpha0 u_t + alpha [J(u), u_t] = eps Lap_f u + [J(u), Lap_f u] + F~(x, t, J(u))
//! ```
//!
//! with `Lap_f = div(f grad)` and `J(u) = u / max(|u|, 1)`. An anisotropy in
//! the second mode enters as the forcing `-[J, grad Phi~(J)]`.
//!
//! Nonlinear terms are evaluated on the grid and projected back onto the
//! modes by quadrature.

mod continuation;
mod integrate;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{project_ball, AlgebraKernel, AnisotropySpec, ForcingSpec};
use crate::demag::DemagOperator;
use crate::domain::{DomainKind, DomainSpec, Field, ModeBasis};
use crate::error::{Error, Result};

pub use continuation::{
    continuation_alpha, continuation_epsilon, max_l2_distance, AlphaReport, AlphaRow, ContinuationSetup, EpsilonReport, EpsilonRow,
};
pub use integrate::{run, run_with, Accumulators, Sample, Trajectory};

/// Largest `N * m` for which `(Id + A)` is factorized densely.
pub const DENSE_SOLVE_LIMIT: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    LlgBoundary,
    GillTorus,
}

impl FlowMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowMode::LlgBoundary => "llg_boundary",
            FlowMode::GillTorus => "gill_torus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "llg_boundary" | "llg" => Some(FlowMode::LlgBoundary),
            "gill_torus" | "gill" => Some(FlowMode::GillTorus),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    ImplicitMidpoint,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rk4" => Some(Scheme::Rk4),
            "implicit_midpoint" | "midpoint" => Some(Scheme::ImplicitMidpoint),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub mode: FlowMode,
    pub alpha0: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub demag: bool,
    /// Steps between recorded samples.
    pub stride: usize,
    /// Relative tolerance of the runtime L^2 identity.
    pub mass_tolerance: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            mode: FlowMode::LlgBoundary,
            alpha0: 1.0,
            alpha: 0.0,
            epsilon: 0.0,
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::Rk4,
            demag: false,
            stride: 10,
            mass_tolerance: 1e-6,
        }
    }
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl FlowParams {
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        self.validate_basic()?;
        if self.mode == FlowMode::GillTorus && domain.kind() != DomainKind::FlatTorus {
            return Err(Error::config("mode", "gill_torus requires a flat_torus domain"));
        }
        Ok(())
    }

    /// The checks that do not depend on the domain.
    pub fn validate_basic(&self) -> Result<()> {
        if !positive_finite(self.alpha0) {
            return Err(Error::config("alpha0", format!("{} must be positive", self.alpha0)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config("alpha", format!("{} must be non-negative", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", format!("{} must be non-negative", self.epsilon)));
        }
        if !positive_finite(self.dt) {
            return Err(Error::config("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::config("T", format!("{} must be non-negative", self.t_final)));
        }
        if self.stride == 0 {
            return Err(Error::config("output.stride", "must be at least 1"));
        }
        if !positive_finite(self.mass_tolerance) {
            return Err(Error::config("tolerance.mass", "must be positive"));
        }
        match self.mode {
            FlowMode::LlgBoundary => {
                if self.alpha0 != 1.0 {
                    return Err(Error::config("alpha0", "llg_boundary mode requires alpha0 = 1"));
                }
            }
            FlowMode::GillTorus => {
                if self.demag {
                    return Err(Error::config("demag", "the stray field is only available in llg_boundary mode"));
                }
            }
        }
        Ok(())
    }

    /// Number of uniform steps and their length.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, 0.0);
        }
        let n = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Optional terms of the right-hand side.
#[derive(Clone, Debug, Default)]
pub struct Physics {
    pub anisotropy: Option<AnisotropySpec>,
    pub forcing: Option<ForcingSpec>,
    /// Prebuilt stray-field operator; built on demand when `demag` is set.
    pub demag: Option<Arc<DemagOperator>>,
}

/// Coefficients at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinState {
    pub t: f64,
    /// `beta[i * m + a]`: component `a` of the coefficient of mode `i`.
    pub beta: Vec<f64>,
}

/// Grid quantities produced while evaluating the right-hand side.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub u: Vec<f64>,
    pub j: Vec<f64>,
    pub b: Vec<f64>,
}

/// Result of [`init_coeffs`].
#[derive(Clone, Debug)]
pub struct InitialCoeffs {
    pub state: GalerkinState,
    /// `|u0^N - u0|_{L^2}`.
    pub reconstruction_error: f64,
    /// `max |(|u0| - 1)|` over the grid.
    pub unit_deviation: f64,
}

/// Projects unit-valued initial data onto the modes.
pub fn init_coeffs(basis: &ModeBasis, alg: &dyn AlgebraKernel, u0: &Field) -> Result<InitialCoeffs> {
    let m = alg.dim();
    if u0.algebra_dim() != m {
        return Err(Error::contract(format!(
            "initial field has {} components, algebra has {m}",
            u0.algebra_dim()
        )));
    }
    basis.domain().check_same(u0.domain())?;
    let g = basis.domain().num_points();
    let dev = (0..g).map(|p| (alg.norm(u0.at(p)) - 1.0).abs()).fold(0.0, f64::max);
    if !(dev <= 1e-8) {
        return Err(Error::config(
            "initial",
            format!("initial data must be unit-valued; max ||u0| - 1| = {dev:.3e}"),
        ));
    }
    let beta = basis.analyze(u0)?;
    let mut recon = vec![0.0; g * m];
    basis.synthesize_into(&beta, m, &mut recon);
    let w = basis.domain().cell_volume();
    let mut err = 0.0;
    for p in 0..g {
        let d: Vec<f64> = (0..m).map(|a| recon[p * m + a] - u0.at(p)[a]).collect();
        err += w * alg.norm_sq(&d);
    }
    Ok(InitialCoeffs {
        state: GalerkinState { t: 0.0, beta },
        reconstruction_error: err.sqrt(),
        unit_deviation: dev,
    })
}

/// `sum_i <x_i, y_i>` over coefficient blocks.
pub fn block_inner(alg: &dyn AlgebraKernel, x: &[f64], y: &[f64]) -> f64 {
    let m = alg.dim();
    x.chunks(m).zip(y.chunks(m)).map(|(a, b)| alg.inner(a, b)).sum()
}

/// `sum_i w_i |x_i|^2` over coefficient blocks.
pub fn weighted_norm_sq(alg: &dyn AlgebraKernel, x: &[f64], w: impl Fn(usize) -> f64) -> f64 {
    let m = alg.dim();
    x.chunks(m).enumerate().map(|(i, a)| w(i) * alg.norm_sq(a)).sum()
}

/// A Galerkin system ready to be integrated.
#[derive(Clone)]
pub struct FlowSystem {
    alg: Arc<dyn AlgebraKernel>,
    basis: Arc<ModeBasis>,
    params: FlowParams,
    physics: Physics,
    demag: Option<Arc<DemagOperator>>,
    /// `ad[(e * m + b) * m + a] = [e_e, e_b]_a`.
    ad: Vec<f64>,
    /// Point-major copy of the modes: `modes_pm[p * N + i]`.
    modes_pm: Vec<f64>,
    /// Flattened grid coordinates, present when a forcing is set.
    coords: Vec<f64>,
}

impl std::fmt::Debug for FlowSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowSystem")
            .field("algebra", &self.alg.name())
            .field("modes", &self.basis.len())
            .field("params", &self.params)
            .finish()
    }
}

impl FlowSystem {
    pub fn new(alg: Arc<dyn AlgebraKernel>, basis: Arc<ModeBasis>, params: FlowParams, physics: Physics) -> Result<Self> {
        let domain = basis.domain().clone();
        params.validate(&domain)?;
        let m = alg.dim();
        if let Some(a) = &physics.anisotropy {
            if a.algebra().dim() != m {
                return Err(Error::config("anisotropy", "algebra dimension mismatch"));
            }
        }
        let demag = if params.demag {
            match &physics.demag {
                Some(op) => {
                    domain.check_same(op.domain())?;
                    Some(op.clone())
                }
                None => Some(Arc::new(DemagOperator::new(&domain, m)?)),
            }
        } else {
            None
        };
        let mut ad = vec![0.0; m * m * m];
        let mut ee = vec![0.0; m];
        let mut eb = vec![0.0; m];
        for e in 0..m {
            for b in 0..m {
                ee.fill(0.0);
                eb.fill(0.0);
                ee[e] = 1.0;
                eb[b] = 1.0;
                alg.bracket_into(&ee, &eb, &mut ad[(e * m + b) * m..(e * m + b + 1) * m]);
            }
        }
        let n = basis.len();
        let g = domain.num_points();
        let mut modes_pm = vec![0.0; g * n];
        for i in 0..n {
            for (p, &v) in basis.mode(i).iter().enumerate() {
                modes_pm[p * n + i] = v;
            }
        }
        let coords = if physics.forcing.is_some() {
            (0..g).flat_map(|p| domain.point(p)).collect()
        } else {
            Vec::new()
        };
        Ok(FlowSystem { alg, basis, params, physics, demag, ad, modes_pm, coords })
    }

    /// Same system with different parameters (shares basis and operators).
    pub fn with_params(&self, params: FlowParams) -> Result<Self> {
        let mut physics = self.physics.clone();
        if physics.demag.is_none() {
            physics.demag = self.demag.clone();
        }
        FlowSystem::new(self.alg.clone(), self.basis.clone(), params, physics)
    }

    pub fn algebra(&self) -> &Arc<dyn AlgebraKernel> {
        &self.alg
    }

    pub fn basis(&self) -> &Arc<ModeBasis> {
        &self.basis
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn demag(&self) -> Option<&Arc<DemagOperator>> {
        self.demag.as_ref()
    }

    pub fn domain(&self) -> &DomainSpec {
        self.basis.domain()
    }

    pub fn m(&self) -> usize {
        self.alg.dim()
    }

    /// Length of a coefficient block vector, `N * m`.
    pub fn dim(&self) -> usize {
        self.basis.len() * self.alg.dim()
    }

    pub fn point_coords(&self, p: usize) -> Vec<f64> {
        let n = self.domain().space_dim();
        if self.coords.is_empty() {
            self.domain().point(p)
        } else {
            self.coords[p * n..(p + 1) * n].to_vec()
        }
    }

    fn coords_at(&self, p: usize) -> &[f64] {
        let n = self.domain().space_dim();
        &self.coords[p * n..(p + 1) * n]
    }

    pub fn synthesize(&self, beta: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut u = vec![0.0; self.domain().num_points() * m];
        self.basis.synthesize_into(beta, m, &mut u);
        u
    }

    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.dim()];
        self.basis.analyze_into(values, self.m(), &mut beta);
        beta
    }

    /// `-Lap_f u^N = sum_i lambda_i beta_i omega^i` on the grid.
    pub fn neg_laplacian(&self, beta: &[f64]) -> Vec<f64> {
        let m = self.m();
        let lam = self.basis.eigenvalues();
        let scaled: Vec<f64> = beta.iter().enumerate().map(|(k, b)| lam[k / m] * b).collect();
        self.synthesize(&scaled)
    }

    /// Pointwise ball projection of a grid field.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut j = u.to_vec();
        for c in j.chunks_mut(m) {
            project_ball(self.alg.as_ref(), c);
        }
        j
    }

    /// The field bracketed with `J(u)` in the right-hand side:
    /// `-Lap u - h_d(u) + grad Phi~(J)` (llg) or `Lap_f u - grad Phi~(J)` (gill).
    pub fn local_field(&self, beta: &[f64], u: &[f64], j: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        let mut l = self.neg_laplacian(beta);
        let sign = match self.params.mode {
            FlowMode::LlgBoundary => 1.0,
            FlowMode::GillTorus => -1.0,
        };
        if sign < 0.0 {
            for v in l.iter_mut() {
                *v = -*v;
            }
        }
        if let Some(op) = &self.demag {
            let mut h = vec![0.0; u.len()];
            op.demag_field_values(u, &mut h);
            for (o, v) in l.iter_mut().zip(&h) {
                *o -= v;
            }
        }
        if let Some(an) = &self.physics.anisotropy {
            let mut gr = vec![0.0; m];
            for (lp, jp) in l.chunks_mut(m).zip(j.chunks(m)) {
                an.grad_into(jp, &mut gr)?;
                for a in 0..m {
                    lp[a] += sign * gr[a];
                }
            }
        }
        Ok(l)
    }

    /// Synthesizes `u^N`, projects it and assembles `B(beta)`.
    pub fn evaluate(&self, t: f64, beta: &[f64]) -> Result<Evaluation> {
        let m = self.m();
        let u = self.synthesize(beta);
        let j = self.project(&u);
        let l = self.local_field(beta, &u, &j)?;
        let mut r = vec![0.0; u.len()];
        for ((rp, jp), lp) in r.chunks_mut(m).zip(j.chunks(m)).zip(l.chunks(m)) {
            self.alg.bracket_into(jp, lp, rp);
        }
        if let Some(f) = &self.physics.forcing {
            let mut fv = vec![0.0; m];
            for (p, (rp, jp)) in r.chunks_mut(m).zip(j.chunks(m)).enumerate() {
                f.value_into(self.coords_at(p), t, jp, &mut fv);
                for a in 0..m {
                    rp[a] += fv[a];
                }
            }
        }
        let mut b = self.analyze(&r);
        let lam = self.basis.eigenvalues();
        let eps = self.params.epsilon;
        let scale = match self.params.mode {
            FlowMode::LlgBoundary => 1.0,
            FlowMode::GillTorus => 1.0 / self.params.alpha0,
        };
        for (k, v) in b.iter_mut().enumerate() {
            *v = scale * (*v - eps * lam[k / m] * beta[k]);
        }
        Ok(Evaluation { u, j, b })
    }

    pub fn assemble_b(&self, t: f64, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(t, beta)?.b)
    }

    /// Scalar `c` with `(A v)_i = c P_i [J, v]`.
    pub fn a_coefficient(&self) -> f64 {
        match self.params.mode {
            FlowMode::LlgBoundary => -self.params.alpha,
            FlowMode::GillTorus => self.params.alpha / self.params.alpha0,
        }
    }

    /// `T[(i * N + k) * m + e] = int omega^i omega^k J_e`.
    fn pair_table(&self, j: &[f64]) -> Vec<f64> {
        let n = self.basis.len();
        let m = self.m();
        let w = self.domain().cell_volume();
        let mut t = vec![0.0; n * n * m];
        for (p, jp) in j.chunks(m).enumerate() {
            let om = &self.modes_pm[p * n..(p + 1) * n];
            for i in 0..n {
                let wi = w * om[i];
                if wi == 0.0 {
                    continue;
                }
                for k in i..n {
                    let c = wi * om[k];
                    let row = &mut t[(i * n + k) * m..(i * n + k + 1) * m];
                    for e in 0..m {
                        row[e] += c * jp[e];
                    }
                }
            }
        }
        for i in 0..n {
            for k in 0..i {
                for e in 0..m {
                    t[(i * n + k) * m + e] = t[(k * n + i) * m + e];
                }
            }
        }
        t
    }

    /// Dense matrix of `A` at the projected field `j`.
    pub fn assemble_a(&self, j: &[f64]) -> DMatrix<f64> {
        let n = self.basis.len();
        let m = self.m();
        let d = n * m;
        let c = self.a_coefficient();
        let mut a = DMatrix::zeros(d, d);
        if c == 0.0 {
            return a;
        }
        let t = self.pair_table(j);
        for i in 0..n {
            for k in 0..n {
                let tik = &t[(i * n + k) * m..(i * n + k + 1) * m];
                for b in 0..m {
                    for r in 0..m {
                        let mut s = 0.0;
                        for e in 0..m {
                            s += tik[e] * self.ad[(e * m + b) * m + r];
                        }
                        a[(i * m + r, k * m + b)] = c * s;
                    }
                }
            }
        }
        a
    }

    /// Matrix of `A` at a coefficient state.
    pub fn assemble_a_at(&self, beta: &[f64]) -> DMatrix<f64> {
        let j = self.project(&self.synthesize(beta));
        self.assemble_a(&j)
    }

    /// Matrix-free `A v`.
    pub fn apply_a(&self, j: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m();
        let c = self.a_coefficient();
        if c == 0.0 {
            return vec![0.0; v.len()];
        }
        let vf = self.synthesize(v);
        let mut r = vec![0.0; vf.len()];
        for ((rp, jp), vp) in r.chunks_mut(m).zip(j.chunks(m)).zip(vf.chunks(m)) {
            self.alg.bracket_into(jp, vp, rp);
        }
        let mut out = self.analyze(&r);
        for x in out.iter_mut() {
            *x *= c;
        }
        out
    }

    /// Solves `(Id + A) x = b` at the projected field `j`.
    pub fn solve_velocity(&self, j: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        if self.a_coefficient() == 0.0 {
            return Ok(b.to_vec());
        }
        if self.dim() <= DENSE_SOLVE_LIMIT {
            let mut mat = self.assemble_a(j);
            for k in 0..self.dim() {
                mat[(k, k)] += 1.0;
            }
            let lu = mat.lu();
            let x = lu
                .solve(&DVector::from_column_slice(b))
                .ok_or_else(|| Error::contract("(Id + A) is singular"))?;
            Ok(x.as_slice().to_vec())
        } else {
            self.solve_cg(j, b)
        }
    }

    /// Conjugate gradients on `(Id - A^2) x = (Id - A) b`, which is
    /// self-adjoint and positive in the block inner product.
    fn solve_cg(&self, j: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let alg = self.alg.as_ref();
        let op = |x: &[f64]| -> Vec<f64> {
            let ax = self.apply_a(j, x);
            let aax = self.apply_a(j, &ax);
            x.iter().zip(&aax).map(|(x, y)| x - y).collect()
        };
        let ab = self.apply_a(j, b);
        let rhs: Vec<f64> = b.iter().zip(&ab).map(|(x, y)| x - y).collect();
        let mut x = vec![0.0; b.len()];
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = block_inner(alg, &r, &r);
        let target = 1e-28 * rr.max(f64::MIN_POSITIVE);
        for _ in 0..(10 * b.len()).max(100) {
            if rr <= target {
                return Ok(x);
            }
            let ap = op(&p);
            let alpha = rr / block_inner(alg, &p, &ap);
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new = block_inner(alg, &r, &r);
            let beta = rr_new / rr;
            for k in 0..p.len() {
                p[k] = r[k] + beta * p[k];
            }
            rr = rr_new;
        }
        if rr <= 1e-20 * block_inner(alg, &rhs, &rhs) {
            Ok(x)
        } else {
            Err(Error::contract(format!("velocity solve stalled at residual {:.3e}", rr.sqrt())))
        }
    }

    /// `dbeta/dt` together with the grid fields it was computed from.
    pub fn velocity_eval(&self, t: f64, beta: &[f64]) -> Result<(Vec<f64>, Evaluation)> {
        let ev = self.evaluate(t, beta)?;
        let v = self.solve_velocity(&ev.j, &ev.b)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Step { t, message: "non-finite velocity".into() });
        }
        Ok((v, ev))
    }

    pub fn velocity(&self, t: f64, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.velocity_eval(t, beta)?.0)
    }

    /// Projection of a grid field onto the first `count` modes.
    pub fn analyze_leading(&self, values: &[f64], count: usize) -> Vec<f64> {
        let m = self.m();
        let g = self.domain().num_points();
        let w = self.domain().cell_volume();
        let mut out = vec![0.0; count * m];
        for i in 0..count {
            let mode = self.basis.mode(i);
            let o = &mut out[i * m..(i + 1) * m];
            for p in 0..g {
                let om = mode[p];
                for a in 0..m {
                    o[a] += om * values[p * m + a];
                }
            }
            for v in o.iter_mut() {
                *v *= w;
            }
        }
        out
    }
}

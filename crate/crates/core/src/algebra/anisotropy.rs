//! Anisotropy energies and tangent forcings, extended from the unit sphere to
//! the closed unit ball by a radial cutoff.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AlgebraKernel;
use crate::error::{Error, Result};

/// Largest norm accepted by the extended functions.
pub const BALL_SLACK: f64 = 1.1;

/// The radial cutoff `zeta`: zero on `[0, 2 delta0]`, one at 1, C^2 in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    delta0: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff { delta0: 0.25 }
    }
}

impl Cutoff {
    pub fn new(delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0 < 0.5) {
            return Err(Error::config("anisotropy.delta0", format!("{delta0} is not in (0, 1/2)")));
        }
        Ok(Cutoff { delta0 })
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    fn reduced(&self, t: f64) -> f64 {
        ((t - 2.0 * self.delta0) / (1.0 - 2.0 * self.delta0)).clamp(0.0, 1.0)
    }

    /// Quintic smoothstep in the reduced variable.
    pub fn zeta(&self, t: f64) -> f64 {
        let s = self.reduced(t);
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }

    pub fn zeta_prime(&self, t: f64) -> f64 {
        let s = self.reduced(t);
        30.0 * s * s * (1.0 - s) * (1.0 - s) / (1.0 - 2.0 * self.delta0)
    }

    pub fn zeta_second(&self, t: f64) -> f64 {
        let s = self.reduced(t);
        let w = 1.0 - 2.0 * self.delta0;
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (w * w)
    }

    /// `z / max(delta0, |z|)`, the argument at which the unextended function
    /// is evaluated.
    pub fn radial_argument(&self, alg: &dyn AlgebraKernel, z: &[f64], out: &mut [f64]) -> f64 {
        let r = alg.norm(z);
        let d = r.max(self.delta0);
        for (o, v) in out.iter_mut().zip(z) {
            *o = v / d;
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnisotropyKind {
    /// `Phi(u) = sum_i lambda_i u_i^2`.
    QuadraticDiagonal(Vec<f64>),
    /// `Phi(u) = u^T Q u` with a symmetric row-major `m x m` table.
    CustomTable(Vec<f64>),
}

/// Anisotropy energy `Phi` and its C^2 extension to the closed ball.
#[derive(Clone)]
pub struct AnisotropySpec {
    kind: AnisotropyKind,
    cutoff: Cutoff,
    alg: Arc<dyn AlgebraKernel>,
    table: Vec<f64>,
}

impl fmt::Debug for AnisotropySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnisotropySpec")
            .field("kind", &self.kind)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl AnisotropySpec {
    pub fn new(alg: Arc<dyn AlgebraKernel>, kind: AnisotropyKind, cutoff: Cutoff) -> Result<Self> {
        let m = alg.dim();
        let table = match &kind {
            AnisotropyKind::QuadraticDiagonal(l) => {
                if l.len() != m {
                    return Err(Error::config(
                        "anisotropy.lambdas",
                        format!("expected {m} values, got {}", l.len()),
                    ));
                }
                let mut t = vec![0.0; m * m];
                for (i, &v) in l.iter().enumerate() {
                    t[i * m + i] = v;
                }
                t
            }
            AnisotropyKind::CustomTable(t) => {
                if t.len() != m * m {
                    return Err(Error::config(
                        "anisotropy.table",
                        format!("expected {} entries, got {}", m * m, t.len()),
                    ));
                }
                for a in 0..m {
                    for b in 0..a {
                        if t[a * m + b] != t[b * m + a] {
                            return Err(Error::config("anisotropy.table", "table must be symmetric"));
                        }
                    }
                }
                t.clone()
            }
        };
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("anisotropy", "coefficients must be finite"));
        }
        Ok(AnisotropySpec { kind, cutoff, alg, table })
    }

    pub fn kind(&self) -> &AnisotropyKind {
        &self.kind
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn algebra(&self) -> &Arc<dyn AlgebraKernel> {
        &self.alg
    }

    fn quad(&self, z: &[f64]) -> f64 {
        let m = self.alg.dim();
        let mut s = 0.0;
        for a in 0..m {
            let mut row = 0.0;
            for b in 0..m {
                row += self.table[a * m + b] * z[b];
            }
            s += z[a] * row;
        }
        s
    }

    /// The unextended energy `Phi(z)`.
    pub fn raw_value(&self, z: &[f64]) -> f64 {
        self.quad(z)
    }

    fn check(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.alg.dim() {
            return Err(Error::contract(format!(
                "anisotropy argument has dimension {}, algebra has {}",
                z.len(),
                self.alg.dim()
            )));
        }
        let s = self.alg.norm_sq(z);
        if !s.is_finite() || s.sqrt() > BALL_SLACK {
            return Err(Error::contract(format!(
                "anisotropy evaluated at |z| = {:.6} outside the unit ball",
                s.sqrt()
            )));
        }
        Ok(s)
    }

    /// The extended energy `zeta(|z|^2) Phi(z / max(delta0, |z|))`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let s = self.check(z)?;
        if s <= 2.0 * self.cutoff.delta0 {
            return Ok(0.0);
        }
        Ok(self.cutoff.zeta(s) * self.quad(z) / s)
    }

    /// Metric gradient of the extended energy.
    pub fn grad_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let s = self.check(z)?;
        let m = self.alg.dim();
        if s <= 2.0 * self.cutoff.delta0 {
            out[..m].fill(0.0);
            return Ok(());
        }
        let q = self.quad(z);
        let zeta = self.cutoff.zeta(s);
        let dzeta = if s < 1.0 { self.cutoff.zeta_prime(s) } else { 0.0 };
        // covector: dzeta * (2 G z) q / s + zeta (2 Q z / s - q (2 G z) / s^2)
        let metric = self.alg.metric();
        let mut stack = [0.0; SCRATCH];
        let mut heap = Vec::new();
        let cov = scratch(m, &mut stack, &mut heap);
        for a in 0..m {
            let mut gz = 0.0;
            let mut qz = 0.0;
            for b in 0..m {
                gz += metric[a * m + b] * z[b];
                qz += self.table[a * m + b] * z[b];
            }
            cov[a] = 2.0 * dzeta * gz * q / s + zeta * (2.0 * qz / s - 2.0 * q * gz / (s * s));
        }
        self.alg.raise_into(cov, out);
        Ok(())
    }

    /// Metric gradient of the unextended energy.
    pub fn raw_grad_into(&self, z: &[f64], out: &mut [f64]) {
        let m = self.alg.dim();
        let mut stack = [0.0; SCRATCH];
        let mut heap = Vec::new();
        let cov = scratch(m, &mut stack, &mut heap);
        for a in 0..m {
            cov[a] = 2.0 * (0..m).map(|b| self.table[a * m + b] * z[b]).sum::<f64>();
        }
        self.alg.raise_into(cov, out);
    }

    pub fn grad(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.alg.dim()];
        self.grad_into(z, &mut out)?;
        Ok(out)
    }

    /// Row-major Hessian of the metric gradient, by central differences.
    pub fn hessian_fd(&self, z: &[f64], h: f64) -> Result<Vec<f64>> {
        let m = self.alg.dim();
        let mut hess = vec![0.0; m * m];
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        let mut gp = vec![0.0; m];
        let mut gm = vec![0.0; m];
        for b in 0..m {
            zp[b] = z[b] + h;
            zm[b] = z[b] - h;
            self.grad_into(&zp, &mut gp)?;
            self.grad_into(&zm, &mut gm)?;
            for a in 0..m {
                hess[a * m + b] = (gp[a] - gm[a]) / (2.0 * h);
            }
            zp[b] = z[b];
            zm[b] = z[b];
        }
        Ok(hess)
    }

    /// Sampled `M1 = sup |grad|` and `M2 = sup |Hessian|_F` over the unit ball.
    pub fn sample_sups(&self, samples: usize) -> (f64, f64) {
        let mut m1: f64 = 0.0;
        let mut m2: f64 = 0.0;
        let sampler = BallSampler::new(self.alg.as_ref());
        for z in sampler.take(samples) {
            let g = self.grad(&z).expect("sample lies in the ball");
            m1 = m1.max(self.alg.norm(&g));
            let h = self.hessian_fd(&z, 1e-5).expect("sample lies in the ball");
            m2 = m2.max(h.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        (m1, m2)
    }
}

const SCRATCH: usize = 16;

fn scratch<'a>(m: usize, stack: &'a mut [f64; SCRATCH], heap: &'a mut Vec<f64>) -> &'a mut [f64] {
    if m <= SCRATCH {
        &mut stack[..m]
    } else {
        heap.resize(m, 0.0);
        heap
    }
}

/// Raw forcing callback `F(x, t, z, out)`.
pub type ForcingFn = Arc<dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync>;

/// A tangent forcing with its ball extension and sampled bounds.
#[derive(Clone)]
pub struct ForcingSpec {
    name: String,
    raw: ForcingFn,
    cutoff: Cutoff,
    alg: Arc<dyn AlgebraKernel>,
    c1: f64,
    c2: f64,
}

impl fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingSpec")
            .field("name", &self.name)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish()
    }
}

/// Sampling region used when registering a forcing.
#[derive(Clone, Debug)]
pub struct ForcingRegion {
    pub lengths: Vec<f64>,
    pub t_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ForcingSpec {
    /// Samples the callback and rejects it if it is not tangent.
    /// Records `C2 = sup |F~|` and a bound `C1` on its x- and z-derivatives.
    pub fn register(
        name: impl Into<String>,
        alg: Arc<dyn AlgebraKernel>,
        raw: ForcingFn,
        cutoff: Cutoff,
        region: &ForcingRegion,
    ) -> Result<Self> {
        let name = name.into();
        let mut spec = ForcingSpec { name: name.clone(), raw, cutoff, alg, c1: 0.0, c2: 0.0 };
        let m = spec.alg.dim();
        let n = region.lengths.len();
        let mut rng = ChaCha8Rng::seed_from_u64(region.seed);
        let sampler = BallSampler::new(spec.alg.as_ref());
        let mut f = vec![0.0; m];
        let mut fp = vec![0.0; m];
        let mut fm = vec![0.0; m];
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        let h = 1e-5;
        for z in sampler.take(region.samples) {
            let x: Vec<f64> = region.lengths.iter().map(|&l| rng.gen::<f64>() * l).collect();
            let t = rng.gen::<f64>() * region.t_max;
            (spec.raw)(&x, t, &z, &mut f);
            let fz = spec.alg.inner(&f, &z);
            let scale = spec.alg.norm(&f) * spec.alg.norm(&z);
            if fz.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) && fz.abs() > 1e-300 {
                return Err(Error::config(
                    "forcing",
                    format!("`{name}` is not tangent: <F, z> = {fz:.3e} at t = {t}"),
                ));
            }
            spec.value_into(&x, t, &z, &mut f);
            c2 = c2.max(spec.alg.norm(&f));
            let mut xp = x.clone();
            let mut xm = x.clone();
            for p in 0..n {
                xp[p] += h;
                xm[p] -= h;
                spec.value_into(&xp, t, &z, &mut fp);
                spec.value_into(&xm, t, &z, &mut fm);
                let d: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                c1 = c1.max(spec.alg.norm(&d));
                xp[p] = x[p];
                xm[p] = x[p];
            }
            let mut zp = z.clone();
            let mut zm = z.clone();
            let mut frob = 0.0;
            for b in 0..m {
                zp[b] += h;
                zm[b] -= h;
                spec.value_into(&x, t, &zp, &mut fp);
                spec.value_into(&x, t, &zm, &mut fm);
                frob += fp.iter().zip(&fm).map(|(a, c)| ((a - c) / (2.0 * h)).powi(2)).sum::<f64>();
                zp[b] = z[b];
                zm[b] = z[b];
            }
            // |grad J(u)| <= 2 |grad u|
            c1 = c1.max(2.0 * frob.sqrt());
        }
        spec.c1 = c1;
        spec.c2 = c2;
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// `F~(x, t, z) = zeta(|z|^2) F(x, t, z / max(delta0, |z|))`.
    pub fn value_into(&self, x: &[f64], t: f64, z: &[f64], out: &mut [f64]) {
        let m = self.alg.dim();
        let s = self.alg.norm_sq(z);
        if s <= 2.0 * self.cutoff.delta0 {
            out[..m].fill(0.0);
            return;
        }
        let mut stack = [0.0; SCRATCH];
        let mut heap = Vec::new();
        let arg = scratch(m, &mut stack, &mut heap);
        self.cutoff.radial_argument(self.alg.as_ref(), z, arg);
        (self.raw)(x, t, arg, out);
        let zeta = self.cutoff.zeta(s);
        for v in out[..m].iter_mut() {
            *v *= zeta;
        }
    }

    pub fn value(&self, x: &[f64], t: f64, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.alg.dim()];
        self.value_into(x, t, z, &mut out);
        out
    }

    /// `F(x, t, z) = [a, z]`.
    pub fn bracket_callback(alg: Arc<dyn AlgebraKernel>, a: Vec<f64>) -> ForcingFn {
        Arc::new(move |_x, _t, z, out| alg.bracket_into(&a, z, out))
    }

    /// `F(x, t, z) = cos(k.x - omega t) [a, z]`.
    pub fn bracket_wave_callback(
        alg: Arc<dyn AlgebraKernel>,
        a: Vec<f64>,
        k: Vec<f64>,
        omega: f64,
    ) -> ForcingFn {
        Arc::new(move |x, t, z, out| {
            let phase: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() - omega * t;
            alg.bracket_into(&a, z, out);
            let c = phase.cos();
            for v in out.iter_mut() {
                *v *= c;
            }
        })
    }
}

/// Deterministic quasi-random points in the metric unit ball (Halton sequence
/// with rejection).
pub struct BallSampler {
    dim: usize,
    radius: f64,
    metric: Vec<f64>,
    index: u64,
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

impl BallSampler {
    pub fn new(alg: &dyn AlgebraKernel) -> Self {
        let m = alg.dim();
        assert!(m <= PRIMES.len(), "ball sampler supports dimension up to {}", PRIMES.len());
        let g = nalgebra::DMatrix::from_row_slice(m, m, alg.metric());
        let min_eig = nalgebra::SymmetricEigen::new(g)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v));
        BallSampler {
            dim: m,
            radius: 1.0 / min_eig.sqrt(),
            metric: alg.metric().to_vec(),
            index: 1,
        }
    }

    fn norm_sq(&self, z: &[f64]) -> f64 {
        let m = self.dim;
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                s += z[a] * self.metric[a * m + b] * z[b];
            }
        }
        s
    }
}

impl Iterator for BallSampler {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        loop {
            let i = self.index;
            self.index += 1;
            let z: Vec<f64> = (0..self.dim)
                .map(|d| (2.0 * radical_inverse(i, PRIMES[d]) - 1.0) * self.radius)
                .collect();
            if self.norm_sq(&z) <= 1.0 {
                return Some(z);
            }
        }
    }
}

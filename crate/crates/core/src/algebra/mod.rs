//! Finite-dimensional compact Lie algebras.
//!
//! An algebra is given by structure constants `c[i][j][k]` with
//! `[e_i, e_j] = sum_k c[i][j][k] e_k`. The inner product is a positive
//! multiple of the negated Killing form, which makes it Ad-invariant:
//! `<[X, Y], Z> + <Y, [X, Z]> = 0`. Every bracket term in the flow is
//! orthogonal to the field because of this identity.
//!
//! Hot loops go through the [`AlgebraKernel`] trait on raw coordinate slices.
//! [`LieAlgebra`] is the structure-constant implementation; [`CrossProduct`]
//! is a hand-coded `R^3` model used to cross-check the so(3) path.

mod anisotropy;
mod builtin;
mod parse;

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub use anisotropy::{
    AnisotropyKind, AnisotropySpec, BallSampler, Cutoff, ForcingFn, ForcingRegion, ForcingSpec, BALL_SLACK,
};
pub use builtin::{builtin, so3, so4, su2, BUILTIN_NAMES, SO4_PAIRS};
pub use parse::{load_algebra_file, parse_algebra_text};

/// Residual threshold for the algebra identities checked at construction.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Coordinate-level operations on an algebra with an invariant inner product.
pub trait AlgebraKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `out = [x, y]`. `out` is overwritten.
    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    fn inner(&self, x: &[f64], y: &[f64]) -> f64;

    /// Row-major `m x m` Gram matrix of the inner product.
    fn metric(&self) -> &[f64];

    /// Converts coordinate partial derivatives into the metric gradient.
    fn raise_into(&self, covector: &[f64], out: &mut [f64]);

    fn norm_sq(&self, x: &[f64]) -> f64 {
        self.inner(x, x)
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.norm_sq(x).max(0.0).sqrt()
    }

    fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bracket_into(x, y, &mut out);
        out
    }
}

/// Coordinates of an algebra element in the basis `{e_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement(pub Vec<f64>);

impl AlgebraElement {
    pub fn zeros(m: usize) -> Self {
        AlgebraElement(vec![0.0; m])
    }

    pub fn basis(m: usize, i: usize) -> Self {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        AlgebraElement(v)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        AlgebraElement(self.0.iter().map(|v| v * s).collect())
    }
}

impl From<Vec<f64>> for AlgebraElement {
    fn from(v: Vec<f64>) -> Self {
        AlgebraElement(v)
    }
}

/// A Lie algebra defined by structure constants, with the rescaled negated
/// Killing form as its inner product.
#[derive(Clone)]
pub struct LieAlgebra {
    name: String,
    dim: usize,
    /// Dense `c[(i * m + j) * m + k]`.
    constants: Vec<f64>,
    /// Nonzero `(i, j, k, c)` in `(k, i, j)` order; drives `bracket_into`.
    sparse: Vec<(usize, usize, usize, f64)>,
    metric: Vec<f64>,
    metric_inv: Vec<f64>,
    metric_scale: f64,
    identity_metric: bool,
}

impl fmt::Debug for LieAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LieAlgebra")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("metric_scale", &self.metric_scale)
            .finish()
    }
}

/// Outcome of [`validate_algebra`].
#[derive(Clone, Debug)]
pub struct AlgebraReport {
    pub name: String,
    pub dim: usize,
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
    /// Smallest eigenvalue of `-B`; positive for a compact semisimple algebra.
    pub min_neg_killing_eigenvalue: f64,
    /// Largest `|<[e_i, e_j], e_k> + <e_j, [e_i, e_k]>|` over basis triples,
    /// evaluated with the metric the algebra currently carries.
    pub ad_invariance_residual: f64,
    pub violations: Vec<String>,
}

impl AlgebraReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AlgebraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "algebra {} (dim {})", self.name, self.dim)?;
        writeln!(f, "  antisymmetry residual   {:.3e}", self.antisymmetry_residual)?;
        writeln!(f, "  Jacobi residual         {:.3e}", self.jacobi_residual)?;
        writeln!(f, "  min eig(-Killing)       {:.6e}", self.min_neg_killing_eigenvalue)?;
        writeln!(f, "  ad-invariance residual  {:.3e}", self.ad_invariance_residual)?;
        if self.violations.is_empty() {
            write!(f, "  status: pass")
        } else {
            write!(f, "  status: FAIL ({})", self.violations.join("; "))
        }
    }
}

impl LieAlgebra {
    /// Builds and validates an algebra from its nonzero structure constants
    /// (0-based indices). The metric scale defaults to `m / trace(-B)`, which
    /// makes the standard bases of so(3), su(2) and so(4) orthonormal.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let alg = Self::from_constants_unchecked(name, dim, entries)?;
        let report = validate_algebra(&alg);
        if !report.passed() {
            return Err(Error::Algebra(format!(
                "{}: {}",
                report.name,
                report.violations.join("; ")
            )));
        }
        Ok(alg)
    }

    /// Builds the algebra without rejecting identity failures. The metric is
    /// still derived from the Killing form when that form is definite, and
    /// falls back to the coordinate identity otherwise, so the returned
    /// value can be inspected with [`validate_algebra`].
    pub fn from_constants_unchecked(
        name: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("algebra dimension must be positive"));
        }
        let mut constants = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in entries {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::contract(format!(
                    "structure constant index ({i}, {j}, {k}) out of range for dim {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::contract("structure constants must be finite"));
            }
            constants[(i * dim + j) * dim + k] = v;
        }
        let mut alg = LieAlgebra {
            name: name.into(),
            dim,
            constants,
            sparse: Vec::new(),
            metric: identity(dim),
            metric_inv: identity(dim),
            metric_scale: 1.0,
            identity_metric: true,
        };
        alg.rebuild_sparse();
        let neg_killing = alg.killing_matrix().map(|v| -v);
        let trace: f64 = (0..dim).map(|a| neg_killing[(a, a)]).sum();
        if trace > 0.0 && min_eigenvalue(&neg_killing) > 0.0 {
            alg.set_metric(neg_killing, dim as f64 / trace)?;
        }
        Ok(alg)
    }

    fn rebuild_sparse(&mut self) {
        let m = self.dim;
        self.sparse.clear();
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let c = self.constants[(i * m + j) * m + k];
                    if c != 0.0 {
                        self.sparse.push((i, j, k, c));
                    }
                }
            }
        }
    }

    fn set_metric(&mut self, neg_killing: DMatrix<f64>, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::contract("metric scale must be positive and finite"));
        }
        let m = self.dim;
        let g = neg_killing * scale;
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Algebra(format!("{}: metric is singular", self.name)))?;
        let mut identity_metric = true;
        for a in 0..m {
            for b in 0..m {
                let target = if a == b { 1.0 } else { 0.0 };
                if (g[(a, b)] - target).abs() > 1e-14 {
                    identity_metric = false;
                }
            }
        }
        if identity_metric {
            self.metric = identity(m);
            self.metric_inv = identity(m);
        } else {
            self.metric = row_major(&g);
            self.metric_inv = row_major(&inv);
        }
        self.identity_metric = identity_metric;
        self.metric_scale = scale;
        Ok(())
    }

    /// Replaces the metric by `scale * (-B)`.
    pub fn with_metric_scale(mut self, scale: f64) -> Result<Self> {
        let neg_killing = self.killing_matrix().map(|v| -v);
        if min_eigenvalue(&neg_killing) <= 0.0 {
            return Err(Error::Algebra(format!(
                "{}: Killing form is not negative definite",
                self.name
            )));
        }
        self.set_metric(neg_killing, scale)?;
        Ok(self)
    }

    pub fn metric_scale(&self) -> f64 {
        self.metric_scale
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim + j) * self.dim + k]
    }

    /// Nonzero structure constants, 0-based.
    pub fn nonzero_constants(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = self.sparse.clone();
        out.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        out
    }

    /// Overwrites one structure constant while keeping the metric. Used to
    /// inject faults in self-checks; the result is generally not a Lie algebra.
    pub fn with_constant_overridden(&self, i: usize, j: usize, k: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.constants[(i * self.dim + j) * self.dim + k] = value;
        out.rebuild_sparse();
        out
    }

    /// Matrix of `ad x`: `(ad x)[k][j] = sum_i x_i c[i][j][k]`.
    pub fn ad_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.dim;
        let mut ad = DMatrix::zeros(m, m);
        for i in 0..m {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                for k in 0..m {
                    ad[(k, j)] += x[i] * self.constants[(i * m + j) * m + k];
                }
            }
        }
        ad
    }

    /// `B[a][b] = trace(ad e_a ad e_b) = sum_{j,k} c[a][j][k] c[b][k][j]`.
    pub fn killing_matrix(&self) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |a, b| {
            let mut s = 0.0;
            for j in 0..m {
                for k in 0..m {
                    s += self.constants[(a * m + j) * m + k] * self.constants[(b * m + k) * m + j];
                }
            }
            s
        })
    }

    fn check_dims(&self, xs: &[&AlgebraElement]) -> Result<()> {
        for x in xs {
            if x.dim() != self.dim {
                return Err(Error::contract(format!(
                    "element of dimension {} used with {}-dimensional algebra {}",
                    x.dim(),
                    self.dim,
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn bracket_elems(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_dims(&[x, y])?;
        Ok(AlgebraElement(self.bracket(&x.0, &y.0)))
    }

    /// `B(x, y) = trace(ad x . ad y)`.
    pub fn killing_form(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
        self.check_dims(&[x, y])?;
        let ax = self.ad_matrix(&x.0);
        let ay = self.ad_matrix(&y.0);
        Ok((ax * ay).trace())
    }

    pub fn inner_elems(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
        self.check_dims(&[x, y])?;
        Ok(self.inner(&x.0, &y.0))
    }

    pub fn project_ball_elem(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_dims(&[x])?;
        let mut out = x.0.clone();
        project_ball(self, &mut out);
        Ok(AlgebraElement(out))
    }
}

impl AlgebraKernel for LieAlgebra {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[..self.dim].fill(0.0);
        for &(i, j, k, c) in &self.sparse {
            out[k] += x[i] * y[j] * c;
        }
    }

    #[inline]
    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.dim;
        if self.identity_metric {
            let mut s = 0.0;
            for a in 0..m {
                s += x[a] * y[a];
            }
            return s;
        }
        let mut s = 0.0;
        for a in 0..m {
            let mut row = 0.0;
            for b in 0..m {
                row += self.metric[a * m + b] * y[b];
            }
            s += x[a] * row;
        }
        s
    }

    fn metric(&self) -> &[f64] {
        &self.metric
    }

    fn raise_into(&self, covector: &[f64], out: &mut [f64]) {
        let m = self.dim;
        if self.identity_metric {
            out[..m].copy_from_slice(&covector[..m]);
            return;
        }
        for a in 0..m {
            let mut s = 0.0;
            for b in 0..m {
                s += self.metric_inv[a * m + b] * covector[b];
            }
            out[a] = s;
        }
    }
}

/// `R^3` with the cross product and the Euclidean inner product, written out
/// by hand. Agrees with `so3()` coordinate for coordinate.
#[derive(Clone, Debug, Default)]
pub struct CrossProduct;

const IDENTITY3: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

impl AlgebraKernel for CrossProduct {
    fn name(&self) -> &str {
        "cross"
    }

    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = x[1] * y[2] - x[2] * y[1];
        out[1] = x[2] * y[0] - x[0] * y[2];
        out[2] = x[0] * y[1] - x[1] * y[0];
    }

    #[inline]
    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
    }

    fn metric(&self) -> &[f64] {
        &IDENTITY3
    }

    fn raise_into(&self, covector: &[f64], out: &mut [f64]) {
        out[..3].copy_from_slice(&covector[..3]);
    }
}

/// In-place ball projection `x / max(|x|, 1)`.
#[inline]
pub fn project_ball(alg: &dyn AlgebraKernel, x: &mut [f64]) {
    let n = alg.norm(x);
    if n > 1.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Checks antisymmetry, the Jacobi identity, definiteness of the Killing form
/// and ad-invariance of the current metric.
pub fn validate_algebra(alg: &LieAlgebra) -> AlgebraReport {
    let m = alg.dim;
    let c = |i: usize, j: usize, k: usize| alg.constants[(i * m + j) * m + k];

    let mut antisym: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                antisym = antisym.max((c(i, j, k) + c(j, i, k)).abs());
            }
        }
    }

    let mut jacobi: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for p in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += c(i, j, l) * c(l, k, p) + c(j, k, l) * c(l, i, p) + c(k, i, l) * c(l, j, p);
                    }
                    jacobi = jacobi.max(s.abs());
                }
            }
        }
    }

    let neg_killing = alg.killing_matrix().map(|v| -v);
    let min_eig = min_eigenvalue(&neg_killing);

    let mut ad_inv: f64 = 0.0;
    let mut bij = vec![0.0; m];
    let mut bik = vec![0.0; m];
    for i in 0..m {
        let ei = unit(m, i);
        for j in 0..m {
            let ej = unit(m, j);
            alg.bracket_into(&ei, &ej, &mut bij);
            for k in 0..m {
                let ek = unit(m, k);
                alg.bracket_into(&ei, &ek, &mut bik);
                let r = alg.inner(&bij, &ek) + alg.inner(&ej, &bik);
                ad_inv = ad_inv.max(r.abs());
            }
        }
    }

    let scale = neg_killing.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut violations = Vec::new();
    if antisym >= IDENTITY_TOLERANCE {
        violations.push(format!("antisymmetry residual {antisym:.3e}"));
    }
    if jacobi >= IDENTITY_TOLERANCE {
        violations.push(format!("Jacobi residual {jacobi:.3e}"));
    }
    if !(min_eig > IDENTITY_TOLERANCE * scale) {
        violations.push(format!(
            "Killing form not negative definite (min eigenvalue of -B = {min_eig:.3e})"
        ));
    }
    if ad_inv >= IDENTITY_TOLERANCE {
        violations.push(format!("ad-invariance residual {ad_inv:.3e}"));
    }
    AlgebraReport {
        name: alg.name.clone(),
        dim: m,
        antisymmetry_residual: antisym,
        jacobi_residual: jacobi,
        min_neg_killing_eigenvalue: min_eig,
        ad_invariance_residual: ad_inv,
        violations,
    }
}

/// Resolves a name (`so3`, `su2`, `so4`, `cross`) or a path to an algebra file.
pub fn resolve_algebra(spec: &str) -> Result<std::sync::Arc<dyn AlgebraKernel>> {
    if spec == "cross" {
        return Ok(std::sync::Arc::new(CrossProduct));
    }
    if let Some(alg) = builtin(spec) {
        return Ok(std::sync::Arc::new(alg));
    }
    let path = std::path::Path::new(spec);
    if path.exists() {
        return Ok(std::sync::Arc::new(load_algebra_file(path)?));
    }
    Err(Error::config(
        "algebra",
        format!("`{spec}` is neither a built-in ({}) nor a readable file", BUILTIN_NAMES.join(", ")),
    ))
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for a in 0..m {
        v[a * m + a] = 1.0;
    }
    v
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

fn row_major(mat: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = mat.shape();
    let mut v = Vec::with_capacity(r * c);
    for a in 0..r {
        for b in 0..c {
            v.push(mat[(a, b)]);
        }
    }
    v
}

fn min_eigenvalue(mat: &DMatrix<f64>) -> f64 {
    let sym = (mat + mat.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_elem(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
        (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn so3_bracket_of_unit_axes() {
        let a = so3();
        let e1 = AlgebraElement::basis(3, 0);
        let e2 = AlgebraElement::basis(3, 1);
        assert_eq!(a.bracket_elems(&e1, &e2).unwrap(), AlgebraElement::basis(3, 2));
    }

    #[test]
    fn bracket_with_itself_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alg in [so3(), su2(), so4()] {
            let x = random_elem(&mut rng, alg.dim());
            assert!(alg.bracket(&x, &x).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn dimension_mismatch_is_a_contract_violation() {
        let a = so3();
        let x = AlgebraElement::zeros(3);
        let y = AlgebraElement::zeros(6);
        assert!(matches!(a.bracket_elems(&x, &y), Err(Error::Contract(_))));
        assert!(matches!(a.killing_form(&x, &y), Err(Error::Contract(_))));
    }

    #[test]
    fn so3_killing_form_values() {
        // ad e1 is the rotation generator with entries -1, +1 off the diagonal;
        // its square has trace -2.
        let a = so3();
        let e1 = AlgebraElement::basis(3, 0);
        let e2 = AlgebraElement::basis(3, 1);
        let ad1 = a.ad_matrix(&e1.0);
        let oracle = (&ad1 * &ad1).trace();
        assert_eq!(oracle, -2.0);
        assert_eq!(a.killing_form(&e1, &e1).unwrap(), -2.0);
        assert_eq!(a.killing_form(&e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn killing_form_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for alg in [so3(), so4()] {
            for _ in 0..100 {
                let x = AlgebraElement(random_elem(&mut rng, alg.dim()));
                let y = AlgebraElement(random_elem(&mut rng, alg.dim()));
                let bxy = alg.killing_form(&x, &y).unwrap();
                let byx = alg.killing_form(&y, &x).unwrap();
                assert!((bxy - byx).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn so3_metric_scale_half_is_orthonormal() {
        let a = so3();
        assert_eq!(a.metric_scale(), 0.5);
        for i in 0..3 {
            for j in 0..3 {
                let v = a.inner(&unit(3, i), &unit(3, j));
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        // -B / 2 from the Killing oracle
        let b = a.killing_matrix();
        assert_eq!(b[(0, 0)] * -0.5, 1.0);
    }

    #[test]
    fn tangency_of_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for alg in [so3(), su2(), so4()] {
            for _ in 0..100 {
                let x = random_elem(&mut rng, alg.dim());
                let z = random_elem(&mut rng, alg.dim());
                let xz = alg.bracket(&x, &z);
                assert!(alg.inner(&x, &xz).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_has_zero_norm() {
        let a = so4();
        assert_eq!(a.norm_sq(&[0.0; 6]), 0.0);
    }

    #[test]
    fn project_ball_cases() {
        let a = so3();
        let mut inside = vec![0.3, 0.4, 0.0];
        project_ball(&a, &mut inside);
        assert_eq!(inside, vec![0.3, 0.4, 0.0]);
        let mut outside = vec![0.0, 1.2, 1.6];
        project_ball(&a, &mut outside);
        assert!((outside[1] - 0.6).abs() < 1e-15 && (outside[2] - 0.8).abs() < 1e-15);
        let mut again = outside.clone();
        project_ball(&a, &mut again);
        assert_eq!(again, outside);
    }

    #[test]
    fn validate_builtin_and_faulty_tables() {
        // Oracle: Levi-Civita constants satisfy every identity exactly.
        let report = validate_algebra(&so3());
        assert!(report.passed(), "{report}");
        assert_eq!(report.antisymmetry_residual, 0.0);
        assert_eq!(report.jacobi_residual, 0.0);

        let broken = so3().with_constant_overridden(0, 1, 2, -1.0);
        let report = validate_algebra(&broken);
        assert!(!report.passed());
        assert!(report.antisymmetry_residual > 1.0);

        let abelian = LieAlgebra::from_constants_unchecked("abelian", 3, &[]).unwrap();
        let report = validate_algebra(&abelian);
        assert!(report.violations.iter().any(|v| v.contains("Killing")));
        assert!(LieAlgebra::new("abelian", 3, &[]).is_err());
    }

    #[test]
    fn cross_product_matches_so3_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = so3();
        let c = CrossProduct;
        for _ in 0..200 {
            let x = random_elem(&mut rng, 3);
            let y = random_elem(&mut rng, 3);
            assert_eq!(a.bracket(&x, &y), c.bracket(&x, &y));
            assert_eq!(a.inner(&x, &y), c.inner(&x, &y));
        }
    }

    #[test]
    fn rescaled_metric_stays_invariant() {
        let a = so4().with_metric_scale(0.9).unwrap();
        let report = validate_algebra(&a);
        assert!(report.passed(), "{report}");
        let mut g = vec![0.0; 6];
        a.raise_into(&[0.9, 0.0, 0.0, 0.0, 0.0, 0.0], &mut g);
        assert!((g[0] - 0.25).abs() < 1e-14, "{g:?}");
    }

    use proptest::prelude::*;

    fn algebra(k: usize) -> LieAlgebra {
        [so3(), su2(), so4()][k].clone()
    }

    fn elem(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0..3.0f64, m)
    }

    proptest! {
        #[test]
        fn ad_invariance_holds(k in 0usize..3, seed in any::<u64>()) {
            let a = algebra(k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, z) = (random_elem(&mut rng, a.dim()), random_elem(&mut rng, a.dim()), random_elem(&mut rng, a.dim()));
            let r = a.inner(&a.bracket(&x, &y), &z) + a.inner(&y, &a.bracket(&x, &z));
            prop_assert!(r.abs() <= 1e-12 * a.norm(&x) * a.norm(&y) * a.norm(&z));
        }

        #[test]
        fn bracket_is_bilinear(x in elem(6), y in elem(6), z in elem(6), s in -2.0..2.0f64, t in -2.0..2.0f64) {
            let a = so4();
            let lhs = a.bracket(&x.iter().zip(&y).map(|(p, q)| s * p + t * q).collect::<Vec<_>>(), &z);
            let (bx, by) = (a.bracket(&x, &z), a.bracket(&y, &z));
            for k in 0..6 {
                prop_assert!((lhs[k] - (s * bx[k] + t * by[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn project_ball_is_one_lipschitz(k in 0usize..3, x in elem(6), y in elem(6)) {
            let a = algebra(k);
            let m = a.dim();
            let (mut px, mut py) = (x[..m].to_vec(), y[..m].to_vec());
            project_ball(&a, &mut px);
            project_ball(&a, &mut py);
            prop_assert!(a.norm(&px) <= 1.0 + 1e-15);
            let d = |u: &[f64], v: &[f64]| a.norm(&u.iter().zip(v).map(|(p, q)| p - q).collect::<Vec<_>>());
            prop_assert!(d(&px, &py) <= d(&x[..m], &y[..m]) + 1e-12);
        }

        #[test]
        fn so3_bracket_is_the_cross_product(x in elem(3), y in elem(3)) {
            let b = so3().bracket(&x, &y);
            let c = [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]];
            prop_assert_eq!(b, c.to_vec());
        }
    }
}

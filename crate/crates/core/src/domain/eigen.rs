//! Lowest eigenpairs of the conservative stencil for `-div(f grad)` on a
//! periodic grid.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

/// Largest problem solved by dense diagonalization under [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    Auto,
    Dense,
    /// Chebyshev-filtered block subspace iteration.
    Iterative,
}

/// Symmetric sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.n)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Second-order conservative stencil with face coefficients
/// `f_{j+1/2} = (f_j + f_{j+1}) / 2` and periodic wrap. Symmetric by
/// construction.
pub fn assemble_weighted_operator(domain: &DomainSpec, f: &[f64]) -> Result<SparseSym> {
    if domain.kind() != DomainKind::FlatTorus {
        return Err(Error::contract("weighted operator requires a flat_torus domain"));
    }
    let g = domain.num_points();
    if f.len() != g {
        return Err(Error::contract(format!("coupling has {} values for {g} points", f.len())));
    }
    if let Some((p, v)) = f.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::config("coupling", format!("f = {v} at grid point {p}; f must be positive")));
    }
    let n = domain.space_dim();
    let strides = domain.strides();
    let mut row_ptr = Vec::with_capacity(g + 1);
    let mut cols = Vec::with_capacity(g * (2 * n + 1));
    let mut vals = Vec::with_capacity(g * (2 * n + 1));
    row_ptr.push(0);
    for p in 0..g {
        let idx = domain.multi_index(p);
        let mut diag = 0.0;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
        for a in 0..n {
            let na = domain.grid()[a];
            let h2 = domain.spacing(a).powi(2);
            let up = p - idx[a] * strides[a] + ((idx[a] + 1) % na) * strides[a];
            let dn = p - idx[a] * strides[a] + ((idx[a] + na - 1) % na) * strides[a];
            let f_up = (f[p] + f[up]) / 2.0;
            let f_dn = (f[dn] + f[p]) / 2.0;
            diag += (f_up + f_dn) / h2;
            entries.push((up, -f_up / h2));
            entries.push((dn, -f_dn / h2));
        }
        entries.push((p, diag));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            if cols.len() > row_ptr[p] && *cols.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseSym { n: g, row_ptr, cols, vals })
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit vectors in the plain Euclidean norm.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Lowest `count` eigenpairs of `op`. Convergence requires every residual
/// `|M v - lambda v|` to be at most `tol` times the operator norm bound.
pub fn weighted_eigenpairs(
    op: &SparseSym,
    count: usize,
    tol: f64,
    method: EigenMethod,
) -> Result<EigenPairs> {
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Iterative => false,
        EigenMethod::Auto => op.dim() <= DENSE_LIMIT,
    };
    let pairs = if dense { dense_pairs(op, count) } else { subspace_pairs(op, count, tol)? };
    let bound = op.norm_bound().max(1.0);
    let worst = pairs.residuals.iter().cloned().fold(0.0, f64::max);
    if worst > tol * bound {
        return Err(Error::Eigen { residual: worst / bound, tolerance: tol });
    }
    Ok(pairs)
}

fn residual(op: &SparseSym, v: &[f64], lambda: f64, work: &mut [f64]) -> f64 {
    op.apply(v, work);
    work.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
}

fn dense_pairs(op: &SparseSym, count: usize) -> EigenPairs {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut work = vec![0.0; op.dim()];
    let mut out = EigenPairs { values: vec![], vectors: vec![], residuals: vec![] };
    for &k in order.iter().take(count) {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
        let lam = eig.eigenvalues[k];
        out.residuals.push(residual(op, &v, lam, &mut work));
        out.values.push(lam);
        out.vectors.push(v);
    }
    out
}

fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let q = x.qr().q();
    q.columns(0, k).into_owned()
}

fn apply_block(op: &SparseSym, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    let mut buf = vec![0.0; x.nrows()];
    for c in 0..x.ncols() {
        let col: Vec<f64> = x.column(c).iter().cloned().collect();
        op.apply(&col, &mut buf);
        y.column_mut(c).copy_from_slice(&buf);
    }
    y
}

/// Chebyshev-filtered subspace iteration. A block method resolves
/// degenerate and nearly degenerate clusters, which single-vector Lanczos
/// does not without reorthogonalization and restarts.
fn subspace_pairs(op: &SparseSym, count: usize, tol: f64) -> Result<EigenPairs> {
    let n = op.dim();
    let k = (count + count.max(8)).min(n);
    let upper = op.norm_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = orthonormalize(DMatrix::from_fn(n, k, |_, _| rng.gen::<f64>() - 0.5));
    let degree = 24;
    let mut work = vec![0.0; n];
    let mut worst = f64::INFINITY;
    for _ in 0..2000 {
        // Rayleigh-Ritz
        let mx = apply_block(op, &x);
        let h = x.transpose() * &mx;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let v = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = &x * v;
        let mut res = Vec::with_capacity(count);
        for c in 0..count {
            let col: Vec<f64> = x.column(c).iter().cloned().collect();
            res.push(residual(op, &col, theta[c], &mut work));
        }
        worst = res.iter().cloned().fold(0.0, f64::max);
        if worst <= tol * upper.max(1.0) {
            return Ok(EigenPairs {
                values: theta[..count].to_vec(),
                vectors: (0..count).map(|c| x.column(c).iter().cloned().collect()).collect(),
                residuals: res,
            });
        }
        // damp [a, upper], keep everything below a
        let a = theta[k - 1];
        let low = theta[0];
        let e = (upper - a) / 2.0;
        let c = (upper + a) / 2.0;
        let mut sigma = e / (low - c);
        let sigma1 = sigma;
        let mut prev = x.clone();
        let mut cur = (apply_block(op, &x) - &x * c) * (sigma1 / e);
        for _ in 1..degree {
            let sigma2 = 1.0 / (2.0 / sigma1 - sigma);
            let next = (apply_block(op, &cur) - &cur * c) * (2.0 * sigma2 / e) - &prev * (sigma * sigma2);
            prev = cur;
            cur = next;
            sigma = sigma2;
        }
        x = orthonormalize(cur);
    }
    Err(Error::Eigen { residual: worst / upper.max(1.0), tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn coupling(d: &DomainSpec) -> Vec<f64> {
        d.points().iter().map(|x| 2.0 + x[0].sin()).collect()
    }

    #[test]
    fn stencil_is_exactly_symmetric() {
        let d = DomainSpec::torus(&[2.0 * PI, 1.0], &[12, 8]).unwrap();
        let f: Vec<f64> = d.points().iter().map(|x| 2.0 + x[0].sin() * (x[1] * 3.0).cos()).collect();
        let m = assemble_weighted_operator(&d, &f).unwrap().to_dense();
        assert_eq!((&m - m.transpose()).amax(), 0.0);
        // constants are annihilated
        let ones = nalgebra::DVector::from_element(96, 1.0);
        assert!((m * ones).amax() < 1e-12);
    }

    #[test]
    fn iterative_matches_dense_1d() {
        let d = DomainSpec::torus(&[2.0 * PI], &[256]).unwrap();
        let op = assemble_weighted_operator(&d, &coupling(&d)).unwrap();
        let dense = weighted_eigenpairs(&op, 8, 1e-13, EigenMethod::Dense).unwrap();
        let iter = weighted_eigenpairs(&op, 8, 1e-13, EigenMethod::Iterative).unwrap();
        for i in 0..8 {
            assert!((dense.values[i] - iter.values[i]).abs() < 1e-9, "{i}");
        }
        assert!(dense.values[0].abs() < 1e-10);
    }

    #[test]
    fn iterative_handles_degenerate_clusters() {
        let d = DomainSpec::torus(&[2.0 * PI, 2.0 * PI], &[24, 24]).unwrap();
        let op = assemble_weighted_operator(&d, &vec![1.0; 576]).unwrap();
        let dense = weighted_eigenpairs(&op, 9, 1e-13, EigenMethod::Dense).unwrap();
        let iter = weighted_eigenpairs(&op, 9, 1e-13, EigenMethod::Iterative).unwrap();
        for i in 0..9 {
            assert!((dense.values[i] - iter.values[i]).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn nonpositive_coupling_rejected() {
        let d = DomainSpec::torus(&[1.0], &[8]).unwrap();
        let mut f = vec![1.0; 8];
        f[3] = -0.1;
        assert!(matches!(assemble_weighted_operator(&d, &f), Err(Error::Config { .. })));
    }

    #[test]
    fn unreachable_tolerance_reports_residual() {
        let d = DomainSpec::torus(&[2.0 * PI], &[64]).unwrap();
        let op = assemble_weighted_operator(&d, &coupling(&d)).unwrap();
        match weighted_eigenpairs(&op, 4, 0.0, EigenMethod::Dense) {
            Err(Error::Eigen { residual, .. }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::eigen::{assemble_weighted_operator, weighted_eigenpairs, EigenMethod, SparseSym};
use super::ops::DiffOps;
use super::{DomainKind, DomainSpec, Field};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    /// Tensor cosine modes of the Neumann Laplacian on a box.
    Cosine,
    /// Real Fourier tensor modes of the Laplacian on a torus.
    Fourier,
    /// Numerical eigenvectors of the conservative stencil for `-div(f grad)`.
    Weighted,
}

/// The lowest `N` eigenpairs of the spatial operator, sampled on the grid and
/// orthonormal under the grid quadrature.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    domain: DomainSpec,
    kind: BasisKind,
    eigenvalues: Vec<f64>,
    /// Mode-major `N x G`.
    modes: Vec<f64>,
    weight: Option<Vec<f64>>,
    labels: Vec<Vec<i64>>,
    residuals: Vec<f64>,
    operator: Option<Arc<SparseSym>>,
    ops: Arc<DiffOps>,
}

/// Per-axis 1D mode: label, eigenvalue and values at the grid points.
fn axis_mode(domain: &DomainSpec, axis: usize, label: i64) -> (f64, Vec<f64>) {
    let n = domain.grid()[axis];
    let l = domain.lengths()[axis];
    let norm0 = 1.0 / l.sqrt();
    let norm = (2.0 / l).sqrt();
    match domain.kind() {
        DomainKind::NeumannBox => {
            let k = label as f64 * PI / l;
            let vals = (0..n)
                .map(|j| {
                    let x = domain.coord(axis, j);
                    if label == 0 {
                        norm0
                    } else {
                        norm * (k * x).cos()
                    }
                })
                .collect();
            (k * k, vals)
        }
        DomainKind::FlatTorus => {
            let k = 2.0 * PI * label.unsigned_abs() as f64 / l;
            let vals = (0..n)
                .map(|j| {
                    let x = domain.coord(axis, j);
                    match label.signum() {
                        0 => norm0,
                        1 => norm * (k * x).cos(),
                        _ => norm * (k * x).sin(),
                    }
                })
                .collect();
            (k * k, vals)
        }
    }
}

/// Sort key making `0, cos 1, sin 1, cos 2, ...` increasing.
fn label_key(label: i64) -> i64 {
    match label.signum() {
        0 => 0,
        1 => 2 * label - 1,
        _ => -2 * label,
    }
}

fn representable(domain: &DomainSpec, labels: &[i64]) -> bool {
    labels.iter().zip(domain.grid()).all(|(&k, &n)| match domain.kind() {
        DomainKind::NeumannBox => (k as usize) < n,
        DomainKind::FlatTorus => 2 * k.unsigned_abs() < n as u64,
    })
}

impl ModeBasis {
    /// Lowest `count` tensor cosine modes on a Neumann box, ordered by
    /// eigenvalue and then by multi-index.
    pub fn neumann(domain: &DomainSpec, count: usize) -> Result<Self> {
        if domain.kind() != DomainKind::NeumannBox {
            return Err(Error::contract("cosine basis requires a neumann_box domain"));
        }
        Self::analytic(domain, count, BasisKind::Cosine)
    }

    /// Lowest `count` real Fourier modes on a flat torus (`f = 1`).
    pub fn fourier(domain: &DomainSpec, count: usize) -> Result<Self> {
        if domain.kind() != DomainKind::FlatTorus {
            return Err(Error::contract("Fourier basis requires a flat_torus domain"));
        }
        Self::analytic(domain, count, BasisKind::Fourier)
    }

    fn analytic(domain: &DomainSpec, count: usize, kind: BasisKind) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("N", "mode count must be positive"));
        }
        let n = domain.space_dim();
        // One past the representable range on each axis, so that a truncation
        // hitting an unrepresentable mode is detected.
        let ranges: Vec<Vec<i64>> = domain
            .grid()
            .iter()
            .map(|&g| match kind {
                BasisKind::Cosine => (0..=g as i64).collect(),
                _ => {
                    let h = (g / 2) as i64;
                    (-h..=h).collect()
                }
            })
            .collect();
        let total: usize = ranges.iter().map(|r| r.len()).product();
        let mut cands: Vec<(f64, Vec<i64>)> = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut labels = vec![0i64; n];
            for a in (0..n).rev() {
                labels[a] = ranges[a][rem % ranges[a].len()];
                rem /= ranges[a].len();
            }
            let lam: f64 = (0..n)
                .map(|a| {
                    let l = domain.lengths()[a];
                    let k = labels[a].unsigned_abs() as f64;
                    match kind {
                        BasisKind::Cosine => (k * PI / l).powi(2),
                        _ => (2.0 * PI * k / l).powi(2),
                    }
                })
                .sum();
            cands.push((lam, labels));
        }
        cands.sort_by(|x, y| {
            x.0.partial_cmp(&y.0).unwrap().then_with(|| {
                let kx: Vec<i64> = x.1.iter().map(|&l| label_key(l)).collect();
                let ky: Vec<i64> = y.1.iter().map(|&l| label_key(l)).collect();
                kx.cmp(&ky)
            })
        });
        if count > cands.len() {
            return Err(Error::config("N", format!("{count} modes exceed the grid capacity")));
        }
        let chosen = &cands[..count];
        if let Some((_, bad)) = chosen.iter().find(|(_, l)| !representable(domain, l)) {
            return Err(Error::config(
                "N",
                format!(
                    "{count} modes need wavenumbers {bad:?}, which grid {:?} cannot resolve",
                    domain.grid()
                ),
            ));
        }
        let g = domain.num_points();
        let strides = domain.strides();
        let mut modes = vec![0.0; count * g];
        let mut eigenvalues = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for (i, (_, lab)) in chosen.iter().enumerate() {
            let axes: Vec<(f64, Vec<f64>)> =
                (0..n).map(|a| axis_mode(domain, a, lab[a])).collect();
            eigenvalues.push(axes.iter().map(|(l, _)| l).sum());
            let row = &mut modes[i * g..(i + 1) * g];
            for (p, v) in row.iter_mut().enumerate() {
                let mut val = 1.0;
                for a in 0..n {
                    let j = (p / strides[a]) % domain.grid()[a];
                    val *= axes[a].1[j];
                }
                *v = val;
            }
            labels.push(lab.clone());
        }
        Ok(ModeBasis {
            domain: domain.clone(),
            kind,
            eigenvalues,
            modes,
            weight: None,
            labels,
            residuals: vec![0.0; count],
            operator: None,
            ops: Arc::new(DiffOps::new(domain)?),
        })
    }

    /// Lowest `count` eigenpairs of `-div(f grad)` on a flat torus.
    /// `tol` bounds the residual relative to the operator norm estimate.
    pub fn weighted(
        domain: &DomainSpec,
        f: &[f64],
        count: usize,
        tol: f64,
        method: EigenMethod,
    ) -> Result<Self> {
        if domain.kind() != DomainKind::FlatTorus {
            return Err(Error::contract("weighted basis requires a flat_torus domain"));
        }
        if count == 0 {
            return Err(Error::config("N", "mode count must be positive"));
        }
        let op = assemble_weighted_operator(domain, f)?;
        let g = domain.num_points();
        if count > g {
            return Err(Error::config("N", format!("{count} modes exceed {g} grid points")));
        }
        let pairs = weighted_eigenpairs(&op, count, tol, method)?;
        let w = domain.cell_volume();
        let scale = 1.0 / w.sqrt();
        let mut modes = vec![0.0; count * g];
        for (i, v) in pairs.vectors.iter().enumerate() {
            let sign = sign_convention(v, i == 0);
            for (o, x) in modes[i * g..(i + 1) * g].iter_mut().zip(v) {
                *o = sign * x * scale;
            }
        }
        Ok(ModeBasis {
            domain: domain.clone(),
            kind: BasisKind::Weighted,
            eigenvalues: pairs.values,
            modes,
            weight: Some(f.to_vec()),
            labels: Vec::new(),
            residuals: pairs.residuals,
            operator: Some(Arc::new(op)),
            ops: Arc::new(DiffOps::new(domain)?),
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode(&self, i: usize) -> &[f64] {
        let g = self.domain.num_points();
        &self.modes[i * g..(i + 1) * g]
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    /// Multi-index of each analytic mode (empty for the weighted basis).
    pub fn labels(&self) -> &[Vec<i64>] {
        &self.labels
    }

    /// Eigen-residual of each mode (zero for analytic modes).
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Coupling function `f` on the grid, if the basis is weighted.
    pub fn weight(&self) -> Option<&[f64]> {
        self.weight.as_deref()
    }

    pub fn weight_at(&self, p: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[p])
    }

    pub fn weight_max(&self) -> f64 {
        self.weight
            .as_ref()
            .map_or(1.0, |w| w.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn diff_ops(&self) -> &DiffOps {
        &self.ops
    }

    /// Gram matrix of the modes under the grid quadrature.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        let w = self.domain.cell_volume();
        DMatrix::from_fn(n, n, |i, j| {
            w * self.mode(i).iter().zip(self.mode(j)).map(|(a, b)| a * b).sum::<f64>()
        })
    }

    /// `beta[i * m + a] = int u_a omega^i`.
    pub fn analyze_into(&self, values: &[f64], m: usize, beta: &mut [f64]) {
        let g = self.domain.num_points();
        let w = self.domain.cell_volume();
        beta[..self.len() * m].fill(0.0);
        for i in 0..self.len() {
            let mode = &self.modes[i * g..(i + 1) * g];
            let b = &mut beta[i * m..(i + 1) * m];
            for (p, &om) in mode.iter().enumerate() {
                let u = &values[p * m..(p + 1) * m];
                for a in 0..m {
                    b[a] += om * u[a];
                }
            }
            for v in b.iter_mut() {
                *v *= w;
            }
        }
    }

    pub fn analyze(&self, u: &Field) -> Result<Vec<f64>> {
        self.domain.check_same(u.domain())?;
        let m = u.algebra_dim();
        let mut beta = vec![0.0; self.len() * m];
        self.analyze_into(u.values(), m, &mut beta);
        Ok(beta)
    }

    /// `values = sum_i beta_i omega^i`.
    pub fn synthesize_into(&self, beta: &[f64], m: usize, values: &mut [f64]) {
        let g = self.domain.num_points();
        values[..g * m].fill(0.0);
        for i in 0..self.len() {
            let b = &beta[i * m..(i + 1) * m];
            if b.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mode = &self.modes[i * g..(i + 1) * g];
            for (p, &om) in mode.iter().enumerate() {
                let u = &mut values[p * m..(p + 1) * m];
                for a in 0..m {
                    u[a] += om * b[a];
                }
            }
        }
    }

    pub fn synthesize(&self, beta: &[f64], m: usize) -> Result<Field> {
        if beta.len() != self.len() * m {
            return Err(Error::contract(format!(
                "coefficient block has {} entries, expected {} x {m}",
                beta.len(),
                self.len()
            )));
        }
        let mut values = vec![0.0; self.domain.num_points() * m];
        self.synthesize_into(beta, m, &mut values);
        Field::new(self.domain.clone(), m, values)
    }

    /// The operator whose eigenfunctions these are, with sign flipped:
    /// `div(f grad u)`. Spectral for analytic bases, the assembled stencil
    /// for the weighted basis.
    pub fn apply_operator(&self, values: &[f64], m: usize) -> Vec<f64> {
        match &self.operator {
            None => self.ops.laplacian(values, m),
            Some(op) => {
                let g = self.domain.num_points();
                let mut out = vec![0.0; g * m];
                let mut col = vec![0.0; g];
                let mut res = vec![0.0; g];
                for a in 0..m {
                    for p in 0..g {
                        col[p] = values[p * m + a];
                    }
                    op.apply(&col, &mut res);
                    for p in 0..g {
                        out[p * m + a] = -res[p];
                    }
                }
                out
            }
        }
    }

    /// Largest absolute wavenumber index per axis over the analytic modes.
    pub fn max_labels(&self) -> Vec<u64> {
        let n = self.domain.space_dim();
        (0..n)
            .map(|a| self.labels.iter().map(|l| l[a].unsigned_abs()).max().unwrap_or(0))
            .collect()
    }
}

/// Sign making the constant mode positive and otherwise the first
/// (near-)largest-magnitude entry positive.
fn sign_convention(v: &[f64], constant: bool) -> f64 {
    if constant {
        return if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    }
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let first = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-6)).copied().unwrap_or(1.0);
    if first < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{so3, AlgebraKernel};
    use nalgebra::SymmetricEigen;

    #[test]
    fn neumann_1d_pairs() {
        let d = DomainSpec::neumann_box(&[PI], &[32]).unwrap();
        let b = ModeBasis::neumann(&d, 4).unwrap();
        assert_eq!(b.eigenvalues()[0], 0.0);
        assert!((b.eigenvalues()[2] - 4.0).abs() < 1e-13);
        let c = 1.0 / PI.sqrt();
        assert!(b.mode(0).iter().all(|&v| (v - c).abs() < 1e-15));
        let norm = (2.0 / PI).sqrt();
        for (j, &v) in b.mode(2).iter().enumerate() {
            let x = (j as f64 + 0.5) * PI / 32.0;
            assert!((v - norm * (2.0 * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn neumann_2d_matches_five_point_laplacian() {
        let (nx, ny) = (24, 48);
        let d = DomainSpec::neumann_box(&[1.0, 2.0], &[nx, ny]).unwrap();
        let b = ModeBasis::neumann(&d, 5).unwrap();
        // oracle: dense 5-point Neumann Laplacian (ghost-cell reflection)
        let (hx, hy) = (1.0 / nx as f64, 2.0 / ny as f64);
        let g = nx * ny;
        let mut mat = DMatrix::<f64>::zeros(g, g);
        for i in 0..nx {
            for j in 0..ny {
                let p = i * ny + j;
                for (di, dj, h) in [(1i64, 0i64, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)] {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    let q = ii as usize * ny + jj as usize;
                    mat[(p, p)] += 1.0 / (h * h);
                    mat[(p, q)] -= 1.0 / (h * h);
                }
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ev[0].abs() < 1e-9);
        for i in 1..5 {
            let rel = (ev[i] - b.eigenvalues()[i]).abs() / b.eigenvalues()[i];
            assert!(rel < 0.02, "mode {i}: {} vs {}", ev[i], b.eigenvalues()[i]);
        }
    }

    #[test]
    fn torus_modes_are_orthonormal_and_sorted() {
        let d = DomainSpec::torus(&[2.0 * PI, 2.0 * PI], &[16, 16]).unwrap();
        let b = ModeBasis::fourier(&d, 21).unwrap();
        let gram = b.gram();
        for i in 0..21 {
            for j in 0..21 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - e).abs() < 1e-12);
            }
        }
        let expect = [0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0];
        for (a, e) in b.eigenvalues().iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unresolvable_mode_count_is_refused() {
        let d = DomainSpec::torus(&[1.0], &[8]).unwrap();
        // representable: 0, +-1, +-2, +-3 -> 7 modes
        assert!(ModeBasis::fourier(&d, 7).is_ok());
        assert!(ModeBasis::fourier(&d, 8).is_err());
        let d = DomainSpec::neumann_box(&[1.0], &[6]).unwrap();
        assert!(ModeBasis::neumann(&d, 6).is_ok());
        assert!(ModeBasis::neumann(&d, 7).is_err());
        assert!(ModeBasis::neumann(&DomainSpec::torus(&[1.0], &[8]).unwrap(), 2).is_err());
    }

    #[test]
    fn analyze_synthesize_round_trip() {
        let d = DomainSpec::torus(&[2.0 * PI, 2.0 * PI], &[16, 16]).unwrap();
        let b = ModeBasis::fourier(&d, 13).unwrap();
        let alg = so3();
        // u = omega^2 e_1
        let mut u = Field::zeros(&d, 3);
        for (p, &om) in b.mode(1).iter().enumerate() {
            u.values_mut()[p * 3] = om;
        }
        let beta = b.analyze(&u).unwrap();
        for (k, v) in beta.iter().enumerate() {
            let e = if k == 3 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-13, "{k}: {v}");
        }
        // Parseval and round trip on a random span element
        let beta: Vec<f64> = (0..13 * 3).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let u = b.synthesize(&beta, 3).unwrap();
        let back = b.analyze(&u).unwrap();
        assert!(beta.iter().zip(&back).all(|(a, c)| (a - c).abs() < 1e-12));
        let mass: f64 = beta.chunks(3).map(|x| alg.norm_sq(x)).sum();
        let q = super::super::quadrature_inner(&alg, &u, &u).unwrap();
        assert!((mass - q).abs() < 1e-10);
        // field orthogonal to the span projects to zero
        let high = Field::from_fn(&d, 3, |x, o| o[0] = (5.0 * x[0]).cos() * (3.0 * x[1]).sin());
        assert!(b.analyze(&high).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn differentiation_consistency() {
        for d in [
            DomainSpec::torus(&[2.0 * PI, 3.0], &[16, 12]).unwrap(),
            DomainSpec::neumann_box(&[1.0, 2.0], &[10, 12]).unwrap(),
        ] {
            let b = match d.kind() {
                DomainKind::FlatTorus => ModeBasis::fourier(&d, 15).unwrap(),
                DomainKind::NeumannBox => ModeBasis::neumann(&d, 15).unwrap(),
            };
            let beta: Vec<f64> = (0..45).map(|k| (k as f64 * 0.37).sin()).collect();
            let u = b.synthesize(&beta, 3).unwrap();
            let lap = b.apply_operator(u.values(), 3);
            let mut out = vec![0.0; 45];
            b.analyze_into(&lap, 3, &mut out);
            for i in 0..15 {
                for a in 0..3 {
                    let e = -b.eigenvalues()[i] * beta[i * 3 + a];
                    assert!((out[i * 3 + a] - e).abs() < 1e-9 * (1.0 + e.abs()));
                }
            }
        }
    }

    #[test]
    fn weighted_constant_coefficient() {
        let d = DomainSpec::torus(&[2.0 * PI], &[128]).unwrap();
        let one = vec![1.0; 128];
        let three = vec![3.0; 128];
        let b1 = ModeBasis::weighted(&d, &one, 5, 1e-13, EigenMethod::Dense).unwrap();
        let b3 = ModeBasis::weighted(&d, &three, 5, 1e-13, EigenMethod::Dense).unwrap();
        let expect = [0.0, 1.0, 1.0, 4.0, 4.0];
        for i in 0..5 {
            // second-order stencil: 4/h^2 sin^2(kh/2)
            assert!((b1.eigenvalues()[i] - expect[i]).abs() < 2e-3 * expect[i].max(1e-9));
            assert!((b3.eigenvalues()[i] - 3.0 * b1.eigenvalues()[i]).abs() < 1e-10);
        }
        assert!(b1.mode(0).iter().all(|&v| v > 0.0));
        let bad = vec![0.0; 128];
        assert!(ModeBasis::weighted(&d, &bad, 5, 1e-13, EigenMethod::Dense).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn spectral_round_trip(beta in prop::collection::vec(-2.0..2.0f64, 3 * 9), torus in any::<bool>()) {
            let d = if torus {
                DomainSpec::torus(&[2.0, 3.0], &[12, 10]).unwrap()
            } else {
                DomainSpec::neumann_box(&[2.0, 3.0], &[12, 10]).unwrap()
            };
            let b = if torus { ModeBasis::fourier(&d, 9).unwrap() } else { ModeBasis::neumann(&d, 9).unwrap() };
            let u = b.synthesize(&beta, 3).unwrap();
            let back = b.analyze(&u).unwrap();
            for (x, y) in back.iter().zip(&beta) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

//! Rectangular boxes with Neumann boundary and flat tori, algebra-valued grid
//! fields, eigenbases and quadrature.
//!
//! Grid points are stored row-major (last axis fastest). Field values are
//! point-major with the algebra component fastest, so `values[p * m + a]` is
//! component `a` at point `p`.

mod basis;
mod eigen;
mod io;
mod ops;

use crate::algebra::AlgebraKernel;
use crate::error::{Error, Result};

pub use basis::{BasisKind, ModeBasis};
pub use eigen::{assemble_weighted_operator, weighted_eigenpairs, EigenMethod, EigenPairs, SparseSym, DENSE_LIMIT};
pub use io::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use ops::{AxisOperators, DiffOps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    NeumannBox,
    FlatTorus,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::NeumannBox => "neumann_box",
            DomainKind::FlatTorus => "flat_torus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "neumann_box" | "box" => Some(DomainKind::NeumannBox),
            "flat_torus" | "torus" => Some(DomainKind::FlatTorus),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    lengths: Vec<f64>,
    grid: Vec<usize>,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, lengths: Vec<f64>, grid: Vec<usize>) -> Result<Self> {
        let n = lengths.len();
        if n == 0 || n > 3 {
            return Err(Error::config("domain.lengths", format!("space dimension {n} not in 1..=3")));
        }
        if grid.len() != n {
            return Err(Error::config(
                "domain.grid",
                format!("{} grid sizes for {n} lengths", grid.len()),
            ));
        }
        if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::config("domain.lengths", format!("length {l} must be positive")));
        }
        if let Some(g) = grid.iter().find(|&&g| g < 4) {
            return Err(Error::config("domain.grid", format!("grid size {g} is below 4")));
        }
        Ok(DomainSpec { kind, lengths, grid })
    }

    pub fn torus(lengths: &[f64], grid: &[usize]) -> Result<Self> {
        Self::new(DomainKind::FlatTorus, lengths.to_vec(), grid.to_vec())
    }

    pub fn neumann_box(lengths: &[f64], grid: &[usize]) -> Result<Self> {
        Self::new(DomainKind::NeumannBox, lengths.to_vec(), grid.to_vec())
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn space_dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn num_points(&self) -> usize {
        self.grid.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.grid[axis] as f64
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Quadrature weight of every grid point.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.num_points() as f64
    }

    /// Coordinate of grid index `j` along `axis`: `j h` on the torus and
    /// `(j + 1/2) h` in the box.
    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        let h = self.spacing(axis);
        match self.kind {
            DomainKind::FlatTorus => j as f64 * h,
            DomainKind::NeumannBox => (j as f64 + 0.5) * h,
        }
    }

    /// Strides of the row-major point layout.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.space_dim();
        let mut s = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.grid[a + 1];
        }
        s
    }

    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let n = self.space_dim();
        let mut idx = vec![0; n];
        for a in (0..n).rev() {
            idx[a] = p % self.grid[a];
            p /= self.grid[a];
        }
        idx
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        self.multi_index(p)
            .iter()
            .enumerate()
            .map(|(a, &j)| self.coord(a, j))
            .collect()
    }

    /// All grid points, row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.num_points()).map(|p| self.point(p)).collect()
    }

    pub fn check_same(&self, other: &DomainSpec) -> Result<()> {
        if self != other {
            return Err(Error::contract("fields live on different domains"));
        }
        Ok(())
    }
}

/// Algebra-valued grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    domain: DomainSpec,
    m: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: DomainSpec, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.num_points() * m {
            return Err(Error::contract(format!(
                "field has {} values, expected {} points x {m} components",
                values.len(),
                domain.num_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("field contains non-finite values"));
        }
        Ok(Field { domain, m, values })
    }

    pub fn zeros(domain: &DomainSpec, m: usize) -> Self {
        Field { values: vec![0.0; domain.num_points() * m], domain: domain.clone(), m }
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(domain: &DomainSpec, m: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut values = vec![0.0; domain.num_points() * m];
        for (p, chunk) in values.chunks_mut(m).enumerate() {
            f(&domain.point(p), chunk);
        }
        Field { domain: domain.clone(), m, values }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn algebra_dim(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.m..(p + 1) * self.m]
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.domain.check_same(&other.domain)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add(&other.scaled(-1.0))
    }

    /// Largest pointwise `|u(x)| - 1`.
    pub fn max_norm_excess(&self, alg: &dyn AlgebraKernel) -> f64 {
        self.values
            .chunks(self.m)
            .map(|u| alg.norm(u) - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `int <u, v> dx` with the algebra inner product and the grid quadrature.
pub fn quadrature_inner(alg: &dyn AlgebraKernel, u: &Field, v: &Field) -> Result<f64> {
    u.domain.check_same(&v.domain)?;
    if u.m != alg.dim() || v.m != alg.dim() {
        return Err(Error::contract("field component count differs from algebra dimension"));
    }
    let w = u.domain.cell_volume();
    Ok(w * u
        .values
        .chunks(u.m)
        .zip(v.values.chunks(v.m))
        .map(|(a, b)| alg.inner(a, b))
        .sum::<f64>())
}

/// Scalar quadrature `sum_x w g(x) h(x)`.
pub fn quadrature_scalar(domain: &DomainSpec, g: &[f64], h: &[f64]) -> f64 {
    domain.cell_volume() * g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
}

//! Grid differentiation by dense per-axis matrices: Fourier interpolation on
//! the torus, cosine interpolation on the box.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct AxisOperators {
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl AxisOperators {
    /// Periodic trigonometric interpolation on `n` equispaced points. The
    /// Nyquist cosine (even `n`) has zero first derivative.
    pub fn fourier(n: usize, length: f64) -> Result<Self> {
        let h = length / n as f64;
        let mut b = DMatrix::zeros(n, n);
        let mut b1 = DMatrix::zeros(n, n);
        let mut b2 = DMatrix::zeros(n, n);
        let mut col = 0;
        let mut put = |col: &mut usize, f: &dyn Fn(f64) -> (f64, f64, f64)| {
            for j in 0..n {
                let (v, d, dd) = f(j as f64 * h);
                b[(j, *col)] = v;
                b1[(j, *col)] = d;
                b2[(j, *col)] = dd;
            }
            *col += 1;
        };
        put(&mut col, &|_| (1.0, 0.0, 0.0));
        let kmax = (n - 1) / 2;
        for k in 1..=kmax {
            let w = 2.0 * PI * k as f64 / length;
            put(&mut col, &|x| ((w * x).cos(), -w * (w * x).sin(), -w * w * (w * x).cos()));
            put(&mut col, &|x| ((w * x).sin(), w * (w * x).cos(), -w * w * (w * x).sin()));
        }
        if n % 2 == 0 {
            let w = PI * n as f64 / length;
            put(&mut col, &|x| ((w * x).cos(), 0.0, -w * w * (w * x).cos()));
        }
        Self::from_interpolation(b, b1, b2)
    }

    /// Cosine interpolation at cell centres; every interpolant has zero
    /// normal derivative at both ends.
    pub fn cosine(n: usize, length: f64) -> Result<Self> {
        let h = length / n as f64;
        let mut b = DMatrix::zeros(n, n);
        let mut b1 = DMatrix::zeros(n, n);
        let mut b2 = DMatrix::zeros(n, n);
        for k in 0..n {
            let w = PI * k as f64 / length;
            for j in 0..n {
                let x = (j as f64 + 0.5) * h;
                b[(j, k)] = (w * x).cos();
                b1[(j, k)] = -w * (w * x).sin();
                b2[(j, k)] = -w * w * (w * x).cos();
            }
        }
        Self::from_interpolation(b, b1, b2)
    }

    fn from_interpolation(b: DMatrix<f64>, b1: DMatrix<f64>, b2: DMatrix<f64>) -> Result<Self> {
        let inv = b
            .try_inverse()
            .ok_or_else(|| Error::contract("interpolation matrix is singular"))?;
        Ok(AxisOperators { d1: b1 * &inv, d2: b2 * &inv })
    }
}

/// Gradient, divergence and Laplacian on a domain grid.
#[derive(Clone, Debug)]
pub struct DiffOps {
    domain: DomainSpec,
    axes: Vec<AxisOperators>,
}

impl DiffOps {
    pub fn new(domain: &DomainSpec) -> Result<Self> {
        let axes = (0..domain.space_dim())
            .map(|a| {
                let (n, l) = (domain.grid()[a], domain.lengths()[a]);
                match domain.kind() {
                    DomainKind::FlatTorus => AxisOperators::fourier(n, l),
                    DomainKind::NeumannBox => AxisOperators::cosine(n, l),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DiffOps { domain: domain.clone(), axes })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn axis(&self, a: usize) -> &AxisOperators {
        &self.axes[a]
    }

    /// Applies a 1D matrix along `axis` to every component of a field.
    pub fn apply_axis(&self, mat: &DMatrix<f64>, axis: usize, input: &[f64], m: usize, out: &mut [f64]) {
        let grid = self.domain.grid();
        let n = grid[axis];
        let stride = self.domain.strides()[axis] * m;
        let g = self.domain.num_points();
        out[..g * m].fill(0.0);
        // lines along `axis`: enumerate all base offsets with index 0 on that axis
        let outer: usize = grid[..axis].iter().product();
        let inner = stride;
        let mut line = vec![0.0; n];
        let mut res = vec![0.0; n];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for j in 0..n {
                    line[j] = input[base + j * stride];
                }
                for r in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += mat[(r, j)] * line[j];
                    }
                    res[r] = s;
                }
                for r in 0..n {
                    out[base + r * stride] = res[r];
                }
            }
        }
    }

    /// `[d_1 u, ..., d_n u]`, each in field layout.
    pub fn gradient(&self, values: &[f64], m: usize) -> Vec<Vec<f64>> {
        let g = self.domain.num_points();
        (0..self.domain.space_dim())
            .map(|a| {
                let mut out = vec![0.0; g * m];
                self.apply_axis(&self.axes[a].d1, a, values, m, &mut out);
                out
            })
            .collect()
    }

    pub fn divergence(&self, components: &[Vec<f64>], m: usize) -> Vec<f64> {
        let g = self.domain.num_points();
        let mut out = vec![0.0; g * m];
        let mut tmp = vec![0.0; g * m];
        for (a, c) in components.iter().enumerate() {
            self.apply_axis(&self.axes[a].d1, a, c, m, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
        out
    }

    pub fn laplacian(&self, values: &[f64], m: usize) -> Vec<f64> {
        let g = self.domain.num_points();
        let mut out = vec![0.0; g * m];
        let mut tmp = vec![0.0; g * m];
        for a in 0..self.domain.space_dim() {
            self.apply_axis(&self.axes[a].d2, a, values, m, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Field;

    #[test]
    fn constant_has_zero_laplacian() {
        let d = DomainSpec::neumann_box(&[1.0, 2.0], &[8, 6]).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let u = vec![0.7; 48 * 2];
        assert!(ops.laplacian(&u, 2).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn torus_sine_laplacian() {
        let d = DomainSpec::torus(&[2.0 * PI, 2.0 * PI], &[16, 12]).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let u = Field::from_fn(&d, 3, |x, o| o[0] = x[0].sin());
        let lap = ops.laplacian(u.values(), 3);
        for (l, v) in lap.iter().zip(u.values()) {
            assert!((l + v).abs() < 1e-12);
        }
    }

    #[test]
    fn box_cosine_gradient() {
        let d = DomainSpec::neumann_box(&[PI], &[32]).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let u = Field::from_fn(&d, 1, |x, o| o[0] = (2.0 * x[0]).cos());
        let g = ops.gradient(u.values(), 1);
        for (p, x) in d.points().iter().enumerate() {
            assert!((g[0][p] + 2.0 * (2.0 * x[0]).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_of_gradient_is_laplacian_on_band_limited_data() {
        let d = DomainSpec::torus(&[2.0 * PI, 1.0, 2.0], &[8, 6, 10]).unwrap();
        let ops = DiffOps::new(&d).unwrap();
        let u = Field::from_fn(&d, 2, |x, o| {
            o[0] = x[0].cos() * (2.0 * PI * x[1]).sin();
            o[1] = (PI * x[2]).sin() + (2.0 * x[0]).sin();
        });
        let div = ops.divergence(&ops.gradient(u.values(), 2), 2);
        let lap = ops.laplacian(u.values(), 2);
        for (a, b) in div.iter().zip(&lap) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

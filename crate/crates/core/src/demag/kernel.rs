//! Cell-averaged second derivatives of the Newtonian potential.
//!
//! `K_ij(d) = (1/V) int_C int_C' d_i d_j N(x - y)` for two grid cells whose
//! centres differ by `d * h`. Near cells use closed-form antiderivatives, far
//! cells tensor Gauss-Legendre quadrature against the tent overlap weight.

use std::f64::consts::PI;

/// Switch from closed form to quadrature at this distance, measured in units
/// of the largest cell edge.
pub const NEAR_RANGE: i64 = 6;

const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_13, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_29, 0.173_927_422_568_726_93),
];
const GL2: [(f64, f64); 2] = [(0.211_324_865_405_187_12, 0.5), (0.788_675_134_594_812_88, 0.5)];

/// Number of independent tensor components for space dimension `n`.
pub fn component_count(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index pairs of the stored components: diagonal first, then `(i, j)` with `i < j`.
pub fn component_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

pub(crate) fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = (2.0 * x2 - y2 - z2) * r / 6.0;
    if x2 + z2 > 0.0 {
        s += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if x2 + y2 > 0.0 {
        s += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x * r > 0.0 {
        s -= x * y * z * (y * z / (x * r)).atan();
    }
    s
}

pub(crate) fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let z = z.abs();
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut s = -x * y * r / 3.0;
    if x2 + y2 > 0.0 {
        s += x * y * z * (z / (x2 + y2).sqrt()).asinh();
    }
    if y2 + z2 > 0.0 {
        s += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    }
    if x2 + z2 > 0.0 {
        s += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if z * r > 0.0 {
        s -= z * z2 / 6.0 * (x * y / (z * r)).atan();
    }
    if y * r != 0.0 {
        s -= 0.5 * z * y2 * (x * z / (y * r)).atan();
    }
    if x * r != 0.0 {
        s -= 0.5 * z * x2 * (y * z / (x * r)).atan();
    }
    s
}

/// `d_y^2 A = log r` in the plane.
pub(crate) fn plane_diag(x: f64, y: f64) -> f64 {
    let (x, y) = (x.abs(), y.abs());
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut s = 0.25 * (y * y - x * x) * r2.ln() - 0.75 * y * y;
    if x > 0.0 {
        s += x * y * (y / x).atan();
    }
    s
}

/// `d_x d_y P = log r` in the plane.
pub(crate) fn plane_off(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut s = 0.5 * x * y * r2.ln() - 1.5 * x * y;
    if y != 0.0 {
        s += 0.5 * y * y * (x / y).atan();
    }
    if x != 0.0 {
        s += 0.5 * x * x * (y / x).atan();
    }
    s
}

/// Kernel generator for one cell shape.
#[derive(Clone, Debug)]
pub struct CellKernel {
    h: Vec<f64>,
}

impl CellKernel {
    pub fn new(h: &[f64]) -> Self {
        assert!((1..=3).contains(&h.len()));
        CellKernel { h: h.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    fn volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// All components at cell offset `d` (any signs), ordered as [`component_pairs`].
    pub fn entries(&self, d: &[i64]) -> Vec<f64> {
        let n = self.dim();
        let a: Vec<i64> = d.iter().map(|v| v.abs()).collect();
        let mut e = if n == 1 {
            vec![if a[0] == 0 { 1.0 } else { 0.0 }]
        } else {
            let hmax = self.h.iter().copied().fold(0.0, f64::max);
            let reach = a.iter().zip(&self.h).map(|(&k, h)| k as f64 * h).fold(0.0, f64::max) / hmax;
            if reach < NEAR_RANGE as f64 {
                self.near(&a)
            } else if reach < 16.0 {
                self.far(&a, &GL4)
            } else {
                self.far(&a, &GL2)
            }
        };
        for (c, &(i, j)) in component_pairs(n).iter().enumerate() {
            if i != j && (d[i] < 0) != (d[j] < 0) {
                e[c] = -e[c];
            }
        }
        e
    }

    fn near(&self, a: &[i64]) -> Vec<f64> {
        let n = self.dim();
        let v = self.volume();
        let pos: Vec<f64> = a.iter().zip(&self.h).map(|(&k, h)| k as f64 * h).collect();
        let pairs = component_pairs(n);
        let mut out = vec![0.0; pairs.len()];
        let w = [1.0, -2.0, 1.0];
        let mut shift = [0usize; 3];
        let total = 3usize.pow(n as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut weight = 1.0;
            let mut p = [0.0; 3];
            for ax in 0..n {
                shift[ax] = rem % 3;
                rem /= 3;
                weight *= w[shift[ax]];
                p[ax] = pos[ax] + (shift[ax] as f64 - 1.0) * self.h[ax];
            }
            for (c, &(i, j)) in pairs.iter().enumerate() {
                let val = if n == 3 {
                    if i == j {
                        let (o1, o2) = ((i + 1) % 3, (i + 2) % 3);
                        -newell_f(p[i], p[o1], p[o2]) / (4.0 * PI)
                    } else {
                        -newell_g(p[i], p[j], p[3 - i - j]) / (4.0 * PI)
                    }
                } else if i == j {
                    plane_diag(p[i], p[1 - i]) / (2.0 * PI)
                } else {
                    plane_off(p[0], p[1]) / (2.0 * PI)
                };
                out[c] += weight * val;
            }
        }
        out.iter_mut().for_each(|x| *x /= v);
        out
    }

    fn far(&self, a: &[i64], rule: &[(f64, f64)]) -> Vec<f64> {
        let n = self.dim();
        let pairs = component_pairs(n);
        // one-axis nodes of the tent-weighted integral over [-h, h]
        let axis_nodes: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|ax| {
                let h = self.h[ax];
                let c = a[ax] as f64 * h;
                let mut v = Vec::with_capacity(2 * rule.len());
                for &(s, w) in rule {
                    let wt = w * (1.0 - s) * h;
                    v.push((c + s * h, wt));
                    v.push((c - s * h, wt));
                }
                v
            })
            .collect();
        let mut out = vec![0.0; pairs.len()];
        let q = axis_nodes[0].len();
        let total = q.pow(n as u32);
        let mut x = [0.0; 3];
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for ax in 0..n {
                let (xv, wv) = axis_nodes[ax][rem % q];
                rem /= q;
                x[ax] = xv;
                w *= wv;
            }
            let r2: f64 = x[..n].iter().map(|v| v * v).sum();
            for (c, &(i, j)) in pairs.iter().enumerate() {
                out[c] += w * hessian_newton(n, &x, r2, i, j);
            }
        }
        out
    }
}

/// `d_i d_j N` at `x` with `N = -1/(4 pi r)` in 3D and `log(r)/(2 pi)` in 2D.
pub(crate) fn hessian_newton(n: usize, x: &[f64], r2: f64, i: usize, j: usize) -> f64 {
    let delta = if i == j { 1.0 } else { 0.0 };
    match n {
        3 => (delta * r2 - 3.0 * x[i] * x[j]) / (4.0 * PI * r2 * r2 * r2.sqrt()),
        2 => (delta * r2 - 2.0 * x[i] * x[j]) / (2.0 * PI * r2 * r2),
        _ => 0.0,
    }
}

/// `d_j N` at `x`.
pub(crate) fn grad_newton(n: usize, x: &[f64], j: usize) -> f64 {
    let r2: f64 = x[..n].iter().map(|v| v * v).sum();
    match n {
        3 => x[j] / (4.0 * PI * r2 * r2.sqrt()),
        2 => x[j] / (2.0 * PI * r2),
        _ => 0.5 * x[0].signum(),
    }
}

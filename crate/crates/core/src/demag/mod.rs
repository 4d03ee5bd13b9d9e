//! Demagnetizing (stray) field `h_d(u) = -grad(grad N * u chi_Omega)` on a box.
//!
//! The cell-averaged kernel is applied by zero-padded FFT convolution. The
//! operator is only defined when the space dimension equals the number of
//! field components.

mod fft;
mod kernel;

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::domain::{DiffOps, DomainKind, DomainSpec, Field};
use crate::error::{Error, Result};

use fft::Fft3;
pub use kernel::{component_count, component_pairs, CellKernel, NEAR_RANGE};

pub const DEFAULT_PAD_FACTOR: usize = 2;

/// Convolution of an `n`-vector field with a symmetric tensor kernel.
struct TensorConv {
    fft: Fft3,
    src: [usize; 3],
    grid: [usize; 3],
    target: [usize; 3],
    n: usize,
    /// Real spectra of the kernel components, ordered as [`component_pairs`].
    spectra: Vec<Vec<f64>>,
}

fn to3(v: &[usize], fill: usize) -> [usize; 3] {
    let mut out = [fill; 3];
    let off = 3 - v.len();
    out[off..].copy_from_slice(v);
    out
}

/// Signed offset represented by FFT index `idx`, or `None` at the Nyquist index.
fn wrap(idx: usize, len: usize) -> Option<i64> {
    if 2 * idx < len {
        Some(idx as i64)
    } else if 2 * idx > len {
        Some(idx as i64 - len as i64)
    } else {
        None
    }
}

fn neg_index(len: usize) -> Vec<usize> {
    (0..len).map(|k| (len - k) % len).collect()
}

impl TensorConv {
    /// `grid` cells sit at `src` inside an FFT box of `len`; results are read on `[0, target)`.
    fn new(cell: &CellKernel, grid: &[usize], len: &[usize], src: &[usize], target: &[usize]) -> Self {
        let n = grid.len();
        let dims = to3(len, 1);
        let fft = Fft3::new(dims);
        let pairs = component_pairs(n);
        let total = fft.len();
        // octant table indexed by |offset|
        let half: Vec<usize> = len.iter().map(|&l| l / 2 + 1).collect();
        let oct_len: usize = half.iter().product();
        let mut octant = vec![Vec::new(); oct_len];
        for (flat, slot) in octant.iter_mut().enumerate() {
            let mut rem = flat;
            let mut d = vec![0i64; n];
            for ax in (0..n).rev() {
                d[ax] = (rem % half[ax]) as i64;
                rem /= half[ax];
            }
            *slot = cell.entries(&d);
        }
        let mut arrays = vec![vec![Complex64::new(0.0, 0.0); total]; pairs.len()];
        let off = 3 - n;
        for flat in 0..total {
            let idx = [flat / (dims[1] * dims[2]), (flat / dims[2]) % dims[1], flat % dims[2]];
            let mut key = 0;
            let mut sign = vec![1.0; n];
            let mut nyq = vec![false; n];
            for ax in 0..n {
                let (i, l) = (idx[off + ax], len[ax]);
                let q = match wrap(i, l) {
                    Some(q) => q,
                    None => {
                        nyq[ax] = true;
                        (l / 2) as i64
                    }
                };
                if q < 0 {
                    sign[ax] = -1.0;
                }
                key = key * half[ax] + q.unsigned_abs() as usize;
            }
            let e = &octant[key];
            for (c, &(i, j)) in pairs.iter().enumerate() {
                let v = if i == j {
                    e[c]
                } else if nyq[i] || nyq[j] {
                    0.0
                } else {
                    e[c] * sign[i] * sign[j]
                };
                arrays[c][flat] = Complex64::new(v, 0.0);
            }
        }
        let spectra = arrays
            .into_iter()
            .map(|mut a| {
                fft.forward(&mut a);
                a.into_iter().map(|z| z.re).collect()
            })
            .collect();
        TensorConv { fft, src: to3(src, 0), grid: to3(grid, 1), target: to3(target, 1), n, spectra }
    }

    fn comp(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        component_pairs(self.n).iter().position(|&p| p == (a, b)).unwrap()
    }

    /// `K * u` on the target box, point-major with `n` components.
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let dims = self.fft.dims();
        let total = self.fft.len();
        let [g0, g1, g2] = self.grid;
        let support = [
            (self.src[0], self.src[0] + g0),
            (self.src[1], self.src[1] + g1),
            (self.src[2], self.src[2] + g2),
        ];
        let at = |i0: usize, i1: usize, i2: usize| ((i0 * dims[1]) + i1) * dims[2] + i2;
        // pack component pairs as real + i imag
        let packs: Vec<(usize, Option<usize>)> =
            (0..n).step_by(2).map(|a| (a, if a + 1 < n { Some(a + 1) } else { None })).collect();
        let mut uhat = vec![vec![Complex64::new(0.0, 0.0); total]; n];
        let neg: Vec<Vec<usize>> = dims.iter().map(|&l| neg_index(l)).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for &(a, b) in &packs {
            buf.fill(Complex64::new(0.0, 0.0));
            let mut p = 0;
            for i0 in 0..g0 {
                for i1 in 0..g1 {
                    for i2 in 0..g2 {
                        let re = u[p * n + a];
                        let im = b.map_or(0.0, |b| u[p * n + b]);
                        buf[at(i0 + self.src[0], i1 + self.src[1], i2 + self.src[2])] = Complex64::new(re, im);
                        p += 1;
                    }
                }
            }
            self.fft.forward_pruned(&mut buf, support);
            for k0 in 0..dims[0] {
                for k1 in 0..dims[1] {
                    for k2 in 0..dims[2] {
                        let k = at(k0, k1, k2);
                        let z = buf[k];
                        match b {
                            Some(b) => {
                                let zn = buf[at(neg[0][k0], neg[1][k1], neg[2][k2])].conj();
                                uhat[a][k] = (z + zn) * 0.5;
                                uhat[b][k] = (z - zn) * Complex64::new(0.0, -0.5);
                            }
                            None => uhat[a][k] = z,
                        }
                    }
                }
            }
        }
        let keep = [(0, self.target[0]), (0, self.target[1]), (0, self.target[2])];
        let [t0, t1, t2] = self.target;
        let mut out = vec![0.0; t0 * t1 * t2 * n];
        for &(a, b) in &packs {
            let ka: Vec<&[f64]> = (0..n).map(|j| self.spectra[self.comp(a, j)].as_slice()).collect();
            let kb: Vec<&[f64]> = match b {
                Some(b) => (0..n).map(|j| self.spectra[self.comp(b, j)].as_slice()).collect(),
                None => Vec::new(),
            };
            for (k, slot) in buf.iter_mut().enumerate() {
                let mut sa = Complex64::new(0.0, 0.0);
                let mut sb = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    sa += uhat[j][k] * ka[j][k];
                    if !kb.is_empty() {
                        sb += uhat[j][k] * kb[j][k];
                    }
                }
                *slot = sa + Complex64::new(-sb.im, sb.re);
            }
            self.fft.inverse_pruned(&mut buf, keep);
            let mut p = 0;
            for i0 in 0..t0 {
                for i1 in 0..t1 {
                    for i2 in 0..t2 {
                        let z = buf[at(i0, i1, i2)];
                        out[p * n + a] = z.re;
                        if let Some(b) = b {
                            out[p * n + b] = z.im;
                        }
                        p += 1;
                    }
                }
            }
        }
        out
    }
}

/// Stray-field operator on a Neumann box with `n = m`.
pub struct DemagOperator {
    domain: DomainSpec,
    pad_factor: usize,
    cell: CellKernel,
    inner: Option<TensorConv>,
    padded: OnceLock<Option<TensorConv>>,
}

impl std::fmt::Debug for DemagOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagOperator")
            .field("grid", &self.domain.grid())
            .field("lengths", &self.domain.lengths())
            .field("pad_factor", &self.pad_factor)
            .finish()
    }
}

impl DemagOperator {
    pub fn new(domain: &DomainSpec, m: usize) -> Result<Self> {
        Self::with_pad_factor(domain, m, DEFAULT_PAD_FACTOR)
    }

    pub fn with_pad_factor(domain: &DomainSpec, m: usize, pad_factor: usize) -> Result<Self> {
        let n = domain.space_dim();
        if n != m {
            return Err(Error::config(
                "demag",
                format!("stray field needs dim(Omega) = dim(g), got {n} and {m}"),
            ));
        }
        if domain.kind() != DomainKind::NeumannBox {
            return Err(Error::config("demag", "stray field is only defined on a neumann_box domain"));
        }
        if pad_factor < 2 {
            return Err(Error::config("demag", format!("pad factor {pad_factor} is below 2")));
        }
        let h: Vec<f64> = (0..n).map(|a| domain.spacing(a)).collect();
        let cell = CellKernel::new(&h);
        let inner = (n > 1).then(|| {
            let g = domain.grid();
            let len: Vec<usize> = g.iter().map(|&x| 2 * x).collect();
            TensorConv::new(&cell, g, &len, &vec![0; n], g)
        });
        Ok(DemagOperator { domain: domain.clone(), pad_factor, cell, inner, padded: OnceLock::new() })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    /// Kernel components at cell offset `d`, ordered as [`component_pairs`].
    pub fn kernel_entries(&self, d: &[i64]) -> Vec<f64> {
        self.cell.entries(d)
    }

    /// Box of `pad_factor` times the size of the domain with the domain centred.
    pub fn padded_domain(&self) -> DomainSpec {
        let p = self.pad_factor;
        let lengths: Vec<f64> = self.domain.lengths().iter().map(|l| l * p as f64).collect();
        let grid: Vec<usize> = self.domain.grid().iter().map(|g| g * p).collect();
        DomainSpec::neumann_box(&lengths, &grid).expect("scaled domain stays valid")
    }

    /// Index offset of the domain inside the padded box.
    pub fn padded_offset(&self) -> Vec<usize> {
        self.domain.grid().iter().map(|g| (self.pad_factor - 1) * g / 2).collect()
    }

    fn check(&self, u: &Field) -> Result<()> {
        self.domain.check_same(u.domain())?;
        if u.algebra_dim() != self.domain.space_dim() {
            return Err(Error::config(
                "demag",
                format!(
                    "stray field needs dim(Omega) = dim(g), got {} and {}",
                    self.domain.space_dim(),
                    u.algebra_dim()
                ),
            ));
        }
        Ok(())
    }

    /// `h_d(u)` on the domain for raw point-major values.
    pub fn demag_field_values(&self, u: &[f64], out: &mut [f64]) {
        match &self.inner {
            None => {
                for (o, v) in out.iter_mut().zip(u) {
                    *o = -v;
                }
            }
            Some(conv) => {
                let k = conv.apply(u);
                for (o, v) in out.iter_mut().zip(&k) {
                    *o = -v;
                }
            }
        }
    }

    pub fn demag_field(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = vec![0.0; u.values().len()];
        self.demag_field_values(u.values(), &mut out);
        Field::new(self.domain.clone(), u.algebra_dim(), out)
    }

    fn padded_conv(&self) -> Option<&TensorConv> {
        self.padded
            .get_or_init(|| {
                let n = self.domain.space_dim();
                (n > 1).then(|| {
                    let g = self.domain.grid();
                    let p = self.pad_factor;
                    let len: Vec<usize> = g.iter().map(|&x| (p + 1) * x).collect();
                    let target: Vec<usize> = g.iter().map(|&x| p * x).collect();
                    TensorConv::new(&self.cell, g, &len, &self.padded_offset(), &target)
                })
            })
            .as_ref()
    }

    /// `h_d(u)` on the padded box.
    pub fn padded_field(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let pd = self.padded_domain();
        let n = self.domain.space_dim();
        let values = match self.padded_conv() {
            Some(conv) => conv.apply(u.values()).into_iter().map(|v| -v).collect(),
            None => {
                let mut v = vec![0.0; pd.num_points()];
                let off = self.padded_offset()[0];
                for (i, x) in u.values().iter().enumerate() {
                    v[i + off] = -x;
                }
                v
            }
        };
        Field::new(pd, n, values)
    }

    /// `(int_pad |h_d(u)|^2, int_Omega |u|^2)` with the coordinate norm.
    pub fn lemma_norms(&self, u: &Field) -> Result<(f64, f64)> {
        let h = self.padded_field(u)?;
        let v = self.domain.cell_volume();
        let lhs = v * h.values().iter().map(|x| x * x).sum::<f64>();
        let rhs = v * u.values().iter().map(|x| x * x).sum::<f64>();
        Ok((lhs, rhs))
    }

    /// `||h_d(u)||_{H^1(Omega)} / ||u||_{H^1(Omega)}` with spectral gradients.
    pub fn h1_ratio(&self, u: &Field) -> Result<f64> {
        let h = self.demag_field(u)?;
        let ops = DiffOps::new(&self.domain)?;
        let n = self.domain.space_dim();
        let norm = |f: &Field| {
            let g = ops.gradient(f.values(), n);
            let s: f64 = f.values().iter().map(|x| x * x).sum::<f64>()
                + g.iter().flat_map(|c| c.iter()).map(|x| x * x).sum::<f64>();
            s.sqrt()
        };
        let den = norm(u);
        Ok(if den > 0.0 { norm(&h) / den } else { 0.0 })
    }

    /// `-1/2 int_Omega h_d(u) . u`.
    pub fn demag_energy(&self, u: &Field) -> Result<f64> {
        let h = self.demag_field(u)?;
        Ok(self.energy_of(u.values(), h.values()))
    }

    pub fn energy_of(&self, u: &[f64], h: &[f64]) -> f64 {
        -0.5 * self.domain.cell_volume() * u.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Scalar potential `w = sum_j d_j N * u_j` on the padded box, so that
    /// `Delta w = div(u chi_Omega)` and `h_d = -grad w`. Midpoint kernel, zero
    /// self-cell contribution.
    pub fn magnetostatic_potential(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let n = self.domain.space_dim();
        let g = self.domain.grid();
        let p = self.pad_factor;
        let len: Vec<usize> = g.iter().map(|&x| (p + 1) * x).collect();
        let dims = to3(&len, 1);
        let fft = Fft3::new(dims);
        let total = fft.len();
        let off = 3 - n;
        let h: Vec<f64> = (0..n).map(|a| self.domain.spacing(a)).collect();
        let v = self.domain.cell_volume();
        let src = to3(&self.padded_offset(), 0);
        let grid3 = to3(g, 1);
        let target = to3(&g.iter().map(|&x| p * x).collect::<Vec<_>>(), 1);
        let at = |i: [usize; 3]| (i[0] * dims[1] + i[1]) * dims[2] + i[2];
        let mut acc = vec![Complex64::new(0.0, 0.0); total];
        let mut kern = vec![Complex64::new(0.0, 0.0); total];
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        for j in 0..n {
            for (flat, k) in kern.iter_mut().enumerate() {
                let idx = [flat / (dims[1] * dims[2]), (flat / dims[2]) % dims[1], flat % dims[2]];
                let mut x = [0.0; 3];
                let mut zero = true;
                let mut nyq = false;
                for ax in 0..n {
                    match wrap(idx[off + ax], len[ax]) {
                        Some(q) => {
                            x[ax] = q as f64 * h[ax];
                            zero &= q == 0;
                        }
                        None => nyq = true,
                    }
                }
                *k = if zero || nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(v * kernel::grad_newton(n, &x, j), 0.0)
                };
            }
            fft.forward(&mut kern);
            data.fill(Complex64::new(0.0, 0.0));
            let mut pnt = 0;
            for i0 in 0..grid3[0] {
                for i1 in 0..grid3[1] {
                    for i2 in 0..grid3[2] {
                        data[at([i0 + src[0], i1 + src[1], i2 + src[2]])] =
                            Complex64::new(u.values()[pnt * n + j], 0.0);
                        pnt += 1;
                    }
                }
            }
            fft.forward(&mut data);
            for ((a, d), k) in acc.iter_mut().zip(&data).zip(&kern) {
                *a += d * k;
            }
        }
        fft.inverse(&mut acc);
        let mut out = Vec::with_capacity(target.iter().product());
        for i0 in 0..target[0] {
            for i1 in 0..target[1] {
                for i2 in 0..target[2] {
                    out.push(acc[at([i0, i1, i2])].re);
                }
            }
        }
        Field::new(self.padded_domain(), 1, out)
    }
}

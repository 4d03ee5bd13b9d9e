use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// In-place 3D complex FFT on a row-major array (axes of length 1 are skipped).
pub(crate) struct Fft3 {
    dims: [usize; 3],
    fwd: Vec<Option<Arc<dyn Fft<f64>>>>,
    inv: Vec<Option<Arc<dyn Fft<f64>>>>,
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for &d in &dims {
            if d > 1 {
                fwd.push(Some(planner.plan_fft_forward(d)));
                inv.push(Some(planner.plan_fft_inverse(d)));
            } else {
                fwd.push(None);
                inv.push(None);
            }
        }
        Fft3 { dims, fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        let full = self.full();
        self.forward_pruned(data, full);
    }

    /// Inverse transform including the `1 / len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        let full = self.full();
        self.inverse_pruned(data, full);
    }

    fn full(&self) -> [(usize, usize); 3] {
        [(0, self.dims[0]), (0, self.dims[1]), (0, self.dims[2])]
    }

    /// Forward transform of data that vanishes outside the index box `support`.
    pub fn forward_pruned(&self, data: &mut [Complex64], support: [(usize, usize); 3]) {
        self.axis2(data, &self.fwd, support[0], support[1]);
        self.axis1(data, &self.fwd, support[0]);
        self.axis0(data, &self.fwd);
    }

    /// Inverse transform that is only guaranteed correct inside `keep`.
    pub fn inverse_pruned(&self, data: &mut [Complex64], keep: [(usize, usize); 3]) {
        self.axis0(data, &self.inv);
        self.axis1(data, &self.inv, keep[0]);
        self.axis2(data, &self.inv, keep[0], keep[1]);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn axis2(&self, data: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>], r0: (usize, usize), r1: (usize, usize)) {
        let [_, d1, d2] = self.dims;
        if let Some(p) = &plans[2] {
            for i0 in r0.0..r0.1 {
                let start = (i0 * d1 + r1.0) * d2;
                let end = (i0 * d1 + r1.1) * d2;
                p.process(&mut data[start..end]);
            }
        }
    }

    fn axis1(&self, data: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>], r0: (usize, usize)) {
        let [_, d1, d2] = self.dims;
        if let Some(p) = &plans[1] {
            let mut block = vec![Complex64::new(0.0, 0.0); d1 * d2];
            for i0 in r0.0..r0.1 {
                let slab = &mut data[i0 * d1 * d2..(i0 + 1) * d1 * d2];
                for j in 0..d1 {
                    for i2 in 0..d2 {
                        block[i2 * d1 + j] = slab[j * d2 + i2];
                    }
                }
                p.process(&mut block);
                for j in 0..d1 {
                    for i2 in 0..d2 {
                        slab[j * d2 + i2] = block[i2 * d1 + j];
                    }
                }
            }
        }
    }

    fn axis0(&self, data: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>]) {
        let [d0, d1, d2] = self.dims;
        if let Some(p) = &plans[0] {
            let plane = d1 * d2;
            let mut block = vec![Complex64::new(0.0, 0.0); d0 * plane];
            for j in 0..d0 {
                for q in 0..plane {
                    block[q * d0 + j] = data[j * plane + q];
                }
            }
            p.process(&mut block);
            for j in 0..d0 {
                for q in 0..plane {
                    data[j * plane + q] = block[q * d0 + j];
                }
            }
        }
    }
}

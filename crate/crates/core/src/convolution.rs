//! Zero-padded FFT convolution of kernel tables on C - C with grid fields.
//!
//! For a field `U` on the `n`-point grid C and a kernel tabulated at
//! offsets `-(n-1)..=(n-1)`, the linear convolution
//! `(k * U)(c) = h^d sum_{c'} k(c - c') U(c')` is computed as a circular
//! convolution of length `P >= 2n - 1`, which cannot alias on C.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::library::LowRank;

/// Smallest `2^a 3^b 5^c` that is at least `n`.
pub fn smooth_length(n: usize) -> usize {
    let mut p = n.max(1);
    loop {
        let mut r = p;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return p;
        }
        p += 1;
    }
}

/// Transform of a zero-padded table, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(pub Vec<Complex64>);

/// FFT plans for one grid.
#[derive(Clone)]
pub struct ConvPlan {
    n: Vec<usize>,
    p: Vec<usize>,
    weight: f64,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

/// Per-thread buffers for [`ConvPlan`].
#[derive(Debug, Default)]
pub struct ConvScratch {
    work: Vec<Complex64>,
    column: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl ConvPlan {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.dim() > 2 {
            return Err(Error::Dimension("convolution supports d <= 2".into()));
        }
        let n = grid.counts().to_vec();
        let p: Vec<usize> = n.iter().map(|&k| smooth_length(2 * k - 1)).collect();
        let mut planner = FftPlanner::new();
        let fwd = p.iter().map(|&k| planner.plan_fft_forward(k)).collect();
        let inv = p.iter().map(|&k| planner.plan_fft_inverse(k)).collect();
        Ok(ConvPlan { n, p, weight: grid.cell_volume(), fwd, inv })
    }

    pub fn padded(&self) -> &[usize] {
        &self.p
    }

    fn size(&self) -> usize {
        self.p.iter().product()
    }

    fn last(&self) -> usize {
        *self.p.last().expect("nonempty")
    }

    /// Transforms the leading `rows` rows along the last axis, then every
    /// column along the first axis (2D only).
    fn forward(&self, buf: &mut [Complex64], rows: usize, s: &mut ConvScratch) {
        let p1 = self.last();
        let f1 = &self.fwd[self.p.len() - 1];
        s.fft.resize(f1.get_inplace_scratch_len(), Complex64::default());
        for row in buf.chunks_exact_mut(p1).take(rows) {
            f1.process_with_scratch(row, &mut s.fft);
        }
        if self.p.len() == 2 {
            self.columns(buf, &self.fwd[0], s);
        }
    }

    /// Inverse along the first axis, then the last axis on the leading
    /// `rows` rows only.
    fn inverse(&self, buf: &mut [Complex64], rows: usize, s: &mut ConvScratch) {
        if self.p.len() == 2 {
            self.columns(buf, &self.inv[0], s);
        }
        let p1 = self.last();
        let f1 = &self.inv[self.p.len() - 1];
        s.fft.resize(f1.get_inplace_scratch_len(), Complex64::default());
        for row in buf.chunks_exact_mut(p1).take(rows) {
            f1.process_with_scratch(row, &mut s.fft);
        }
    }

    fn columns(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>, s: &mut ConvScratch) {
        let (p0, p1) = (self.p[0], self.p[1]);
        s.column.resize(p0, Complex64::default());
        s.fft.resize(plan.get_inplace_scratch_len(), Complex64::default());
        for c in 0..p1 {
            for r in 0..p0 {
                s.column[r] = buf[r * p1 + c];
            }
            plan.process_with_scratch(&mut s.column, &mut s.fft);
            for r in 0..p0 {
                buf[r * p1 + c] = s.column[r];
            }
        }
    }

    fn check_table(&self, shape: &[usize]) -> Result<()> {
        let expect: Vec<usize> = self.n.iter().map(|&k| 2 * k - 1).collect();
        if shape != expect.as_slice() {
            return Err(Error::GridMismatch(format!(
                "kernel table shape {shape:?} does not match difference grid {expect:?}"
            )));
        }
        Ok(())
    }

    /// Spectrum of a dense kernel table on C - C.
    pub fn kernel_spectrum(&self, table: &[f64], shape: &[usize]) -> Result<Spectrum> {
        self.check_table(shape)?;
        let mut buf = vec![Complex64::default(); self.size()];
        let p1 = self.last();
        match self.n.len() {
            1 => {
                let n = self.n[0] as isize;
                for i in -(n - 1)..n {
                    buf[i.rem_euclid(p1 as isize) as usize].re = table[(i + n - 1) as usize];
                }
            }
            _ => {
                let (n0, n1) = (self.n[0] as isize, self.n[1] as isize);
                let w1 = (2 * n1 - 1) as usize;
                for i in -(n0 - 1)..n0 {
                    let r = i.rem_euclid(self.p[0] as isize) as usize;
                    for j in -(n1 - 1)..n1 {
                        let c = j.rem_euclid(p1 as isize) as usize;
                        buf[r * p1 + c].re = table[(i + n0 - 1) as usize * w1 + (j + n1 - 1) as usize];
                    }
                }
            }
        }
        let mut s = ConvScratch::default();
        let rows = buf.len() / p1;
        self.forward(&mut buf, rows, &mut s);
        Ok(Spectrum(buf))
    }

    /// Spectrum of `sum_q s_q u_q v_q^T` assembled from one-dimensional
    /// transforms of the factors.
    pub fn low_rank_spectrum(&self, lr: &LowRank) -> Result<Spectrum> {
        if self.n.len() != 2 {
            return Err(Error::Dimension("low-rank kernels are two-dimensional".into()));
        }
        self.check_table(&[lr.rows, lr.cols])?;
        let (p0, p1) = (self.p[0], self.p[1]);
        let wrap = |v: &[f64], p: usize, plan: &Arc<dyn Fft<f64>>| {
            let n = (v.len() as isize + 1) / 2;
            let mut b = vec![Complex64::default(); p];
            for i in -(n - 1)..n {
                b[i.rem_euclid(p as isize) as usize].re = v[(i + n - 1) as usize];
            }
            plan.process(&mut b);
            b
        };
        let mut out = vec![Complex64::default(); p0 * p1];
        for q in 0..lr.rank() {
            let a = wrap(&lr.left[q], p0, &self.fwd[0]);
            let b = wrap(&lr.right[q], p1, &self.fwd[1]);
            let s = lr.weights[q];
            for r in 0..p0 {
                let ar = a[r] * s;
                for (o, bc) in out[r * p1..(r + 1) * p1].iter_mut().zip(&b) {
                    *o += ar * bc;
                }
            }
        }
        Ok(Spectrum(out))
    }

    /// Spectrum of a grid field (zero-padded).
    pub fn field_spectrum(&self, u: &[f64], s: &mut ConvScratch) -> Result<Spectrum> {
        let cells: usize = self.n.iter().product();
        if u.len() != cells {
            return Err(Error::GridMismatch(format!("field has {} cells, grid has {cells}", u.len())));
        }
        let p1 = self.last();
        let n1 = *self.n.last().unwrap();
        let rows = cells / n1;
        let mut buf = vec![Complex64::default(); self.size()];
        for r in 0..rows {
            for c in 0..n1 {
                buf[r * p1 + c].re = u[r * n1 + c];
            }
        }
        self.forward(&mut buf, rows, s);
        Ok(Spectrum(buf))
    }

    /// `k * U` on C, from precomputed spectra.
    pub fn apply(&self, k: &Spectrum, u: &Spectrum, out: &mut [f64], s: &mut ConvScratch) {
        s.work.clear();
        s.work.extend(k.0.iter().zip(&u.0).map(|(a, b)| a * b));
        let mut work = std::mem::take(&mut s.work);
        let rows = self.inverse_rows();
        self.inverse(&mut work, rows, s);
        self.extract(&work, out, |z| z.re);
        s.work = work;
    }

    /// `k1 * U` and `k2 * U` with a single complex inverse transform.
    pub fn apply_pair(
        &self,
        k1: &Spectrum,
        k2: &Spectrum,
        u: &Spectrum,
        out1: &mut [f64],
        out2: &mut [f64],
        s: &mut ConvScratch,
    ) {
        let i = Complex64::new(0.0, 1.0);
        s.work.clear();
        s.work.extend(k1.0.iter().zip(&k2.0).zip(&u.0).map(|((a, b), c)| (a + i * b) * c));
        let mut work = std::mem::take(&mut s.work);
        let rows = self.inverse_rows();
        self.inverse(&mut work, rows, s);
        self.extract(&work, out1, |z| z.re);
        self.extract(&work, out2, |z| z.im);
        s.work = work;
    }

    fn inverse_rows(&self) -> usize {
        if self.n.len() == 2 {
            self.n[0]
        } else {
            1
        }
    }

    fn extract(&self, work: &[Complex64], out: &mut [f64], part: impl Fn(&Complex64) -> f64) {
        let scale = self.weight / self.size() as f64;
        let p1 = self.last();
        let n1 = *self.n.last().unwrap();
        for (r, row) in out.chunks_exact_mut(n1).enumerate() {
            for (c, o) in row.iter_mut().enumerate() {
                *o = part(&work[r * p1 + c]) * scale;
            }
        }
    }

    /// One-shot convolution of a dense table with a field.
    pub fn convolve(&self, table: &[f64], shape: &[usize], u: &[f64]) -> Result<Vec<f64>> {
        let k = self.kernel_spectrum(table, shape)?;
        let mut s = ConvScratch::default();
        let us = self.field_spectrum(u, &mut s)?;
        let mut out = vec![0.0; u.len()];
        self.apply(&k, &us, &mut out, &mut s);
        Ok(out)
    }
}

/// Direct `h^d sum_{c'} k(c - c') U(c')`, for testing.
pub fn convolve_direct(grid: &Grid, table: &[f64], u: &[f64]) -> Vec<f64> {
    let n = grid.counts();
    let w = grid.cell_volume();
    let mut out = vec![0.0; u.len()];
    match n.len() {
        1 => {
            let n = n[0];
            for c in 0..n {
                out[c] = w * (0..n).map(|cp| table[c + n - 1 - cp] * u[cp]).sum::<f64>();
            }
        }
        _ => {
            let (n0, n1) = (n[0], n[1]);
            let w1 = 2 * n1 - 1;
            for a in 0..n0 {
                for b in 0..n1 {
                    let mut acc = 0.0;
                    for ap in 0..n0 {
                        for bp in 0..n1 {
                            acc += table[(a + n0 - 1 - ap) * w1 + (b + n1 - 1 - bp)] * u[ap * n1 + bp];
                        }
                    }
                    out[a * n1 + b] = w * acc;
                }
            }
        }
    }
    out
}

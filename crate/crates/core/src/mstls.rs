//! Modified sequential thresholding least squares with automatic
//! threshold selection.
//!
//! For a threshold `lambda`, coefficient `i` survives an iteration when
//! `L_i <= |w_i| <= U_i` with
//!
//! ```text
//! L_i = lambda max(1, |b| / |G_i|),   U_i = (1/lambda) min(1, |b| / |G_i|)
//! ```
//!
//! and the threshold is the smallest grid value minimizing
//! `|G (w - w0)| / |G w0| + |w|_0 / J`, where `w0 = G^+ b`.

use nalgebra::{DMatrix, DVector, Dyn, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `10^linspace(lo, hi, n)`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![10f64.powf(lo)],
        _ => (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect(),
    }
}

/// 100 log-spaced thresholds from `1e-4` to `1`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(-4.0, 0.0, 100)
}

/// Full SVD whose reconstruction is verified. nalgebra 0.33 returns wrong
/// factorizations for some exactly rank-deficient inputs (tabulated
/// `grad |x|^2`, rank one with constant rows, is one); those fall back to
/// [`jacobi_svd`].
pub fn checked_svd(m: DMatrix<f64>) -> SVD<f64, Dyn, Dyn> {
    let scale = m.norm();
    let error = |svd: &SVD<f64, Dyn, Dyn>| {
        svd.clone().recompose().map(|r| (r - &m).norm()).unwrap_or(f64::INFINITY)
    };
    let svd = m.clone().svd(true, true);
    if error(&svd) <= 1e-12 * scale {
        return svd;
    }
    let svd = jacobi_svd(&m);
    let e = error(&svd);
    if e > 1e-12 * scale {
        log::warn!("SVD of a {}x{} matrix reconstructs to {:.1e}", m.nrows(), m.ncols(), e / scale);
    }
    svd
}

/// One-sided (Hestenes) Jacobi SVD. Slower than bidiagonalization but
/// unconditionally convergent; singular values are not sorted.
pub fn jacobi_svd(m: &DMatrix<f64>) -> SVD<f64, Dyn, Dyn> {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.transpose());
        return SVD {
            u: t.v_t.map(|v| v.transpose()),
            v_t: t.u.map(|u| u.transpose()),
            singular_values: t.singular_values,
        };
    }
    let (rows, n) = m.shape();
    let mut u = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let rotate = |mat: &mut DMatrix<f64>, len: usize, p: usize, q: usize, c: f64, s: f64| {
        let data = mat.as_mut_slice();
        let (lo, hi) = data.split_at_mut(q * len);
        let (cp, cq) = (&mut lo[p * len..(p + 1) * len], &mut hi[..len]);
        for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
            let (a, b) = (*x, *y);
            *x = c * a - s * b;
            *y = s * a + c * b;
        }
    };
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let data = u.as_slice();
                    let (cp, cq) = (&data[p * rows..(p + 1) * rows], &data[q * rows..(q + 1) * rows]);
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, rows, p, q, c, s);
                rotate(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = DVector::zeros(n);
    for (j, mut col) in u.column_iter_mut().enumerate() {
        let norm = col.norm();
        sv[j] = norm;
        if norm > 0.0 {
            col /= norm;
        }
    }
    SVD { u: Some(u), v_t: Some(v.transpose()), singular_values: sv }
}

/// Singular values of `g`, largest first.
pub fn singular_values(g: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = if g.nrows() > g.ncols() {
        checked_svd(g.clone().qr().r()).singular_values.iter().copied().collect()
    } else {
        checked_svd(g.clone()).singular_values.iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Minimum-norm least squares of `g[:, support] w = b`; zeros elsewhere.
///
/// Singular values at or below `max(n, J) * eps * sigma_max` are dropped.
pub fn least_squares(g: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> Vec<f64> {
    let cutoff_dim = g.nrows().max(g.ncols());
    solve_on(g, b, support, cutoff_dim)
}

fn solve_on(g: &DMatrix<f64>, b: &DVector<f64>, support: &[usize], cutoff_dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; g.ncols()];
    if support.is_empty() {
        return w;
    }
    let sub = g.select_columns(support);
    let svd = checked_svd(sub);
    let smax = svd.singular_values.max();
    let eps = cutoff_dim as f64 * f64::EPSILON * smax;
    if smax == 0.0 {
        return w;
    }
    let x = svd.solve(b, eps).expect("U and V were computed");
    for (k, &i) in support.iter().enumerate() {
        w[i] = x[k];
    }
    w
}

/// Result of thresholded least squares at one `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub coeffs: Vec<f64>,
    pub support: Vec<usize>,
    pub iterations: usize,
    /// True when every coefficient was thresholded away.
    pub degenerate: bool,
}

/// Problem `(G, b)` compressed by a thin QR factorization: least-squares
/// fits and residual differences only need `R` and `Q^T b`.
#[derive(Debug, Clone)]
pub struct Mstls {
    r: DMatrix<f64>,
    c: DVector<f64>,
    cutoff_dim: usize,
    col_norms: Vec<f64>,
    b_norm: f64,
    w0: Vec<f64>,
    g_w0: f64,
    pub max_iters: usize,
}

impl Mstls {
    pub fn new(g: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        if g.nrows() != b.len() || g.ncols() == 0 || g.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "G is {}x{} but b has length {}",
                g.nrows(),
                g.ncols(),
                b.len()
            )));
        }
        let cutoff_dim = g.nrows().max(g.ncols());
        let (r, c) = if g.nrows() > g.ncols() {
            let qr = g.clone().qr();
            let c = qr.q().transpose() * b;
            (qr.r(), c)
        } else {
            (g.clone(), b.clone())
        };
        let col_norms: Vec<f64> = g.column_iter().map(|c| c.norm()).collect();
        let all: Vec<usize> = (0..g.ncols()).collect();
        let w0 = solve_on(&r, &c, &all, cutoff_dim);
        let g_w0 = (&r * DVector::from_column_slice(&w0)).norm();
        Ok(Mstls { r, c, cutoff_dim, col_norms, b_norm: b.norm(), w0, g_w0, max_iters: g.ncols() })
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// `G^+ b`.
    pub fn pseudoinverse_solution(&self) -> &[f64] {
        &self.w0
    }

    fn bounds(&self, i: usize, lambda: f64) -> (f64, f64) {
        let ratio = if self.col_norms[i] > 0.0 { self.b_norm / self.col_norms[i] } else { f64::INFINITY };
        (lambda * ratio.max(1.0), ratio.min(1.0) / lambda)
    }

    fn admissible(&self, w: &[f64], lambda: f64) -> Vec<usize> {
        (0..w.len())
            .filter(|&i| {
                let (lo, hi) = self.bounds(i, lambda);
                let a = w[i].abs();
                w[i] != 0.0 && lo <= a && a <= hi
            })
            .collect()
    }

    /// Thresholded least squares at `lambda`.
    pub fn at(&self, lambda: f64) -> Result<ThresholdFit> {
        if !(lambda >= 0.0) {
            return Err(Error::NegativeThreshold(lambda));
        }
        let all: Vec<usize> = (0..self.ncols()).collect();
        if lambda == 0.0 {
            return Ok(ThresholdFit { coeffs: self.w0.clone(), support: all, iterations: 0, degenerate: false });
        }
        let mut w = self.w0.clone();
        let mut support = all;
        let mut iterations = 0;
        while iterations < self.max_iters {
            let next = self.admissible(&w, lambda);
            if next.is_empty() {
                return Ok(ThresholdFit { coeffs: vec![0.0; self.ncols()], support: next, iterations, degenerate: true });
            }
            if next == support {
                break;
            }
            w = solve_on(&self.r, &self.c, &next, self.cutoff_dim);
            support = next;
            iterations += 1;
        }
        // the refit can zero a coefficient exactly
        let support: Vec<usize> = support.into_iter().filter(|&i| w[i] != 0.0).collect();
        let degenerate = support.is_empty();
        Ok(ThresholdFit { coeffs: w, support, iterations, degenerate })
    }

    /// `|G (w - w0)| / |G w0| + |w|_0 / J`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let diff = DVector::from_iterator(w.len(), w.iter().zip(&self.w0).map(|(a, b)| a - b));
        let fit = if self.g_w0 > 0.0 { (&self.r * diff).norm() / self.g_w0 } else { 0.0 };
        let nnz = w.iter().filter(|v| **v != 0.0).count();
        fit + nnz as f64 / self.ncols() as f64
    }

    /// Evaluates every threshold in `grid` and keeps the smallest minimizer
    /// of the loss among non-degenerate fits.
    pub fn select(&self, grid: &[f64]) -> Result<SparseSolution> {
        if grid.is_empty() {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        let fits = grid
            .par_iter()
            .map(|&l| self.at(l).map(|f| (l, f)))
            .collect::<Result<Vec<_>>>()?;
        let curve: Vec<LossPoint> = fits
            .iter()
            .map(|(l, f)| LossPoint {
                lambda: *l,
                loss: self.loss(&f.coeffs),
                support_size: f.support.len(),
                degenerate: f.degenerate,
            })
            .collect();
        let mut best: Option<usize> = None;
        for (k, p) in curve.iter().enumerate() {
            if p.degenerate {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => p.loss < curve[b].loss || (p.loss == curve[b].loss && p.lambda < curve[b].lambda),
            };
            if better {
                best = Some(k);
            }
        }
        let k = best.ok_or(Error::AllDegenerate)?;
        let fit = &fits[k].1;
        let residual = self.residual(&fit.coeffs);
        Ok(SparseSolution {
            coeffs: fit.coeffs.clone(),
            lambda: curve[k].lambda,
            loss: curve[k].loss,
            support: fit.support.clone(),
            iterations: fit.iterations,
            residual,
            curve,
        })
    }

    /// `|G w - b| / |b|` (exact up to the component of `b` outside
    /// range(Q), which is added back).
    pub fn residual(&self, w: &[f64]) -> f64 {
        let inside = (&self.r * DVector::from_column_slice(w) - &self.c).norm_squared();
        let outside = (self.b_norm * self.b_norm - self.c.norm_squared()).max(0.0);
        (inside + outside).sqrt() / self.b_norm
    }
}

/// One point of the loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub lambda: f64,
    pub loss: f64,
    pub support_size: usize,
    pub degenerate: bool,
}

/// Selected sparse model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseSolution {
    pub coeffs: Vec<f64>,
    pub lambda: f64,
    pub loss: f64,
    pub support: Vec<usize>,
    pub iterations: usize,
    /// `|G w - b| / |b|`.
    pub residual: f64,
    pub curve: Vec<LossPoint>,
}

/// Thresholded least squares at one `lambda`.
pub fn mstls_at(g: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<ThresholdFit> {
    Mstls::new(g, b)?.at(lambda)
}

/// Threshold selection over `grid`.
pub fn select_lambda(g: &DMatrix<f64>, b: &DVector<f64>, grid: &[f64]) -> Result<SparseSolution> {
    Mstls::new(g, b)?.select(grid)
}

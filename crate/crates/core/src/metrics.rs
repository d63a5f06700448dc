//! Recovery scores: support ratios, function errors and convergence rates.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::library::{center_points, Block, TrialLibrary};

/// `TP / (TP + FN + FP)` on the nonzero patterns of `w_hat` and `w_true`.
pub fn tpr(w_hat: &[f64], w_true: &[f64]) -> Result<f64> {
    ratio(w_hat, w_true, |_| true)
}

/// [`tpr`] restricted to the interaction and local-force columns.
pub fn tpr_drift(w_hat: &[f64], w_true: &[f64], lib: &TrialLibrary) -> Result<f64> {
    ratio(w_hat, w_true, |j| lib.block(j) != Block::Sigma)
}

fn ratio(w_hat: &[f64], w_true: &[f64], keep: impl Fn(usize) -> bool) -> Result<f64> {
    if w_hat.len() != w_true.len() {
        return Err(Error::Dimension(format!("{} vs {} coefficients", w_hat.len(), w_true.len())));
    }
    let (mut tp, mut fn_, mut fp) = (0usize, 0usize, 0usize);
    for (j, (a, b)) in w_hat.iter().zip(w_true).enumerate() {
        if !keep(j) {
            continue;
        }
        match (*a != 0.0, *b != 0.0) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => {}
        }
    }
    let total = tp + fn_ + fp;
    if total == 0 {
        return Err(Error::Metric("both supports are empty".into()));
    }
    Ok(tp as f64 / total as f64)
}

/// Relative l2 errors of the recovered force fields and diffusivity.
/// A block whose true part vanishes has no error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionErrors {
    pub k: Option<f64>,
    pub v: Option<f64>,
    pub sigma: Option<f64>,
}

/// Errors of `grad K` on C - C, `grad V` on C and `sigma` on C, where
/// `sigma` is the symmetric square root of `2 sum_j w_j f_j A_j`.
pub fn function_errors(w_hat: &[f64], w_true: &[f64], lib: &TrialLibrary, grid: &Grid) -> Result<FunctionErrors> {
    if w_hat.len() != lib.len() || w_true.len() != lib.len() {
        return Err(Error::Dimension("coefficient vectors do not match the library".into()));
    }
    let d = grid.dim();
    let kr = lib.block_range(Block::K);
    let vr = lib.block_range(Block::V);
    let sr = lib.block_range(Block::Sigma);

    let k = if w_true[kr.clone()].iter().any(|v| *v != 0.0) {
        let offsets: Vec<Vec<f64>> = (0..d).map(|a| grid.offsets(a)).collect();
        let shape: Vec<usize> = offsets.iter().map(Vec::len).collect();
        let size: usize = shape.iter().product();
        let mut x = vec![0.0; d];
        let mut g = vec![0.0; d];
        let (mut num, mut den) = (0.0, 0.0);
        for flat in 0..size {
            let mut rest = flat;
            for a in (0..d).rev() {
                x[a] = offsets[a][rest % shape[a]];
                rest /= shape[a];
            }
            let (mut est, mut tru) = (vec![0.0; d], vec![0.0; d]);
            for j in kr.clone() {
                if w_hat[j] == 0.0 && w_true[j] == 0.0 {
                    continue;
                }
                lib.k_grad(j, &x, &mut g);
                for a in 0..d {
                    est[a] += w_hat[j] * g[a];
                    tru[a] += w_true[j] * g[a];
                }
            }
            num += est.iter().zip(&tru).map(|(e, t)| (e - t).powi(2)).sum::<f64>();
            den += tru.iter().map(|t| t * t).sum::<f64>();
        }
        Some(rel(num, den)?)
    } else {
        None
    };

    let points = center_points(grid);
    let v = if w_true[vr.clone()].iter().any(|v| *v != 0.0) {
        let mut g = vec![0.0; d];
        let (mut num, mut den) = (0.0, 0.0);
        for x in points.chunks_exact(d) {
            let (mut est, mut tru) = (vec![0.0; d], vec![0.0; d]);
            for j in vr.clone() {
                if w_hat[j] == 0.0 && w_true[j] == 0.0 {
                    continue;
                }
                lib.v_terms[j - vr.start].grad.eval(x, &mut g);
                for a in 0..d {
                    est[a] += w_hat[j] * g[a];
                    tru[a] += w_true[j] * g[a];
                }
            }
            num += est.iter().zip(&tru).map(|(e, t)| (e - t).powi(2)).sum::<f64>();
            den += tru.iter().map(|t| t * t).sum::<f64>();
        }
        Some(rel(num, den)?)
    } else {
        None
    };

    let sigma = if w_true[sr.clone()].iter().any(|v| *v != 0.0) {
        let (mut num, mut den) = (0.0, 0.0);
        let mut nu = vec![0.0; d * d];
        for x in points.chunks_exact(d) {
            lib.half_diffusion(&w_hat[sr.clone()], x, &mut nu);
            let est = psd_sqrt(&nu, d, 2.0);
            lib.half_diffusion(&w_true[sr.clone()], x, &mut nu);
            let tru = psd_sqrt(&nu, d, 2.0);
            num += est.iter().zip(&tru).map(|(e, t)| (e - t).powi(2)).sum::<f64>();
            den += tru.iter().map(|t| t * t).sum::<f64>();
        }
        Some(rel(num, den)?)
    } else {
        None
    };
    Ok(FunctionErrors { k, v, sigma })
}

fn rel(num: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::Metric("true field vanishes on the grid".into()));
    }
    Ok((num / den).sqrt())
}

/// Symmetric square root of `scale * m`, clamping negative eigenvalues.
pub fn psd_sqrt(m: &[f64], d: usize, scale: f64) -> Vec<f64> {
    if d == 1 {
        return vec![(scale * m[0]).max(0.0).sqrt()];
    }
    let mat = DMatrix::from_row_slice(d, d, m) * scale;
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    (0..d * d).map(|k| out[(k / d, k % d)]).collect()
}

/// Least-squares slope of `log(error)` against `log(N)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Metric("need at least three points for a rate".into()));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) || points[0].0 <= 0.0 {
        return Err(Error::Metric("N must be positive and increasing".into()));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Metric("errors must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Mean and median of the finite entries.
pub fn mean_median(values: &[f64]) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 0 { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] };
    Some((mean, median))
}

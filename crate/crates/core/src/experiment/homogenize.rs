//! Effective diffusivity of the oscillating-coefficient model.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Tensor Gauss rule with `panels` equal panels per axis.
fn integrate(lo: [f64; 2], hi: [f64; 2], panels: usize, f: &impl Fn(f64, f64) -> f64) -> f64 {
    let (gx, gw) = gauss_legendre(8);
    let axis = |a: usize| -> Vec<(f64, f64)> {
        let w = (hi[a] - lo[a]) / panels as f64;
        (0..panels)
            .flat_map(|p| {
                let mid = lo[a] + (p as f64 + 0.5) * w;
                gx.iter().zip(&gw).map(move |(x, wt)| (mid + 0.5 * w * x, 0.5 * w * wt)).collect::<Vec<_>>()
            })
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    xs.iter()
        .map(|&(x, wx)| wx * ys.iter().map(|&(y, wy)| wy * f(x, y)).sum::<f64>())
        .sum()
}

/// `|D| / int_D 1 / (1 + a cos(w x) cos(w y))`: the constant diffusivity of
/// the homogenized equation on the grid's domain.
///
/// Panels are refined by doubling until successive values agree to 1e-6
/// relative.
pub fn harmonic_mean_diffusivity(grid: &Grid, omega: f64, amplitude: f64) -> Result<f64> {
    if grid.dim() != 2 {
        return Err(Error::Dimension("homogenized diffusivity needs a 2D grid".into()));
    }
    if !(omega > 0.0) || !(amplitude.abs() < 1.0) {
        return Err(Error::Config(format!(
            "need omega > 0 and |amplitude| < 1, got omega={omega}, amplitude={amplitude}"
        )));
    }
    let (x0, x1) = grid.bounds(0);
    let (y0, y1) = grid.bounds(1);
    let area = (x1 - x0) * (y1 - y0);
    let f = |x: f64, y: f64| 1.0 / (1.0 + amplitude * (omega * x).cos() * (omega * y).cos());
    let span = (x1 - x0).max(y1 - y0);
    let mut panels = ((span * omega / std::f64::consts::PI).ceil() as usize).max(4);
    let mut prev = area / integrate([x0, y0], [x1, y1], panels, &f);
    for _ in 0..8 {
        panels *= 2;
        let next = area / integrate([x0, y0], [x1, y1], panels, &f);
        if ((next - prev) / next).abs() < 1e-6 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!("harmonic mean not converged after {panels} panels per axis")))
}

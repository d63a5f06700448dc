//! Mean pairwise forces `(1/N) sum_j grad K(x_i - x_j)`.

use std::f64::consts::PI;

use super::model::Interaction;

/// Reusable buffers for force evaluation.
#[derive(Debug, Default)]
pub struct ForceScratch {
    order: Vec<usize>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    diff: Vec<f64>,
    grad: Vec<f64>,
}

/// Writes `(1/N) sum_j grad K(x_i - x_j)` for every particle into `out`.
///
/// The one-dimensional QANR kernel uses an exact sort-based evaluation and
/// the planar log kernel a clamped pair loop with a sorted core correction; everything else goes
/// through [`mean_interaction_direct`].
pub fn mean_interaction(
    kernel: &Interaction,
    pos: &[f64],
    dim: usize,
    out: &mut [f64],
    scratch: &mut ForceScratch,
) {
    match kernel {
        Interaction::None => out.iter_mut().for_each(|o| *o = 0.0),
        Interaction::Qanr if dim == 1 => qanr_sorted(pos, out, scratch),
        Interaction::LogCutoff { delta } if dim == 2 => log_cutoff_pairs(pos, *delta, out, scratch),
        _ => mean_interaction_direct(kernel, pos, dim, out, scratch),
    }
}

/// Plain O(N^2) double loop over all ordered pairs.
pub fn mean_interaction_direct(
    kernel: &Interaction,
    pos: &[f64],
    dim: usize,
    out: &mut [f64],
    scratch: &mut ForceScratch,
) {
    let n = pos.len() / dim;
    scratch.diff.resize(dim, 0.0);
    scratch.grad.resize(dim, 0.0);
    for i in 0..n {
        let xi = &pos[i * dim..(i + 1) * dim];
        let acc = &mut out[i * dim..(i + 1) * dim];
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..n {
            let xj = &pos[j * dim..(j + 1) * dim];
            for c in 0..dim {
                scratch.diff[c] = xi[c] - xj[c];
            }
            kernel.grad(&scratch.diff, &mut scratch.grad);
            for c in 0..dim {
                acc[c] += scratch.grad[c];
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
}

/// `sum_j (x_i - x_j - sign(x_i - x_j)) = N x_i - S - (#below - #above)`.
fn qanr_sorted(pos: &[f64], out: &mut [f64], scratch: &mut ForceScratch) {
    let n = pos.len();
    let order = &mut scratch.order;
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| pos[a].total_cmp(&pos[b]));
    let total: f64 = pos.iter().sum();
    let nf = n as f64;
    let mut start = 0;
    while start < n {
        let v = pos[order[start]];
        let mut end = start + 1;
        while end < n && pos[order[end]] == v {
            end += 1;
        }
        let below = start as f64;
        let above = (n - end) as f64;
        let f = (nf * v - total - (below - above)) / nf;
        for &i in &order[start..end] {
            out[i] = f;
        }
        start = end;
    }
}

const LANES: usize = 4;

/// Row-wise pair sums over all `j` with `LANES` independent accumulators.
/// The main loop clamps every pair at `1/delta^2`, which is exact outside
/// the cutoff core. Particles are sorted by `x` so the few core pairs are
/// found by a short scan around each row and corrected afterwards.
fn log_cutoff_pairs(pos: &[f64], delta: f64, out: &mut [f64], scratch: &mut ForceScratch) {
    let n = pos.len() / 2;
    let ForceScratch { order, xs, ys, grad, .. } = scratch;
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| pos[2 * a].total_cmp(&pos[2 * b]));
    xs.clear();
    ys.clear();
    xs.extend(order.iter().map(|&i| pos[2 * i]));
    ys.extend(order.iter().map(|&i| pos[2 * i + 1]));
    grad.resize(2 * n, 0.0);
    #[cfg(target_arch = "x86_64")]
    if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
        // SAFETY: the required features were detected at runtime.
        unsafe { clamped_rows_avx2(xs, ys, delta * delta, grad) };
    } else {
        clamped_rows(xs, ys, delta * delta, grad);
    }
    #[cfg(not(target_arch = "x86_64"))]
    clamped_rows(xs, ys, delta * delta, grad);

    let d2 = delta * delta;
    let scale = 1.0 / (2.0 * PI * n as f64);
    for i in 0..n {
        let (xi, yi) = (xs[i], ys[i]);
        let (mut sx, mut sy) = (grad[2 * i], grad[2 * i + 1]);
        let mut fix = |k: usize| {
            let (dx, dy) = (xi - xs[k], yi - ys[k]);
            let r2 = dx * dx + dy * dy;
            if r2 < d2 && r2 > 0.0 {
                let (gx, gy) = pair(dx, dy, delta);
                sx += gx - dx / d2;
                sy += gy - dy / d2;
            }
        };
        let lo = xs[..i].partition_point(|&x| x <= xi - delta);
        let hi = i + xs[i..].partition_point(|&x| x < xi + delta);
        (lo..hi).for_each(&mut fix);
        out[2 * order[i]] = sx * scale;
        out[2 * order[i] + 1] = sy * scale;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn clamped_rows_avx2(xs: &[f64], ys: &[f64], d2: f64, out: &mut [f64]) {
    clamped_rows(xs, ys, d2, out);
}

/// `sum_j (x_i - x_j) / max(|x_i - x_j|^2, d2)` per row, zero for `i = j`.
#[inline(always)]
fn clamped_rows(xs: &[f64], ys: &[f64], d2: f64, out: &mut [f64]) {
    let n = xs.len();
    let full = n / LANES * LANES;
    for i in 0..n {
        let (xi, yi) = (xs[i], ys[i]);
        let mut ax = [0.0; LANES];
        let mut ay = [0.0; LANES];
        for (cx, cy) in xs[..full].chunks_exact(LANES).zip(ys[..full].chunks_exact(LANES)) {
            for l in 0..LANES {
                let (dx, dy) = (xi - cx[l], yi - cy[l]);
                let r2 = dx * dx + dy * dy;
                let g = if r2 > 0.0 { 1.0 / r2.max(d2) } else { 0.0 };
                ax[l] += g * dx;
                ay[l] += g * dy;
            }
        }
        for k in full..n {
            let (dx, dy) = (xi - xs[k], yi - ys[k]);
            let r2 = dx * dx + dy * dy;
            let g = if r2 > 0.0 { 1.0 / r2.max(d2) } else { 0.0 };
            ax[0] += g * dx;
            ay[0] += g * dy;
        }
        out[2 * i] = ax.iter().sum();
        out[2 * i + 1] = ay.iter().sum();
    }
}

/// `x / max(|x|^2, delta |x|)`, zero at the origin.
#[inline(always)]
fn pair(dx: f64, dy: f64, delta: f64) -> (f64, f64) {
    let r2 = dx * dx + dy * dy;
    let denom = r2.max(delta * r2.sqrt());
    let g = if r2 > 0.0 { 1.0 / denom } else { 0.0 };
    (g * dx, g * dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random_positions(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0, Purpose::Synthetic);
        (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn sorted_qanr_matches_direct_sum() {
        let mut pos = random_positions(300, 1, 1);
        // ties: coincident particles contribute sign(0) = 0
        pos[7] = pos[3];
        pos[8] = pos[3];
        let mut fast = vec![0.0; 300];
        let mut slow = vec![0.0; 300];
        let mut s = ForceScratch::default();
        mean_interaction(&Interaction::Qanr, &pos, 1, &mut fast, &mut s);
        mean_interaction_direct(&Interaction::Qanr, &pos, 1, &mut slow, &mut s);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn log_pairs_match_direct_sum() {
        let mut pos = random_positions(203, 2, 2);
        // one pair inside the cutoff core
        pos[2] = pos[0] + 0.003;
        pos[3] = pos[1] - 0.002;
        let k = Interaction::LogCutoff { delta: 0.01 };
        let mut fast = vec![0.0; 406];
        let mut slow = vec![0.0; 406];
        let mut s = ForceScratch::default();
        mean_interaction(&k, &pos, 2, &mut fast, &mut s);
        mean_interaction_direct(&k, &pos, 2, &mut slow, &mut s);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn clumped_log_pairs_match_direct_sum() {
        // most pairs inside the core, plus exact duplicates
        let mut pos: Vec<f64> = random_positions(150, 2, 3).iter().map(|v| v * 0.02).collect();
        pos[10] = pos[20];
        pos[11] = pos[21];
        let k = Interaction::LogCutoff { delta: 0.01 };
        let mut fast = vec![0.0; 300];
        let mut slow = vec![0.0; 300];
        let mut s = ForceScratch::default();
        mean_interaction(&k, &pos, 2, &mut fast, &mut s);
        mean_interaction_direct(&k, &pos, 2, &mut slow, &mut s);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn forces_sum_to_zero() {
        // antisymmetric kernels conserve momentum
        let pos = random_positions(64, 2, 5);
        let mut f = vec![0.0; 128];
        let mut s = ForceScratch::default();
        mean_interaction(&Interaction::LogCutoff { delta: 0.01 }, &pos, 2, &mut f, &mut s);
        let sx: f64 = f.iter().step_by(2).sum();
        assert!(sx.abs() < 1e-10);
    }
}

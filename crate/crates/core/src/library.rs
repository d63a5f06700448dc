//! Candidate term libraries for the interaction, local and diffusion blocks.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::preset::Preset;
use crate::sim::{ScalarField, VectorField, LOG_CUTOFF};

/// Default relative truncation tolerance for low-rank kernel tables.
pub const LOW_RANK_TOL: f64 = 1e-8;

/// Canonical term descriptors.
pub mod desc {
    pub fn k_power(m: u32) -> String {
        format!("K |x|^{m}")
    }
    pub fn k_cutoff_sqrt() -> String {
        "K [|x|^(1/2)]_d".into()
    }
    pub fn k_cutoff_xlogx() -> String {
        "K [|x|(log|x|-1)]_d".into()
    }
    pub fn k_cutoff_log() -> String {
        "K [log|x|]_d".into()
    }
    /// One-dimensional local force `dV/dx = x^m`.
    pub fn v_drift_monomial(m: u32) -> String {
        format!("V dV/dx=x^{m}")
    }
    /// Potential `x1^m x2^n`.
    pub fn v_potential_monomial(m: u32, n: u32) -> String {
        format!("V x1^{m}x2^{n}")
    }
    /// Local force `grad V = e_i cos(m x1) cos(n x2)`.
    pub fn v_cos(i: usize, m: u32, n: u32) -> String {
        format!("V e{i} cos({m}x1)cos({n}x2)")
    }
    /// `d_xx (U x^m)`.
    pub fn s_monomial(m: u32) -> String {
        format!("S x^{m}")
    }
    /// `Laplacian (U cos(m x1) cos(n x2))`.
    pub fn s_lap_cos(m: u32, n: u32) -> String {
        format!("S lap cos({m}x1)cos({n}x2)")
    }
    /// `d_i d_j (U cos(m x1) cos(n x2))`, symmetrized for `i != j`.
    pub fn s_mixed_cos(i: usize, j: usize, m: u32, n: u32) -> String {
        format!("S d{i}{j} cos({m}x1)cos({n}x2)")
    }
}

/// Column block of the weak system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Block {
    K,
    V,
    Sigma,
}

/// Radial profile `f(r)` used for `K(x) = f(|x|)`; only `f'` is needed.
#[derive(Clone)]
pub enum Radial {
    /// `r^a`
    Power(f64),
    /// `[r^(1/2)]_delta`
    CutoffSqrt(f64),
    /// `[r (log r - 1)]_delta`
    CutoffXLogX(f64),
    /// `[log r]_delta`
    CutoffLog(f64),
}

impl Radial {
    /// `f'(r)` for `r > 0`.
    pub fn slope(&self, r: f64) -> f64 {
        match *self {
            Radial::Power(a) => a * r.powf(a - 1.0),
            Radial::CutoffSqrt(d) => 0.5 / r.max(d).sqrt(),
            Radial::CutoffXLogX(d) => r.max(d).ln(),
            Radial::CutoffLog(d) => 1.0 / r.max(d),
        }
    }
}

/// Gradient of an interaction candidate.
#[derive(Clone)]
pub enum KernelGrad {
    Radial(Radial),
    Custom(VectorField),
}

impl KernelGrad {
    /// `grad K(x)`, with `grad K(0) = 0`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if x.iter().all(|v| *v == 0.0) {
            return;
        }
        match self {
            KernelGrad::Radial(f) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let g = f.slope(r) / r;
                for (o, v) in out.iter_mut().zip(x) {
                    *o = g * v;
                }
            }
            KernelGrad::Custom(f) => f(x, out),
        }
    }
}

/// Local force candidate `grad V_j(x)`.
#[derive(Clone)]
pub enum LocalGrad {
    /// `x^m` (one dimension).
    Monomial(u32),
    /// `grad (x1^m x2^n)`.
    PotentialMonomial(u32, u32),
    /// `e_axis cos(m x1) cos(n x2)` (axis is 0-based).
    Cos { axis: usize, m: u32, n: u32 },
    Custom(VectorField),
}

impl LocalGrad {
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match *self {
            LocalGrad::Monomial(m) => out[0] = x[0].powi(m as i32),
            LocalGrad::PotentialMonomial(m, n) => {
                let (a, b) = (x[0], x[1]);
                if m > 0 {
                    out[0] = m as f64 * a.powi(m as i32 - 1) * b.powi(n as i32);
                }
                if n > 0 {
                    out[1] = n as f64 * a.powi(m as i32) * b.powi(n as i32 - 1);
                }
            }
            LocalGrad::Cos { axis, m, n } => {
                out[axis] = (m as f64 * x[0]).cos() * (n as f64 * x[1]).cos();
            }
            LocalGrad::Custom(ref f) => f(x, out),
        }
    }
}

/// Scalar factor `f_j(x)` of a diffusion candidate.
#[derive(Clone)]
pub enum ScalarTerm {
    /// `x^m` (one dimension).
    Monomial(u32),
    /// `cos(m x1) cos(n x2)`.
    Cos(u32, u32),
    Custom(ScalarField),
}

impl ScalarTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            ScalarTerm::Monomial(m) => x[0].powi(m as i32),
            ScalarTerm::Cos(m, n) => (m as f64 * x[0]).cos() * (n as f64 * x[1]).cos(),
            ScalarTerm::Custom(ref f) => f(x),
        }
    }
}

#[derive(Clone)]
pub struct KTerm {
    pub desc: String,
    pub grad: KernelGrad,
}

#[derive(Clone)]
pub struct VTerm {
    pub desc: String,
    pub grad: LocalGrad,
}

/// Diffusion candidate `sum_pq A_pq d_p d_q (U f)`: its coefficient `c`
/// contributes `c f(x) A` to the matrix `(1/2) sigma sigma^T`.
#[derive(Clone)]
pub struct STerm {
    pub desc: String,
    pub scalar: ScalarTerm,
    /// Row-major symmetric `d x d` pattern `A`.
    pub pattern: Vec<f64>,
}

impl STerm {
    fn laplacian(desc: String, scalar: ScalarTerm, d: usize) -> STerm {
        let mut pattern = vec![0.0; d * d];
        (0..d).for_each(|i| pattern[i * d + i] = 1.0);
        STerm { desc, scalar, pattern }
    }

    fn mixed(desc: String, scalar: ScalarTerm, d: usize, i: usize, j: usize) -> STerm {
        let mut pattern = vec![0.0; d * d];
        pattern[i * d + j] = 1.0;
        pattern[j * d + i] = 1.0;
        STerm { desc, scalar, pattern }
    }
}

/// Library `L = (L_K, L_V, L_sigma)`; columns are ordered `[K | V | sigma]`.
#[derive(Clone)]
pub struct TrialLibrary {
    pub name: String,
    pub dim: usize,
    pub k_terms: Vec<KTerm>,
    pub v_terms: Vec<VTerm>,
    pub s_terms: Vec<STerm>,
    /// Cutoff radius of `[.]_delta` candidates, if any.
    pub delta: Option<f64>,
    pub tol: f64,
}

impl std::fmt::Debug for TrialLibrary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrialLibrary")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("descriptors", &self.descriptors())
            .finish()
    }
}

impl TrialLibrary {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        k_terms: Vec<KTerm>,
        v_terms: Vec<VTerm>,
        s_terms: Vec<STerm>,
    ) -> Result<Self> {
        let lib = TrialLibrary { name: name.into(), dim, k_terms, v_terms, s_terms, delta: None, tol: LOW_RANK_TOL };
        if lib.is_empty() {
            return Err(Error::Library("library has no terms".into()));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::Library(format!("unsupported dimension {dim}")));
        }
        let mut seen = HashSet::new();
        for d in lib.descriptors() {
            if !seen.insert(d.clone()) {
                return Err(Error::Library(format!("duplicate descriptor `{d}`")));
            }
        }
        if lib.s_terms.iter().any(|s| s.pattern.len() != dim * dim) {
            return Err(Error::Library("diffusion pattern must be d x d".into()));
        }
        Ok(lib)
    }

    pub fn preset(preset: Preset) -> TrialLibrary {
        match preset {
            Preset::Qanr1d => qanr1d_library(),
            Preset::Cos2d => cos2d_library(),
            Preset::Log2d => log2d_library(),
        }
    }

    /// Total column count `J`.
    pub fn len(&self) -> usize {
        self.k_terms.len() + self.v_terms.len() + self.s_terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_sizes(&self) -> (usize, usize, usize) {
        (self.k_terms.len(), self.v_terms.len(), self.s_terms.len())
    }

    pub fn block(&self, j: usize) -> Block {
        let (k, v, _) = self.block_sizes();
        if j < k {
            Block::K
        } else if j < k + v {
            Block::V
        } else {
            Block::Sigma
        }
    }

    pub fn block_range(&self, b: Block) -> std::ops::Range<usize> {
        let (k, v, s) = self.block_sizes();
        match b {
            Block::K => 0..k,
            Block::V => k..k + v,
            Block::Sigma => k + v..k + v + s,
        }
    }

    pub fn descriptors(&self) -> Vec<String> {
        self.k_terms
            .iter()
            .map(|t| t.desc.clone())
            .chain(self.v_terms.iter().map(|t| t.desc.clone()))
            .chain(self.s_terms.iter().map(|t| t.desc.clone()))
            .collect()
    }

    pub fn column(&self, desc: &str) -> Option<usize> {
        self.descriptors().iter().position(|d| d == desc)
    }

    /// Dense coefficient vector from `(descriptor, value)` pairs. Every
    /// descriptor must name a library column.
    pub fn coefficients(&self, terms: &[(String, f64)]) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.len()];
        for (d, v) in terms {
            let j = self
                .column(d)
                .ok_or_else(|| Error::Library(format!("true term `{d}` is not in library `{}`", self.name)))?;
            w[j] = *v;
        }
        Ok(w)
    }

    /// Text manifest: descriptors, block sizes, cutoff and tolerance.
    pub fn manifest(&self) -> String {
        let (k, v, s) = self.block_sizes();
        let mut out = String::new();
        let _ = writeln!(out, "library {} (d = {})", self.name, self.dim);
        let _ = writeln!(out, "blocks K={k} V={v} sigma={s} J={}", self.len());
        match self.delta {
            Some(d) => {
                let _ = writeln!(out, "cutoff delta={d}");
            }
            None => {
                let _ = writeln!(out, "cutoff none");
            }
        }
        let _ = writeln!(out, "low-rank tol={:e}", self.tol);
        for (j, d) in self.descriptors().iter().enumerate() {
            let _ = writeln!(out, "{j:4} {d}");
        }
        out
    }

    /// Evaluates `grad K_j` for K column `j` at `x`.
    pub fn k_grad(&self, j: usize, x: &[f64], out: &mut [f64]) {
        self.k_terms[j].grad.eval(x, out)
    }

    /// Matrix `sum_j w_j f_j(x) A_j` over the sigma block, row-major.
    pub fn half_diffusion(&self, w_sigma: &[f64], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (t, &c) in self.s_terms.iter().zip(w_sigma) {
            if c != 0.0 {
                let f = c * t.scalar.eval(x);
                for (o, a) in out.iter_mut().zip(&t.pattern) {
                    *o += f * a;
                }
            }
        }
    }
}

fn radial(desc: String, r: Radial) -> KTerm {
    KTerm { desc, grad: KernelGrad::Radial(r) }
}

fn qanr1d_library() -> TrialLibrary {
    let k = (1..=7).map(|m| radial(desc::k_power(m), Radial::Power(m as f64))).collect();
    let v = std::iter::once(0)
        .chain(2..=8)
        .map(|m| VTerm { desc: desc::v_drift_monomial(m), grad: LocalGrad::Monomial(m) })
        .collect();
    let s = (0..=8)
        .map(|m| STerm::laplacian(desc::s_monomial(m), ScalarTerm::Monomial(m), 1))
        .collect();
    TrialLibrary::new("qanr1d", 1, k, v, s).expect("preset library is valid")
}

fn cos2d_library() -> TrialLibrary {
    let k = (1..=7).map(|m| radial(desc::k_power(m), Radial::Power(m as f64))).collect();
    let mut v = Vec::new();
    for axis in 0..2 {
        for m in 0..=5 {
            for n in 0..=5 {
                v.push(VTerm { desc: desc::v_cos(axis + 1, m, n), grad: LocalGrad::Cos { axis, m, n } });
            }
        }
    }
    let mut s = Vec::new();
    for m in 0..=5 {
        for n in 0..=5 {
            s.push(STerm::laplacian(desc::s_lap_cos(m, n), ScalarTerm::Cos(m, n), 2));
        }
    }
    TrialLibrary::new("cos2d", 2, k, v, s).expect("preset library is valid")
}

fn log2d_library() -> TrialLibrary {
    let d = LOG_CUTOFF;
    let mut k: Vec<KTerm> = (2..=6).map(|m| radial(desc::k_power(m), Radial::Power(m as f64))).collect();
    k.push(radial(desc::k_cutoff_sqrt(), Radial::CutoffSqrt(d)));
    k.push(radial(desc::k_cutoff_xlogx(), Radial::CutoffXLogX(d)));
    k.push(radial(desc::k_cutoff_log(), Radial::CutoffLog(d)));
    let mut v = Vec::new();
    for total in 1..=6u32 {
        for m in (0..=total).rev() {
            let n = total - m;
            v.push(VTerm { desc: desc::v_potential_monomial(m, n), grad: LocalGrad::PotentialMonomial(m, n) });
        }
    }
    let mut s = Vec::new();
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        for (m, n) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            s.push(STerm::mixed(desc::s_mixed_cos(i + 1, j + 1, m, n), ScalarTerm::Cos(m, n), 2, i, j));
        }
    }
    let mut lib = TrialLibrary::new("log2d", 2, k, v, s).expect("preset library is valid");
    lib.delta = Some(d);
    lib
}

/// Gradient tables of one kernel on the difference grid C - C: one dense
/// array per spatial partial, row-major over `(2 n_a - 1)` points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub shape: Vec<usize>,
    pub partials: Vec<Vec<f64>>,
}

/// Tabulates `grad K` on C - C, forcing the zero offset to zero.
pub fn tabulate_kernel(term: &KTerm, grid: &Grid) -> Result<KernelTable> {
    let d = grid.dim();
    let axes: Vec<Vec<f64>> = (0..d).map(|a| grid.offsets(a)).collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let size: usize = shape.iter().product();
    let mut partials = vec![vec![0.0; size]; d];
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    for flat in 0..size {
        let mut rest = flat;
        for a in (0..d).rev() {
            x[a] = axes[a][rest % shape[a]];
            rest /= shape[a];
        }
        if x.iter().all(|v| *v == 0.0) {
            continue;
        }
        term.grad.eval(&x, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularKernel { term: term.desc.clone(), offset: x.clone() });
        }
        for a in 0..d {
            partials[a][flat] = g[a];
        }
    }
    Ok(KernelTable { shape, partials })
}

/// Truncated SVD `T = sum_q s_q u_q v_q^T` of a two-dimensional table.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl LowRank {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for q in 0..self.rank() {
            for i in 0..self.rows {
                let a = self.weights[q] * self.left[q][i];
                let row = &mut out[i * self.cols..(i + 1) * self.cols];
                for (o, b) in row.iter_mut().zip(&self.right[q]) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Keeps the leading singular triples until the Frobenius reconstruction
/// error is at most `tol` times the table norm.
pub fn low_rank(table: &[f64], rows: usize, cols: usize, tol: f64) -> LowRank {
    let m = DMatrix::from_row_slice(rows, cols, table);
    let svd = crate::mstls::checked_svd(m);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let total: f64 = s.iter().map(|v| v * v).sum();
    // tail[q] = sum of squares of singular values from q on
    let mut tail = vec![0.0; s.len() + 1];
    for q in (0..s.len()).rev() {
        tail[q] = tail[q + 1] + s[q] * s[q];
    }
    let keep = (0..=s.len()).find(|&q| tail[q] <= tol * tol * total).unwrap_or(s.len());
    LowRank {
        rows,
        cols,
        weights: s[..keep].to_vec(),
        left: order[..keep].iter().map(|&i| u.column(i).iter().copied().collect()).collect(),
        right: order[..keep].iter().map(|&i| vt.row(i).iter().copied().collect()).collect(),
    }
}

/// Evaluates `grad V_j` of every V column on the grid centers:
/// `out[j][a]` is the flat field of component `a`.
pub fn tabulate_local(lib: &TrialLibrary, grid: &Grid) -> Vec<Vec<Vec<f64>>> {
    let d = grid.dim();
    let points = center_points(grid);
    lib.v_terms
        .iter()
        .map(|t| {
            let mut comps = vec![vec![0.0; grid.cells()]; d];
            let mut g = vec![0.0; d];
            for (c, x) in points.chunks_exact(d).enumerate() {
                t.grad.eval(x, &mut g);
                for a in 0..d {
                    comps[a][c] = g[a];
                }
            }
            comps
        })
        .collect()
}

/// Evaluates `f_j` of every sigma column on the grid centers.
pub fn tabulate_diffusion(lib: &TrialLibrary, grid: &Grid) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let points = center_points(grid);
    lib.s_terms
        .iter()
        .map(|t| points.chunks_exact(d).map(|x| t.scalar.eval(x)).collect())
        .collect()
}

/// Coordinates of all centers, flat `cells * d`.
pub fn center_points(grid: &Grid) -> Vec<f64> {
    let d = grid.dim();
    let mut out = Vec::with_capacity(grid.cells() * d);
    for c in 0..grid.cells() {
        let idx = grid.unflatten(c);
        for a in 0..d {
            out.push(grid.center(a, idx[a]));
        }
    }
    out
}

/// Wraps a closure as a custom interaction candidate.
pub fn custom_kernel(desc: impl Into<String>, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> KTerm {
    KTerm { desc: desc.into(), grad: KernelGrad::Custom(Arc::new(f)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn preset_block_sizes() {
        assert_eq!(TrialLibrary::preset(Preset::Qanr1d).block_sizes(), (7, 8, 9));
        assert_eq!(TrialLibrary::preset(Preset::Cos2d).block_sizes(), (7, 72, 36));
        assert_eq!(TrialLibrary::preset(Preset::Log2d).block_sizes(), (8, 27, 18));
        assert_eq!(TrialLibrary::preset(Preset::Log2d).delta, Some(0.01));
    }

    #[test]
    fn catalog_truths_align_with_libraries() {
        for m in crate::sim::builtin_models() {
            let preset: Preset = m.name.split(':').next().unwrap().parse().unwrap();
            let lib = TrialLibrary::preset(preset);
            let g = Grid::new(vec![-5.0; m.dim], 10.0 / 64.0, vec![64; m.dim]).unwrap();
            let w = lib.coefficients(&m.true_terms(&g).unwrap()).unwrap();
            assert!(w.iter().any(|v| *v != 0.0), "{}", m.name);
        }
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let t = || VTerm { desc: "V a".into(), grad: LocalGrad::Monomial(1) };
        assert!(TrialLibrary::new("x", 1, vec![], vec![t(), t()], vec![]).is_err());
        assert!(TrialLibrary::new("x", 1, vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn constant_diffusion_candidate_is_one() {
        let lib = TrialLibrary::preset(Preset::Cos2d);
        let j = lib.column(&desc::s_lap_cos(0, 0)).unwrap() - lib.block_range(Block::Sigma).start;
        assert_eq!(lib.s_terms[j].scalar.eval(&[0.3, -1.2]), 1.0);
    }

    #[test]
    fn quadratic_kernel_table_is_linear_and_odd() {
        let g = Grid::new(vec![0.0], 0.1, vec![16]).unwrap();
        let t = tabulate_kernel(&radial(desc::k_power(2), Radial::Power(2.0)), &g).unwrap();
        let offs = g.offsets(0);
        for (v, x) in t.partials[0].iter().zip(&offs) {
            assert!((v - 2.0 * x).abs() < 1e-12);
        }
        assert_eq!(t.partials[0][15], 0.0);
    }

    #[test]
    fn qanr_combination_has_jump_and_zero_origin() {
        let g = Grid::new(vec![0.0], 0.25, vec![8]).unwrap();
        let lib = TrialLibrary::preset(Preset::Qanr1d);
        let t1 = tabulate_kernel(&lib.k_terms[0], &g).unwrap();
        let t2 = tabulate_kernel(&lib.k_terms[1], &g).unwrap();
        let grad: Vec<f64> = t1.partials[0].iter().zip(&t2.partials[0]).map(|(a, b)| -a + 0.5 * b).collect();
        assert_eq!(grad[7], 0.0);
        assert!((grad[8] - (0.25 - 1.0)).abs() < 1e-14);
        assert!((grad[6] - (-0.25 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn log_cutoff_table_matches_piecewise_gradient() {
        let g = Grid::new(vec![0.0, 0.0], 0.004, vec![10, 10]).unwrap();
        let lib = TrialLibrary::preset(Preset::Log2d);
        let t = tabulate_kernel(&lib.k_terms[7], &g).unwrap();
        let offs = g.offsets(0);
        let n = offs.len();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (offs[i], offs[j]);
                let r = (x * x + y * y).sqrt();
                if r == 0.0 {
                    assert_eq!(t.partials[0][i * n + j], 0.0);
                    continue;
                }
                let g = if r >= 0.01 { 1.0 / (r * r) } else { 1.0 / (0.01 * r) };
                // library candidates omit the 1/(2 pi) of the model potential
                assert!((t.partials[0][i * n + j] - g * x).abs() < 1e-9 * g.abs());
                assert!((t.partials[1][i * n + j] - g * y).abs() < 1e-9 * g.abs());
            }
        }
        let _ = PI;
    }

    #[test]
    fn singular_custom_kernel_is_rejected() {
        let g = Grid::new(vec![0.0], 0.5, vec![4]).unwrap();
        let k = custom_kernel("K 1/x", |x, o| o[0] = if x[0] > 0.4 { f64::INFINITY } else { 1.0 });
        assert!(matches!(tabulate_kernel(&k, &g), Err(Error::SingularKernel { .. })));
    }

    #[test]
    fn low_rank_separable_and_radial() {
        let (r, c) = (21, 17);
        let f: Vec<f64> = (0..r * c).map(|k| ((k / c) as f64).sin() * ((k % c) as f64 * 0.3).exp()).collect();
        assert_eq!(low_rank(&f, r, c, 1e-8).rank(), 1);

        let g = Grid::new(vec![0.0, 0.0], 0.05, vec![48, 48]).unwrap();
        let lib = TrialLibrary::preset(Preset::Log2d);
        for term in &lib.k_terms {
            let t = tabulate_kernel(term, &g).unwrap();
            let (n0, n1) = (t.shape[0], t.shape[1]);
            for p in &t.partials {
                let lr = low_rank(p, n0, n1, LOW_RANK_TOL);
                let rec = lr.reconstruct();
                let err: f64 = rec.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(err <= 1e-8 * norm, "{}", term.desc);
                assert!(lr.rank() < n0 / 2, "{} rank {}", term.desc, lr.rank());
            }
        }
        // d/dx1 |x|^2 = 2 x1 does not depend on x2
        let t = tabulate_kernel(&lib.k_terms[0], &g).unwrap();
        assert_eq!(low_rank(&t.partials[0], t.shape[0], t.shape[1], 1e-8).rank(), 1);
    }

    #[test]
    fn radial_tables_are_odd() {
        let g = Grid::new(vec![0.0, 0.0], 0.1, vec![9, 9]).unwrap();
        for term in &TrialLibrary::preset(Preset::Log2d).k_terms {
            let t = tabulate_kernel(term, &g).unwrap();
            let size = t.partials[0].len();
            for p in &t.partials {
                for k in 0..size {
                    assert!((p[k] + p[size - 1 - k]).abs() < 1e-12 * (1.0 + p[k].abs()));
                }
            }
        }
    }

    #[test]
    fn potential_monomial_gradient() {
        let mut o = [0.0; 2];
        LocalGrad::PotentialMonomial(2, 1).eval(&[3.0, 5.0], &mut o);
        assert_eq!(o, [30.0, 9.0]);
        LocalGrad::PotentialMonomial(0, 1).eval(&[3.0, 5.0], &mut o);
        assert_eq!(o, [0.0, 1.0]);
    }
}

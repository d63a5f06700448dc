//! Weak-form linear system `G w = b`.
//!
//! Row `k` tests the mean-field equation against `psi_k`, column `j` is a
//! library term:
//!
//! ```text
//! b_k    = <d_t psi_k, U>
//! G^K_kj = <grad psi_k, U (grad K_j * U)>
//! G^V_kj = <grad psi_k, U grad V_j>
//! G^S_kj = -sum_pq A_pq <d_p d_q psi_k, f_j U>
//! ```
//!
//! with `<f, g> = dt h^d sum_l w_l sum_c f g` (trapezoid in time, so
//! `w_l = 1/2` at the two ends). The `h^d` of the nonlocal integral lives in
//! the convolution, the `h^d` above in the test-function inner product.
//!
//! Space is contracted first, one timepoint at a time, onto the query
//! sublattice with separable stencils; the time contraction follows.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::convolution::{ConvPlan, ConvScratch, Spectrum};
use crate::error::{Error, Result};
use crate::grid::{Grid, HistogramField};
use crate::library::{
    low_rank, tabulate_diffusion, tabulate_kernel, tabulate_local, Block, TrialLibrary,
};
use crate::test_functions::{QueryLattice, TestBasis};

/// Assembled weak system.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSystem {
    /// `n x J`.
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub columns: Vec<String>,
    pub blocks: Vec<Block>,
    pub rows: QueryLattice,
}

impl WeakSystem {
    pub fn nrows(&self) -> usize {
        self.g.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.g.ncols()
    }

    /// `||G w - b|| / ||b||`.
    pub fn residual(&self, w: &[f64]) -> f64 {
        let r = &self.g * DVector::from_column_slice(w) - &self.b;
        r.norm() / self.b.norm()
    }

    /// Binary dump: magic `MFIDWS01`, `u64` n and J, then per column a
    /// block tag byte (0 K, 1 V, 2 sigma) and a `u32`-length UTF-8
    /// descriptor, then G column-major and b, all little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.nrows() as u64).to_le_bytes())?;
        w.write_all(&(self.ncols() as u64).to_le_bytes())?;
        for (d, b) in self.columns.iter().zip(&self.blocks) {
            let tag: u8 = match b {
                Block::K => 0,
                Block::V => 1,
                Block::Sigma => 2,
            };
            w.write_all(&[tag])?;
            w.write_all(&(d.len() as u32).to_le_bytes())?;
            w.write_all(d.as_bytes())?;
        }
        for v in self.g.iter().chain(self.b.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dump written by [`WeakSystem::write_to`]; row metadata is
    /// not stored, so `rows` comes back empty.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("not a weak-system dump".into()));
        }
        let n = read_u64(&mut r)? as usize;
        let j = read_u64(&mut r)? as usize;
        let mut columns = Vec::with_capacity(j);
        let mut blocks = Vec::with_capacity(j);
        for _ in 0..j {
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            blocks.push(match tag[0] {
                0 => Block::K,
                1 => Block::V,
                2 => Block::Sigma,
                t => return Err(Error::Format(format!("bad block tag {t}"))),
            });
            let mut len = [0u8; 4];
            r.read_exact(&mut len)?;
            let mut s = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut s)?;
            columns.push(String::from_utf8(s).map_err(|e| Error::Format(e.to_string()))?);
        }
        let mut vals = vec![0.0; n * j + n];
        for v in vals.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let b = DVector::from_column_slice(&vals[n * j..]);
        let g = DMatrix::from_column_slice(n, j, &vals[..n * j]);
        Ok(WeakSystem { g, b, columns, blocks, rows: QueryLattice { space: vec![], time: vec![] } })
    }
}

const DUMP_MAGIC: &[u8; 8] = b"MFIDWS01";

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Library tables prepared for one grid: kernel spectra, local force
/// fields and diffusion factors.
pub struct Assembler<'a> {
    lib: &'a TrialLibrary,
    grid: Grid,
    plan: ConvPlan,
    /// `[term][component]`
    kernels: Vec<Vec<Spectrum>>,
    /// `[term][component][cell]`
    local: Vec<Vec<Vec<f64>>>,
    /// `[term][cell]`
    diffusion: Vec<Vec<f64>>,
}

impl<'a> Assembler<'a> {
    pub fn new(lib: &'a TrialLibrary, grid: &Grid) -> Result<Self> {
        if lib.dim != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "library is {}-dimensional, grid is {}-dimensional",
                lib.dim,
                grid.dim()
            )));
        }
        let plan = ConvPlan::new(grid)?;
        let kernels = lib
            .k_terms
            .par_iter()
            .map(|t| {
                let table = tabulate_kernel(t, grid)?;
                table
                    .partials
                    .iter()
                    .map(|p| match grid.dim() {
                        1 => plan.kernel_spectrum(p, &table.shape),
                        _ => plan.low_rank_spectrum(&low_rank(p, table.shape[0], table.shape[1], lib.tol)),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Assembler {
            lib,
            grid: grid.clone(),
            plan,
            kernels,
            local: tabulate_local(lib, grid),
            diffusion: tabulate_diffusion(lib, grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Assembles `(G, b)` from the density `u` and test basis.
    pub fn assemble(&self, u: &HistogramField, basis: &TestBasis) -> Result<WeakSystem> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch("density grid differs from the library grid".into()));
        }
        let lib = self.lib;
        let jn = lib.len();
        let nrows = basis.len();
        if nrows < jn {
            log::warn!("weak system has fewer test functions ({nrows}) than library terms ({jn})");
        }
        let q = &basis.queries;
        let nqs = q.spatial_count();
        let m_t = basis.time.m;
        let lt = u.timepoints();
        if q.time.iter().any(|&t| t < m_t || t + m_t >= lt) {
            return Err(Error::GridMismatch("query times exceed the density's time range".into()));
        }
        let lo = q.time.first().map_or(0, |t| t - m_t);
        let hi = q.time.last().map_or(0, |t| t + m_t);

        // per-timepoint spatial projections, [col 0..J then b][query]
        let projected: Vec<Vec<f64>> = (lo..=hi)
            .into_par_iter()
            .map_init(
                || Workspace::new(self.grid.cells()),
                |ws, l| self.project_time(u.slice(l), basis, ws),
            )
            .collect::<Result<Vec<_>>>()?;

        let weight = basis.dt() * self.grid.cell_volume();
        let mut g = DMatrix::zeros(nrows, jn);
        let mut b = DVector::zeros(nrows);
        let tw = |l: usize| if l == 0 || l + 1 == lt { 0.5 } else { 1.0 };
        for (ti, &tau) in q.time.iter().enumerate() {
            let row0 = ti * nqs;
            for l in tau - m_t..=tau + m_t {
                let off = l + m_t - tau;
                let p = &projected[l - lo];
                let c0 = weight * tw(l) * basis.time.phi[off];
                let c1 = weight * tw(l) * basis.time.d1[off];
                if c0 != 0.0 {
                    for j in 0..jn {
                        let src = &p[j * nqs..(j + 1) * nqs];
                        let mut col = g.column_mut(j);
                        for (s, v) in src.iter().enumerate() {
                            col[row0 + s] += c0 * v;
                        }
                    }
                }
                if c1 != 0.0 {
                    let src = &p[jn * nqs..(jn + 1) * nqs];
                    for (s, v) in src.iter().enumerate() {
                        b[row0 + s] += c1 * v;
                    }
                }
            }
        }
        for j in 0..jn {
            if let Some(r) = g.column(j).iter().position(|v: &f64| !v.is_finite()) {
                return Err(Error::NonFinite { row: r, col: j });
            }
        }
        if let Some(r) = b.iter().position(|v: &f64| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, col: jn });
        }
        Ok(WeakSystem {
            g,
            b,
            columns: lib.descriptors(),
            blocks: (0..jn).map(|j| lib.block(j)).collect(),
            rows: q.clone(),
        })
    }

    fn project_time(&self, u: &[f64], basis: &TestBasis, ws: &mut Workspace) -> Result<Vec<f64>> {
        let lib = self.lib;
        let d = self.grid.dim();
        let nqs = basis.queries.spatial_count();
        let mut out = vec![0.0; (lib.len() + 1) * nqs];
        let mut col = 0;
        let unit = |a: usize| -> Vec<usize> { (0..d).map(|b| usize::from(a == b)).collect() };

        if !self.kernels.is_empty() {
            let us = self.plan.field_spectrum(u, &mut ws.conv)?;
            for spec in &self.kernels {
                let dst = &mut out[col * nqs..(col + 1) * nqs];
                if d == 1 {
                    self.plan.apply(&spec[0], &us, &mut ws.a, &mut ws.conv);
                    mul_into(&mut ws.a, u);
                    self.project(&ws.a, &[1], basis, dst, 1.0, &mut ws.rows);
                } else {
                    self.plan.apply_pair(&spec[0], &spec[1], &us, &mut ws.a, &mut ws.b, &mut ws.conv);
                    mul_into(&mut ws.a, u);
                    mul_into(&mut ws.b, u);
                    self.project(&ws.a, &[1, 0], basis, dst, 1.0, &mut ws.rows);
                    self.project(&ws.b, &[0, 1], basis, dst, 1.0, &mut ws.rows);
                }
                col += 1;
            }
        }
        for field in &self.local {
            let dst = &mut out[col * nqs..(col + 1) * nqs];
            for (a, comp) in field.iter().enumerate() {
                if comp.iter().all(|v| *v == 0.0) {
                    continue;
                }
                ws.a.iter_mut().zip(comp).zip(u).for_each(|((o, f), v)| *o = f * v);
                self.project(&ws.a, &unit(a), basis, dst, 1.0, &mut ws.rows);
            }
            col += 1;
        }
        for (term, f) in lib.s_terms.iter().zip(&self.diffusion) {
            let dst = &mut out[col * nqs..(col + 1) * nqs];
            ws.a.iter_mut().zip(f).zip(u).for_each(|((o, f), v)| *o = f * v);
            for p in 0..d {
                for qq in 0..d {
                    let a = term.pattern[p * d + qq];
                    if a != 0.0 {
                        let mut orders = vec![0; d];
                        orders[p] += 1;
                        orders[qq] += 1;
                        self.project(&ws.a, &orders, basis, dst, -a, &mut ws.rows);
                    }
                }
            }
            col += 1;
        }
        let dst = &mut out[col * nqs..(col + 1) * nqs];
        self.project(u, &vec![0; d], basis, dst, 1.0, &mut ws.rows);
        Ok(out)
    }

    /// Adds `scale * sum_c prod_a phi^(orders[a])(c_a - q_a) field(c)` for
    /// every spatial query point `q` into `dst`.
    fn project(&self, field: &[f64], orders: &[usize], basis: &TestBasis, dst: &mut [f64], scale: f64, tmp: &mut Vec<f64>) {
        let m = basis.space.m;
        let qs = &basis.queries.space;
        match orders.len() {
            1 => {
                let tab = basis.space.table(orders[0]);
                for (k, &q) in qs[0].iter().enumerate() {
                    dst[k] += scale * dot(tab, &field[q - m..=q + m]);
                }
            }
            _ => {
                let n1 = self.grid.counts()[1];
                let n0 = self.grid.counts()[0];
                let (t0, t1) = (basis.space.table(orders[0]), basis.space.table(orders[1]));
                let nq1 = qs[1].len();
                // contract the last axis for every row the supports touch
                let r_lo = qs[0][0] - m;
                let r_hi = (qs[0][qs[0].len() - 1] + m).min(n0 - 1);
                tmp.clear();
                tmp.resize((r_hi - r_lo + 1) * nq1, 0.0);
                for r in r_lo..=r_hi {
                    let row = &field[r * n1..(r + 1) * n1];
                    for (k1, &q1) in qs[1].iter().enumerate() {
                        tmp[(r - r_lo) * nq1 + k1] = dot(t1, &row[q1 - m..=q1 + m]);
                    }
                }
                for (k0, &q0) in qs[0].iter().enumerate() {
                    for k1 in 0..nq1 {
                        let mut acc = 0.0;
                        for (s, w) in t0.iter().enumerate() {
                            acc += w * tmp[(q0 - m + s - r_lo) * nq1 + k1];
                        }
                        dst[k0 * nq1 + k1] += scale * acc;
                    }
                }
            }
        }
    }
}

struct Workspace {
    conv: ConvScratch,
    a: Vec<f64>,
    b: Vec<f64>,
    rows: Vec<f64>,
}

impl Workspace {
    fn new(cells: usize) -> Self {
        Workspace { conv: ConvScratch::default(), a: vec![0.0; cells], b: vec![0.0; cells], rows: Vec::new() }
    }
}

fn mul_into(a: &mut [f64], u: &[f64]) {
    a.iter_mut().zip(u).for_each(|(x, v)| *x *= v);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembles the weak system in one call.
pub fn assemble(u: &HistogramField, lib: &TrialLibrary, basis: &TestBasis) -> Result<WeakSystem> {
    Assembler::new(lib, u.grid())?.assemble(u, basis)
}

/// Reference nested-loop quadrature of a single entry: column `col` of
/// row `row`, or `b_row` when `col == J`. Kernel convolutions are summed
/// directly and test functions evaluated analytically at cell centers.
pub fn direct_entry(u: &HistogramField, lib: &TrialLibrary, basis: &TestBasis, row: usize, col: usize) -> f64 {
    let grid = u.grid();
    let d = grid.dim();
    let cells = grid.cells();
    let centers: Vec<Vec<f64>> = (0..cells)
        .map(|c| grid.unflatten(c).iter().enumerate().map(|(a, &i)| grid.center(a, i)).collect())
        .collect();
    let t0 = u.times()[0];
    let lt = u.timepoints();
    let dt = basis.dt();
    let hd = grid.cell_volume();
    let jn = lib.len();
    let block = if col < jn { Some(lib.block(col)) } else { None };
    let mut total = 0.0;
    let mut diff = vec![0.0; d];
    let mut gk = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut ndiff = vec![0.0; d * d];
    for l in 0..lt {
        let t = u.times()[l];
        let tw = if l == 0 || l + 1 == lt { 0.5 } else { 1.0 };
        let ul = u.slice(l);
        let mut acc = 0.0;
        for c in 0..cells {
            let x = &centers[c];
            let grad = |a: usize| {
                let mut o = vec![0; d];
                o[a] = 1;
                basis.eval(row, grid, x, t, t0, &o, 0)
            };
            let v = match block {
                None => basis.eval(row, grid, x, t, t0, &vec![0; d], 1) * ul[c],
                Some(Block::K) => {
                    if (0..d).all(|a| grad(a) == 0.0) {
                        continue;
                    }
                    let mut conv = vec![0.0; d];
                    for cp in 0..cells {
                        for a in 0..d {
                            diff[a] = x[a] - centers[cp][a];
                        }
                        lib.k_grad(col, &diff, &mut gk);
                        for a in 0..d {
                            conv[a] += hd * gk[a] * ul[cp];
                        }
                    }
                    (0..d).map(|a| grad(a) * ul[c] * conv[a]).sum()
                }
                Some(Block::V) => {
                    lib.v_terms[col - lib.block_range(Block::V).start].grad.eval(x, &mut gv);
                    (0..d).map(|a| grad(a) * ul[c] * gv[a]).sum()
                }
                Some(Block::Sigma) => {
                    let s = col - lib.block_range(Block::Sigma).start;
                    let mut w = vec![0.0; lib.s_terms.len()];
                    w[s] = 1.0;
                    lib.half_diffusion(&w, x, &mut ndiff);
                    let mut v = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            if ndiff[p * d + q] != 0.0 {
                                let mut o = vec![0; d];
                                o[p] += 1;
                                o[q] += 1;
                                v -= basis.eval(row, grid, x, t, t0, &o, 0) * ndiff[p * d + q] * ul[c];
                            }
                        }
                    }
                    v
                }
            };
            acc += v;
        }
        total += tw * acc;
    }
    total * dt * hd
}

/// Column norms, condition number and size of a weak system.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionReport {
    pub rows: usize,
    pub cols: usize,
    pub column_norms: Vec<f64>,
    /// `sigma_max / sigma_min`; infinite when `sigma_min` falls below the
    /// pseudoinverse cutoff.
    pub condition: f64,
    pub singular_values: Vec<f64>,
}

pub fn condition_report(sys: &WeakSystem) -> ConditionReport {
    let s = crate::mstls::singular_values(&sys.g);
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    let cutoff = sys.nrows().max(sys.ncols()) as f64 * f64::EPSILON * smax;
    let condition = if smax == 0.0 || smin <= cutoff { f64::INFINITY } else { smax / smin };
    ConditionReport {
        rows: sys.nrows(),
        cols: sys.ncols(),
        column_norms: sys.g.column_iter().map(|c| c.norm()).collect(),
        condition,
        singular_values: s,
    }
}

//! Computational domain and histogram densities.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ParticleDataset;
use crate::error::{Error, Result};

/// Regular grid of cells `[origin + k h, origin + (k+1) h)` per axis.
///
/// Cells are flattened row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, h: f64, counts: Vec<usize>) -> Result<Self> {
        if origin.is_empty() || origin.len() != counts.len() {
            return Err(Error::Dimension("grid origin and counts must share a nonzero length".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("bin width must be positive, got {h}")));
        }
        if counts.contains(&0) || origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("grid needs at least one finite cell per axis".into()));
        }
        Ok(Grid { origin, h, counts })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of cells.
    pub fn cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Volume of the domain D.
    pub fn volume(&self) -> f64 {
        self.counts.iter().map(|&n| n as f64 * self.h).product()
    }

    /// Lower and upper edge of the domain along `axis`.
    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis];
        (lo, lo + self.counts[axis] as f64 * self.h)
    }

    pub fn center(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + (k as f64 + 0.5) * self.h
    }

    pub fn centers(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis]).map(|k| self.center(axis, k)).collect()
    }

    /// Points `i h` for `|i| <= n - 1` on `axis` of the difference grid C - C.
    pub fn offsets(&self, axis: usize) -> Vec<f64> {
        let n = self.counts[axis] as i64;
        (-(n - 1)..n).map(|i| i as f64 * self.h).collect()
    }

    /// Cell containing `x`, or `None` if outside D.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for (axis, &v) in x.iter().enumerate() {
            let t = ((v - self.origin[axis]) / self.h).floor();
            if !(t >= 0.0 && t < self.counts[axis] as f64) {
                return None;
            }
            flat = flat * self.counts[axis] + t as usize;
        }
        Some(flat)
    }

    /// Per-axis indices of a flat cell index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &n)| acc * n + i)
    }
}

/// How the spread `s` entering the 3s rule is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadMode {
    /// Standard deviation of each coordinate separately.
    #[default]
    PerDimension,
    /// One standard deviation over all coordinates (about their per-axis means).
    Pooled,
}

/// Builds the domain `mean +- 3 s` with `bins` cells per axis.
///
/// The bin width is the largest `6 s / bins` over the axes, so narrower
/// axes are widened symmetrically about their mean.
pub fn build_domain(data: &ParticleDataset, bins: usize, mode: SpreadMode) -> Result<Grid> {
    if bins == 0 {
        return Err(Error::Config("bins per dimension must be positive".into()));
    }
    let d = data.dim();
    let count = (data.positions().len() / d) as f64;
    if count < 2.0 {
        return Err(Error::DegenerateDensity { axis: 0 });
    }
    let mut mean = vec![0.0; d];
    for x in data.positions().chunks_exact(d) {
        for c in 0..d {
            mean[c] += x[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut ss = vec![0.0; d];
    for x in data.positions().chunks_exact(d) {
        for c in 0..d {
            ss[c] += (x[c] - mean[c]).powi(2);
        }
    }
    let spread: Vec<f64> = match mode {
        SpreadMode::PerDimension => ss.iter().map(|s| (s / (count - 1.0)).sqrt()).collect(),
        SpreadMode::Pooled => {
            let s = (ss.iter().sum::<f64>() / (count * d as f64 - 1.0)).sqrt();
            vec![s; d]
        }
    };
    if let Some(axis) = spread.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::DegenerateDensity { axis });
    }
    let h = spread.iter().map(|s| 6.0 * s / bins as f64).fold(0.0, f64::max);
    let half = 0.5 * bins as f64 * h;
    Grid::new(mean.iter().map(|m| m - half).collect(), h, vec![bins; d])
}

/// Piecewise-constant densities on a grid, one slice per timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramField {
    grid: Grid,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Fraction of particles outside D, per timepoint.
    dropped: Vec<f64>,
}

impl HistogramField {
    pub fn new(grid: Grid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() * grid.cells() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                times.len() * grid.cells(),
                values.len()
            )));
        }
        let dropped = vec![0.0; times.len()];
        Ok(HistogramField { grid, times, values, dropped })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn timepoints(&self) -> usize {
        self.times.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, l: usize) -> &[f64] {
        let c = self.grid.cells();
        &self.values[l * c..(l + 1) * c]
    }

    pub fn dropped(&self) -> &[f64] {
        &self.dropped
    }

    /// Multiplies all values by `c`.
    pub fn scaled(&self, c: f64) -> HistogramField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `sum_k U_l(k) h^d` for each timepoint.
    pub fn mass(&self) -> Vec<f64> {
        let w = self.grid.cell_volume();
        (0..self.timepoints()).map(|l| self.slice(l).iter().sum::<f64>() * w).collect()
    }

    /// Writes a dense CSV (one row per timepoint) plus a `.meta` sidecar
    /// with the grid geometry.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        for l in 0..self.timepoints() {
            let row: Vec<String> = self.slice(l).iter().map(|v| format!("{v:.9e}")).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
        let mut meta = BufWriter::new(File::create(path.with_extension("meta"))?);
        writeln!(meta, "dim {}", self.grid.dim())?;
        writeln!(meta, "h {:.17e}", self.grid.h())?;
        writeln!(meta, "origin {}", join(self.grid.origin()))?;
        writeln!(
            meta,
            "counts {}",
            self.grid.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
        )?;
        writeln!(meta, "times {}", join(&self.times))?;
        writeln!(meta, "layout row-major, last axis fastest; one row per time")?;
        meta.flush()?;
        Ok(())
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")
}

/// Bins `positions` (`N*d` entries) into `out`, returning the number of
/// particles outside D. `out` is overwritten with counts scaled by
/// `weight`.
fn bin_into(positions: &[f64], grid: &Grid, weight: f64, out: &mut [f64]) -> usize {
    let mut outside = 0;
    for x in positions.chunks_exact(grid.dim()) {
        match grid.locate(x) {
            Some(k) => out[k] += weight,
            None => outside += 1,
        }
    }
    outside
}

/// Histogram of one time slice: `count(B_k) / (N h^d)`.
pub fn histogram(positions: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    if positions.len() % grid.dim() != 0 {
        return Err(Error::Dimension("positions are not a whole number of points".into()));
    }
    let n = positions.len() / grid.dim();
    let mut out = vec![0.0; grid.cells()];
    if n > 0 {
        bin_into(positions, grid, 1.0 / (n as f64 * grid.cell_volume()), &mut out);
    }
    Ok(out)
}

/// Per-experiment histogram fields.
pub fn histograms(data: &ParticleDataset, grid: &Grid) -> Result<Vec<HistogramField>> {
    check_dim(data, grid)?;
    (0..data.experiments())
        .map(|m| {
            let (values, dropped) = bin_slices(data, grid, m..m + 1);
            let mut f = HistogramField::new(grid.clone(), data.times().to_vec(), values)?;
            f.dropped = dropped;
            Ok(f)
        })
        .collect()
}

/// Histogram of all experiments pooled, identical to averaging the
/// per-experiment histograms.
pub fn mean_histogram(data: &ParticleDataset, grid: &Grid) -> Result<HistogramField> {
    check_dim(data, grid)?;
    let (values, dropped) = bin_slices(data, grid, 0..data.experiments());
    let mut f = HistogramField::new(grid.clone(), data.times().to_vec(), values)?;
    f.dropped = dropped;
    Ok(f)
}

fn check_dim(data: &ParticleDataset, grid: &Grid) -> Result<()> {
    if data.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "dataset is {}-dimensional, grid is {}-dimensional",
            data.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

fn bin_slices(data: &ParticleDataset, grid: &Grid, exps: std::ops::Range<usize>) -> (Vec<f64>, Vec<f64>) {
    let cells = grid.cells();
    let l_count = data.timepoints();
    let total = exps.len() * data.particles();
    let weight = 1.0 / (total as f64 * grid.cell_volume());
    let mut values = vec![0.0; l_count * cells];
    let dropped: Vec<f64> = values
        .par_chunks_mut(cells)
        .enumerate()
        .map(|(l, out)| {
            let outside: usize = exps.clone().map(|m| bin_into(data.frame(m, l), grid, weight, out)).sum();
            outside as f64 / total as f64
        })
        .collect();
    (values, dropped)
}

/// Pointwise mean of fields sharing a grid and timestamps.
pub fn average_histograms(fields: &[HistogramField]) -> Result<HistogramField> {
    let first = fields
        .first()
        .ok_or_else(|| Error::GridMismatch("no fields to average".into()))?;
    if fields.iter().any(|f| f.grid != first.grid) {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    if fields.iter().any(|f| f.times != first.times) {
        return Err(Error::GridMismatch("fields have different timestamps".into()));
    }
    let m = fields.len() as f64;
    let mut values = vec![0.0; first.values.len()];
    let mut dropped = vec![0.0; first.times.len()];
    for f in fields {
        values.iter_mut().zip(&f.values).for_each(|(a, b)| *a += b);
        dropped.iter_mut().zip(&f.dropped).for_each(|(a, b)| *a += b);
    }
    values.iter_mut().for_each(|v| *v /= m);
    dropped.iter_mut().for_each(|v| *v /= m);
    Ok(HistogramField { grid: first.grid.clone(), times: first.times.clone(), values, dropped })
}

//! Plot-ready CSV tables: error and TPR against N, and loss curves.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::metrics::rate_fit;

use super::report::{num, ExperimentReport};

/// Groups cells by everything but `N` and writes
/// `error_vs_n.csv`, `tpr_vs_n.csv` and `loss_curve.csv` into `dir`.
pub fn emit_plot_data(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in report.cells.iter().enumerate() {
        let key = format!("{}/M={}/eps={}", c.cell.variant, c.cell.experiments, c.cell.noise);
        groups.entry(key).or_default().push(i);
    }

    let mut err = BufWriter::new(File::create(dir.join("error_vs_n.csv"))?);
    writeln!(err, "group,N,mean_err_k,mean_err_v,mean_err_sigma,guide_n_half,slope_k")?;
    let mut tpr = BufWriter::new(File::create(dir.join("tpr_vs_n.csv"))?);
    writeln!(tpr, "group,N,mean_tpr,mean_tpr_drift,identified_fraction")?;
    for (key, idx) in &groups {
        let mut rows: Vec<&super::CellReport> = idx.iter().map(|&i| &report.cells[i]).collect();
        rows.sort_by_key(|c| c.cell.particles);
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|c| c.summary.mean_err_k.map(|e| (c.cell.particles as f64, e)))
            .collect();
        let slope = rate_fit(&pts).ok();
        // guide line c N^{-1/2} through the first point
        let anchor = pts.first().map(|&(n, e)| e * n.sqrt());
        for c in &rows {
            let n = c.cell.particles as f64;
            writeln!(
                err,
                "{key},{},{},{},{},{},{}",
                c.cell.particles,
                num(c.summary.mean_err_k),
                num(c.summary.mean_err_v),
                num(c.summary.mean_err_sigma),
                num(anchor.map(|a| a / n.sqrt())),
                num(slope),
            )?;
            let frac = c.summary.identified as f64 / c.summary.trials.max(1) as f64;
            writeln!(
                tpr,
                "{key},{},{},{},{}",
                c.cell.particles,
                num(c.summary.mean_tpr),
                num(c.summary.mean_tpr_drift),
                num(Some(frac)),
            )?;
        }
    }
    err.flush()?;
    tpr.flush()?;

    let mut loss = BufWriter::new(File::create(dir.join("loss_curve.csv"))?);
    writeln!(loss, "cell,lambda,loss,support_size,degenerate")?;
    for c in &report.cells {
        for p in &c.loss_curve {
            writeln!(loss, "{},{:.6e},{:.6e},{},{}", c.label, p.lambda, p.loss, p.support_size, p.degenerate)?;
        }
    }
    loss.flush()?;
    Ok(())
}

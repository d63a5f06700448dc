//! Report structures and their JSON/CSV serialization.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::mean_median;
use crate::mstls::LossPoint;

use super::config::{Cell, ExperimentConfig};
use super::StageTimes;

/// Scores and diagnostics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub tpr: Option<f64>,
    pub tpr_drift: Option<f64>,
    pub identified: bool,
    pub err_k: Option<f64>,
    pub err_v: Option<f64>,
    pub err_sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub condition: Option<f64>,
    pub rows: usize,
    pub cols: usize,
    pub residual: Option<f64>,
    pub dropped: f64,
    /// Selected terms.
    pub terms: Vec<(String, f64)>,
    pub simulate_s: f64,
    pub stages: StageTimes,
    pub error: Option<String>,
}

/// Aggregates over the trials of a cell; errors are taken over the
/// identified trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub trials: usize,
    pub failed: usize,
    pub identified: usize,
    pub mean_tpr: Option<f64>,
    pub mean_tpr_drift: Option<f64>,
    pub mean_err_k: Option<f64>,
    pub median_err_k: Option<f64>,
    pub mean_err_v: Option<f64>,
    pub median_err_v: Option<f64>,
    pub mean_err_sigma: Option<f64>,
    pub median_err_sigma: Option<f64>,
}

impl CellSummary {
    pub fn from_trials(records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let id: Vec<&TrialRecord> = ok.iter().copied().filter(|r| r.identified).collect();
        let collect = |f: &dyn Fn(&TrialRecord) -> Option<f64>, set: &[&TrialRecord]| -> Vec<f64> {
            set.iter().filter_map(|r| f(r)).collect()
        };
        let mm = |v: Vec<f64>| mean_median(&v);
        let k = mm(collect(&|r| r.err_k, &id));
        let v = mm(collect(&|r| r.err_v, &id));
        let s = mm(collect(&|r| r.err_sigma, &id));
        CellSummary {
            trials: records.len(),
            failed: records.len() - ok.len(),
            identified: id.len(),
            mean_tpr: mm(collect(&|r| r.tpr, &ok)).map(|x| x.0),
            mean_tpr_drift: mm(collect(&|r| r.tpr_drift, &ok)).map(|x| x.0),
            mean_err_k: k.map(|x| x.0),
            median_err_k: k.map(|x| x.1),
            mean_err_v: v.map(|x| x.0),
            median_err_v: v.map(|x| x.1),
            mean_err_sigma: s.map(|x| x.0),
            median_err_sigma: s.map(|x| x.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub cell: Cell,
    pub true_terms: Vec<(String, f64)>,
    pub trials: Vec<TrialRecord>,
    pub summary: CellSummary,
    /// Loss curve of the first successful trial.
    pub loss_curve: Vec<LossPoint>,
    pub error: Option<String>,
}

impl CellReport {
    pub fn has_errors(&self) -> bool {
        self.error.is_some() || self.trials.iter().any(|t| t.error.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub library: String,
    pub cells: Vec<CellReport>,
    /// Log-log slope of mean K error against N, when the sweep allows one.
    pub rate_k: Option<f64>,
}

impl ExperimentReport {
    pub fn has_errors(&self) -> bool {
        self.cells.iter().any(CellReport::has_errors)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::Format(format!("report.json: {e}")))
    }

    /// Writes `report.json`, `scores.csv` and `plotdata/*.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        self.write_scores(&dir.join("scores.csv"))?;
        super::plotdata::emit_plot_data(self, &dir.join("plotdata"))?;
        Ok(())
    }

    /// One row per trial.
    pub fn write_scores(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        writeln!(
            f,
            "preset,variant,N,M,eps,trial,seed,tpr,tpr_drift,err_k,err_v,err_sigma,lambda,kappa,walltime_s,error"
        )?;
        let preset = self.config.experiment.preset;
        for c in &self.cells {
            for t in &c.trials {
                writeln!(
                    f,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
                    preset,
                    c.cell.variant,
                    c.cell.particles,
                    c.cell.experiments,
                    c.cell.noise,
                    t.trial,
                    t.seed,
                    num(t.tpr),
                    num(t.tpr_drift),
                    num(t.err_k),
                    num(t.err_v),
                    num(t.err_sigma),
                    num(t.lambda),
                    num(t.condition),
                    t.simulate_s + t.stages.total(),
                    t.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
                )?;
            }
        }
        f.flush()?;
        Ok(())
    }

    /// Short human-readable summary.
    pub fn summary_text(&self) -> String {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        for c in &self.cells {
            let s = &c.summary;
            out.push_str(&format!(
                "{}: identified {}/{} (failed {}), mean tpr {}, tpr_drift {}, median err K {} V {} sigma {}\n",
                c.label,
                s.identified,
                s.trials,
                s.failed,
                show(s.mean_tpr),
                show(s.mean_tpr_drift),
                show(s.median_err_k),
                show(s.median_err_v),
                show(s.median_err_sigma),
            ));
            if let Some(e) = &c.error {
                out.push_str(&format!("  error: {e}\n"));
            }
        }
        if let Some(r) = self.rate_k {
            out.push_str(&format!("K error rate: {r:.3}\n"));
        }
        out
    }
}

/// Fixed-precision numeric field, empty when absent.
pub fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.6e}"),
        None => String::new(),
    }
}

//! End-to-end pipeline: histogram, assembly, sparse regression, scoring.

pub mod config;
pub mod homogenize;
pub mod plotdata;
pub mod report;
pub mod runner;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{condition_report, Assembler, ConditionReport, WeakSystem};
use crate::dataset::ParticleDataset;
use crate::error::Result;
use crate::grid::{build_domain, mean_histogram, Grid, SpreadMode};
use crate::library::TrialLibrary;
use crate::mstls::{default_lambda_grid, Mstls, SparseSolution};
use crate::preset::{Preset, SupportParams};
use crate::test_functions::TestBasis;

pub use config::{Cell, ExperimentConfig};
pub use homogenize::harmonic_mean_diffusivity;
pub use report::{CellReport, CellSummary, ExperimentReport, TrialRecord};
pub use runner::{execute, run, run_cell};

/// Discretization and regression settings for [`identify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyOptions {
    pub bins: usize,
    pub spread: SpreadMode,
    pub support: SupportParams,
    pub lambdas: Vec<f64>,
    /// Keep the assembled system in the result.
    pub keep_system: bool,
}

impl IdentifyOptions {
    pub fn for_preset(preset: Preset) -> Self {
        IdentifyOptions {
            bins: preset.bins(),
            spread: SpreadMode::PerDimension,
            support: preset.support_parameters(),
            lambdas: default_lambda_grid(),
            keep_system: false,
        }
    }
}

/// Wall-clock seconds per identification stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub histogram: f64,
    pub assembly: f64,
    pub regression: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.histogram + self.assembly + self.regression
    }
}

/// Output of [`identify`].
#[derive(Debug, Clone)]
pub struct Identification {
    pub grid: Grid,
    pub solution: SparseSolution,
    pub condition: ConditionReport,
    /// Largest fraction of particles outside the domain at any timepoint.
    pub dropped: f64,
    pub times: StageTimes,
    pub system: Option<WeakSystem>,
}

impl Identification {
    /// Nonzero terms as `(descriptor, coefficient)`.
    pub fn terms(&self, lib: &TrialLibrary) -> Vec<(String, f64)> {
        lib.descriptors()
            .into_iter()
            .zip(&self.solution.coeffs)
            .filter(|(_, w)| **w != 0.0)
            .map(|(d, w)| (d, *w))
            .collect()
    }

    /// One line per selected term.
    pub fn pretty(&self, lib: &TrialLibrary) -> String {
        let mut out = String::new();
        for (d, w) in self.terms(lib) {
            let _ = writeln!(out, "{w:+.6e}  {d}");
        }
        let _ = writeln!(
            out,
            "lambda = {:.4e}, loss = {:.4e}, residual = {:.4e}, kappa(G) = {:.3e}",
            self.solution.lambda, self.solution.loss, self.solution.residual, self.condition.condition
        );
        out
    }
}

/// Runs histogram construction, assembly and threshold selection on
/// `data`, averaging the histograms over all experiments.
pub fn identify(data: &ParticleDataset, lib: &TrialLibrary, opts: &IdentifyOptions) -> Result<Identification> {
    let t = Instant::now();
    let grid = build_domain(data, opts.bins, opts.spread)?;
    let u = mean_histogram(data, &grid)?;
    let dropped = u.dropped().iter().copied().fold(0.0, f64::max);
    let histogram = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let basis = TestBasis::new(&grid, u.times(), opts.support)?;
    let system = Assembler::new(lib, &grid)?.assemble(&u, &basis)?;
    let assembly = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let solver = Mstls::new(&system.g, &system.b)?;
    let solution = solver.select(&opts.lambdas)?;
    let condition = condition_report(&system);
    let regression = t.elapsed().as_secs_f64();

    log::debug!(
        "h = {:.4}, identified {} terms from {}x{} system in {:.2}s",
        grid.h(),
        solution.support.len(),
        system.nrows(),
        system.ncols(),
        histogram + assembly + regression
    );
    Ok(Identification {
        grid,
        solution,
        condition,
        dropped,
        times: StageTimes { histogram, assembly, regression },
        system: opts.keep_system.then_some(system),
    })
}

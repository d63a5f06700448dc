//! Shared fixtures for the benchmarks.

use mfid_core::prelude::*;

/// Simulated catalog data for `key` (`preset:variant`) with `n` particles
/// and `m` experiments at the preset's default sampling.
pub fn dataset(key: &str, n: usize, m: usize) -> ParticleDataset {
    let preset: Preset = key.split(':').next().unwrap().parse().unwrap();
    let d = preset.sim_defaults();
    let cfg = SimConfig { dt_fine: d.dt_fine, subsample: d.subsample, seed: 1, particles: n, experiments: m, timepoints: d.timepoints };
    simulate(&builtin_model(key).unwrap(), &preset.initial_distribution(), &cfg).unwrap()
}

/// Histogram field and test basis for `data` at the preset's defaults.
pub fn discretize(data: &ParticleDataset, preset: Preset) -> (HistogramField, TestBasis) {
    let grid = build_domain(data, preset.bins(), SpreadMode::PerDimension).unwrap();
    let u = mean_histogram(data, &grid).unwrap();
    let basis = TestBasis::new(&grid, u.times(), preset.support_parameters()).unwrap();
    (u, basis)
}

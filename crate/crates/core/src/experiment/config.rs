//! Declarative experiment configuration (TOML).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpreadMode;
use crate::mstls::log_grid;
use crate::preset::{Preset, SupportParams};
use crate::sim::{builtin_model, InitialDistribution, IpsModel, SimConfig};

/// Full configuration. Every field has a default, and a resolved config
/// (see [`ExperimentConfig::resolve`]) has no optional fields left unset,
/// so echoing it into a report makes the report a complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub regression: RegressionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub preset: Preset,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Write `system_dump.bin` for the first trial of the first cell.
    #[serde(default)]
    pub dump_system: bool,
}

fn default_trials() -> usize {
    10
}
fn default_seed() -> u64 {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("mfid-out")
}

/// Sweep axes; cells are their Cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Model variants, e.g. `const` for `qanr1d:const` or `w20` for `cos2d:w20`.
    #[serde(default)]
    pub variants: Vec<String>,
    /// Particles per experiment, `N`.
    #[serde(default)]
    pub particles: Vec<usize>,
    /// Experiments per histogram average, `M`.
    #[serde(default)]
    pub experiments: Vec<usize>,
    /// Extrinsic noise ratios.
    #[serde(default)]
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_fine: Option<f64>,
    pub subsample: Option<usize>,
    pub timepoints: Option<usize>,
    pub init: Option<InitialDistribution>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub bins: Option<usize>,
    pub spread: Option<SpreadMode>,
    pub m_x: Option<usize>,
    pub m_t: Option<usize>,
    pub p_x: Option<u32>,
    pub p_t: Option<u32>,
    pub s_x: Option<usize>,
    pub s_t: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSection {
    /// log10 of the smallest threshold.
    #[serde(default = "default_lmin")]
    pub log10_min: f64,
    #[serde(default)]
    pub log10_max: f64,
    #[serde(default = "default_lcount")]
    pub count: usize,
}

fn default_lmin() -> f64 {
    -4.0
}
fn default_lcount() -> usize {
    100
}

impl Default for RegressionSection {
    fn default() -> Self {
        RegressionSection { log10_min: -4.0, log10_max: 0.0, count: 100 }
    }
}

impl RegressionSection {
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.log10_min, self.log10_max, self.count)
    }
}

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: String,
    pub particles: usize,
    pub experiments: usize,
    pub noise: f64,
}

impl Cell {
    /// Stable label used for seed derivation and reporting.
    pub fn label(&self, preset: Preset) -> String {
        format!("{}:{}/N={}/M={}/eps={}", preset, self.variant, self.particles, self.experiments, self.noise)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Minimal config for a preset with all defaults.
    pub fn for_preset(preset: Preset) -> Self {
        ExperimentConfig {
            experiment: ExperimentSection {
                preset,
                trials: default_trials(),
                seed: default_seed(),
                output: default_output(),
                dump_system: false,
            },
            sweep: SweepSection::default(),
            simulation: SimulationSection::default(),
            discretization: DiscretizationSection::default(),
            regression: RegressionSection::default(),
        }
    }

    /// Fills every unset option with the preset default and validates.
    pub fn resolve(mut self) -> Result<Self> {
        let p = self.experiment.preset;
        if self.experiment.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        let s = &mut self.sweep;
        if s.variants.is_empty() {
            s.variants.push(default_variant(p).into());
        }
        if s.experiments.is_empty() {
            s.experiments.push(1);
        }
        if s.noise.is_empty() {
            s.noise.push(0.0);
        }
        if s.particles.is_empty() {
            return Err(Error::Config("sweep.particles must list at least one particle count".into()));
        }
        if s.particles.iter().chain(&s.experiments).any(|&v| v == 0) {
            return Err(Error::Config("particle and experiment counts must be >= 1".into()));
        }
        if s.noise.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config("noise ratios must be non-negative".into()));
        }
        for v in &s.variants {
            builtin_model(&format!("{p}:{v}"))?;
        }
        let d = p.sim_defaults();
        let sim = &mut self.simulation;
        sim.dt_fine.get_or_insert(d.dt_fine);
        sim.subsample.get_or_insert(d.subsample);
        sim.timepoints.get_or_insert(d.timepoints);
        sim.init.get_or_insert_with(|| p.initial_distribution());
        sim.init.as_ref().unwrap().validate()?;
        if sim.init.as_ref().unwrap().dim() != p.dim() {
            return Err(Error::Dimension("initial distribution does not match the preset dimension".into()));
        }
        let sp = p.support_parameters();
        let dz = &mut self.discretization;
        dz.bins.get_or_insert(p.bins());
        dz.spread.get_or_insert(SpreadMode::PerDimension);
        dz.m_x.get_or_insert(sp.m_x);
        dz.m_t.get_or_insert(sp.m_t);
        dz.p_x.get_or_insert(sp.p_x);
        dz.p_t.get_or_insert(sp.p_t);
        dz.s_x.get_or_insert(sp.s_x);
        dz.s_t.get_or_insert(sp.s_t);
        if self.regression.count == 0 {
            return Err(Error::Config("regression.count must be >= 1".into()));
        }
        Ok(self)
    }

    /// Cartesian product of the sweep axes (variants outermost).
    pub fn cells(&self) -> Vec<Cell> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for v in &s.variants {
            for &n in &s.particles {
                for &m in &s.experiments {
                    for &e in &s.noise {
                        out.push(Cell { variant: v.clone(), particles: n, experiments: m, noise: e });
                    }
                }
            }
        }
        out
    }

    pub fn model(&self, cell: &Cell) -> Result<IpsModel> {
        builtin_model(&format!("{}:{}", self.experiment.preset, cell.variant))
    }

    /// Simulation settings for a cell (resolved configs only).
    pub fn sim_config(&self, cell: &Cell, seed: u64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            dt_fine: s.dt_fine.expect("resolved"),
            subsample: s.subsample.expect("resolved"),
            seed,
            particles: cell.particles,
            experiments: cell.experiments,
            timepoints: s.timepoints.expect("resolved"),
        }
    }

    pub fn support(&self) -> SupportParams {
        let d = &self.discretization;
        SupportParams {
            m_x: d.m_x.expect("resolved"),
            m_t: d.m_t.expect("resolved"),
            p_x: d.p_x.expect("resolved"),
            p_t: d.p_t.expect("resolved"),
            s_x: d.s_x.expect("resolved"),
            s_t: d.s_t.expect("resolved"),
        }
    }
}

fn default_variant(p: Preset) -> &'static str {
    match p {
        Preset::Cos2d => "w1",
        Preset::Qanr1d => "const",
        Preset::Log2d => "critical",
    }
}

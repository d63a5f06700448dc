//! Identification of mean-field particle dynamics from trajectory data.
//!
//! Given snapshots of interacting particles, the pipeline bins them into
//! histograms, tests the mean-field Fokker–Planck equation against
//! compactly supported space-time bumps, and selects a sparse combination
//! of candidate interaction, local-force and diffusion terms.
//!
//! ```no_run
//! use mfid_core::prelude::*;
//!
//! let model = builtin_model("qanr1d:const").unwrap();
//! let preset = Preset::Qanr1d;
//! let d = preset.sim_defaults();
//! let cfg = SimConfig { dt_fine: d.dt_fine, subsample: d.subsample, seed: 7,
//!                       particles: 2000, experiments: 4, timepoints: d.timepoints };
//! let data = simulate(&model, &preset.initial_distribution(), &cfg).unwrap();
//! let lib = TrialLibrary::preset(preset);
//! let fit = identify(&data, &lib, &IdentifyOptions::for_preset(preset)).unwrap();
//! println!("{}", fit.pretty(&lib));
//! ```

pub mod assembly;
pub mod convolution;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod library;
pub mod metrics;
pub mod mstls;
pub mod preset;
pub mod rng;
pub mod sim;
pub mod test_functions;

pub use error::{Error, Result};

/// Commonly used types and entry points.
pub mod prelude {
    pub use crate::assembly::{assemble, condition_report, Assembler, ConditionReport, WeakSystem};
    pub use crate::dataset::ParticleDataset;
    pub use crate::error::{Error, Result};
    pub use crate::experiment::{identify, IdentifyOptions, Identification};
    pub use crate::grid::{build_domain, histogram, mean_histogram, Grid, HistogramField, SpreadMode};
    pub use crate::library::{Block, TrialLibrary};
    pub use crate::metrics::{function_errors, rate_fit, tpr, tpr_drift, FunctionErrors};
    pub use crate::mstls::{default_lambda_grid, select_lambda, SparseSolution};
    pub use crate::preset::{Preset, SupportParams};
    pub use crate::sim::{
        add_extrinsic_noise, builtin_model, builtin_models, simulate, InitialDistribution, IpsModel, SimConfig,
    };
    pub use crate::test_functions::TestBasis;
}

//! Named example setups: discretization parameters and simulation defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{InitialDistribution, MixtureComponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Constant advection with oscillating diffusivity, d = 2.
    Cos2d,
    /// Quadratic attraction / Newtonian repulsion, d = 1.
    Qanr1d,
    /// Logarithmic (chemotactic) attraction with a cutoff core, d = 2.
    Log2d,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Cos2d, Preset::Qanr1d, Preset::Log2d];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Cos2d => "cos2d",
            Preset::Qanr1d => "qanr1d",
            Preset::Log2d => "log2d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Preset::Qanr1d => 1,
            Preset::Cos2d | Preset::Log2d => 2,
        }
    }

    pub fn support_parameters(self) -> SupportParams {
        let (m_x, m_t, p_x, p_t, s_x, s_t) = match self {
            Preset::Cos2d => (31, 16, 5, 3, 10, 5),
            Preset::Qanr1d => (29, 8, 5, 3, 5, 1),
            Preset::Log2d => (25, 8, 5, 3, 8, 1),
        };
        SupportParams { m_x, m_t, p_x, p_t, s_x, s_t }
    }

    /// Default bins per spatial axis.
    pub fn bins(self) -> usize {
        default_bins(self.dim())
    }

    /// Default integration and sampling parameters (particle and
    /// experiment counts are set by the caller).
    pub fn sim_defaults(self) -> SimDefaults {
        match self {
            Preset::Cos2d => SimDefaults { dt_fine: 1e-4, subsample: 200, timepoints: 101 },
            Preset::Qanr1d => SimDefaults { dt_fine: 1e-3, subsample: 10, timepoints: 101 },
            Preset::Log2d => SimDefaults { dt_fine: 2.5e-3, subsample: 40, timepoints: 81 },
        }
    }

    pub fn initial_distribution(self) -> InitialDistribution {
        match self {
            Preset::Cos2d => InitialDistribution::Gaussian {
                mean: vec![0.0, 0.0],
                covariance: vec![1.0, 0.0, 0.0, 1.0],
            },
            // Means at +-1 start almost on the equilibrium support [-1, 1],
            // which leaves the interaction strength poorly determined.
            Preset::Qanr1d => InitialDistribution::GaussianMixture {
                components: [-1.75, 0.0, 1.75]
                    .iter()
                    .map(|&m| MixtureComponent { weight: 1.0 / 3.0, mean: vec![m], std: 0.005 })
                    .collect(),
            },
            Preset::Log2d => InitialDistribution::UniformDisk { center: vec![0.0, 0.0], radius: 2.0 },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos2d" => Ok(Preset::Cos2d),
            "qanr1d" => Ok(Preset::Qanr1d),
            "log2d" => Ok(Preset::Log2d),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// 128 bins per axis in two dimensions, 256 in one.
pub fn default_bins(dim: usize) -> usize {
    if dim == 1 {
        256
    } else {
        128
    }
}

/// Test-function support radii `m`, degrees `p` and query strides `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportParams {
    pub m_x: usize,
    pub m_t: usize,
    pub p_x: u32,
    pub p_t: u32,
    pub s_x: usize,
    pub s_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDefaults {
    pub dt_fine: f64,
    pub subsample: usize,
    pub timepoints: usize,
}

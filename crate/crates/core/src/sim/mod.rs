//! Euler–Maruyama simulation of interacting particle systems.
//!
//! Each particle follows
//!
//! ```text
//! dX_i = ( -(1/N) sum_j grad K(X_i - X_j) - grad V(X_i) ) dt + sigma(X_i) dB_i
//! ```
//!
//! with the convention `grad K(0) = 0`, so the `j = i` term drops out.

mod forces;
mod init;
mod model;

pub use forces::{mean_interaction, mean_interaction_direct, ForceScratch};
pub use init::{InitialDistribution, MixtureComponent};
pub use model::{
    builtin_model, builtin_models, cos2d, log2d, qanr1d, Diffusivity, Interaction, IpsModel,
    LocalForce, QanrNoise, ScalarField, Truth, VectorField, CATALOG, CRITICAL_DIFFUSIVITY,
    LOG_CUTOFF,
};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ParticleDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Integration and sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Fine integration step.
    pub dt_fine: f64,
    /// Fine steps per observation interval.
    pub subsample: usize,
    pub seed: u64,
    /// Particles per experiment, `N`.
    pub particles: usize,
    /// Independent experiments, `M`.
    pub experiments: usize,
    /// Recorded timepoints including the initial state, `L`.
    pub timepoints: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_fine > 0.0) || !self.dt_fine.is_finite() {
            return Err(Error::Config(format!("dt_fine must be positive, got {}", self.dt_fine)));
        }
        if self.subsample == 0 || self.particles == 0 || self.experiments == 0 || self.timepoints == 0 {
            return Err(Error::Config(
                "subsample, particles, experiments and timepoints must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Observation interval `dt_fine * subsample`.
    pub fn dt_obs(&self) -> f64 {
        self.dt_fine * self.subsample as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.timepoints).map(|l| l as f64 * self.dt_obs()).collect()
    }
}

/// Simulates `cfg.experiments` independent trials of `model`.
pub fn simulate(model: &IpsModel, init: &InitialDistribution, cfg: &SimConfig) -> Result<ParticleDataset> {
    cfg.validate()?;
    init.validate()?;
    if init.dim() != model.dim {
        return Err(Error::Dimension(format!(
            "model is {}-dimensional but the initial distribution is {}-dimensional",
            model.dim,
            init.dim()
        )));
    }
    let blocks = (0..cfg.experiments)
        .into_par_iter()
        .map(|m| simulate_experiment(model, init, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    let positions = blocks.concat();
    ParticleDataset::new(cfg.experiments, cfg.particles, model.dim, cfg.times(), positions)
}

/// Runs experiment `m`, returning `L*N*d` positions.
pub fn simulate_experiment(
    model: &IpsModel,
    init: &InitialDistribution,
    cfg: &SimConfig,
    m: usize,
) -> Result<Vec<f64>> {
    let d = model.dim;
    let n = cfg.particles;
    let stride = n * d;
    let mut record = vec![0.0; cfg.timepoints * stride];
    let mut pos = vec![0.0; stride];
    init.sample(&mut stream(cfg.seed, m as u64, Purpose::Initial), n, &mut pos);
    record[..stride].copy_from_slice(&pos);

    let mut rng = stream(cfg.seed, m as u64, Purpose::Dynamics);
    let dt = cfg.dt_fine;
    let sqrt_dt = dt.sqrt();
    let interacting = !matches!(model.interaction, Interaction::None);
    let mut force = vec![0.0; stride];
    let mut scratch = ForceScratch::default();
    let mut local = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    let mut z = vec![0.0; d];

    let matrix_noise = matches!(model.diffusivity, Diffusivity::Matrix(_));
    let total = (cfg.timepoints - 1) * cfg.subsample;
    for step in 1..=total {
        if interacting {
            mean_interaction(&model.interaction, &pos, d, &mut force, &mut scratch);
        }
        for (i, x) in pos.chunks_exact_mut(d).enumerate() {
            model.local.grad(x, &mut local);
            let f = &force[i * d..(i + 1) * d];
            let noise_scale = match &model.diffusivity {
                Diffusivity::Zero => None,
                Diffusivity::Constant(c) => Some(*c),
                Diffusivity::Scalar(s) => Some(s(x)),
                Diffusivity::Matrix(_) => {
                    model.diffusivity.matrix(x, &mut sigma);
                    None
                }
            };
            if noise_scale.is_some() || matrix_noise {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            }
            for c in 0..d {
                let mut dx = -(f[c] + local[c]) * dt;
                if let Some(s) = noise_scale {
                    dx += s * sqrt_dt * z[c];
                } else if matrix_noise {
                    dx += sqrt_dt * (0..d).map(|k| sigma[c * d + k] * z[k]).sum::<f64>();
                }
                x[c] += dx;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { trial: m, particle: i, step });
            }
        }
        if step % cfg.subsample == 0 {
            let l = step / cfg.subsample;
            record[l * stride..(l + 1) * stride].copy_from_slice(&pos);
        }
    }
    Ok(record)
}

/// Adds i.i.d. `N(0, (eps * rms)^2)` noise to every coordinate, where `rms`
/// is the root-mean-square of all position entries.
pub fn add_extrinsic_noise(data: &ParticleDataset, eps: f64, seed: u64) -> Result<ParticleDataset> {
    if !(eps >= 0.0) {
        return Err(Error::Config(format!("noise ratio must be non-negative, got {eps}")));
    }
    let mut out = data.clone();
    if eps == 0.0 {
        return Ok(out);
    }
    let rms = (data.positions().iter().map(|x| x * x).sum::<f64>() / data.positions().len() as f64).sqrt();
    let std = eps * rms;
    let (_, l, n, d) = data.shape();
    let block = l * n * d;
    out.positions_mut()
        .par_chunks_mut(block)
        .enumerate()
        .for_each(|(m, chunk)| {
            let mut rng = stream(seed, m as u64, Purpose::Measurement);
            for x in chunk {
                let z: f64 = rng.sample(StandardNormal);
                *x += std * z;
            }
        });
    Ok(out)
}

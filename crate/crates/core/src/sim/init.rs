use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the initial particle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDistribution {
    Gaussian {
        mean: Vec<f64>,
        /// Row-major `d x d`.
        covariance: Vec<f64>,
    },
    /// Isotropic components `(weight, mean, std)`.
    GaussianMixture { components: Vec<MixtureComponent> },
    /// Uniform on a ball (an interval for `d = 1`).
    UniformDisk { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

impl InitialDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::GaussianMixture { components } => components.first().map_or(0, |c| c.mean.len()),
            Self::UniformDisk { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Config("initial distribution has dimension 0".into()));
        }
        match self {
            Self::Gaussian { covariance, .. } => {
                if covariance.len() != d * d {
                    return Err(Error::Config("covariance must be d x d".into()));
                }
                for i in 0..d {
                    for j in 0..i {
                        if (covariance[i * d + j] - covariance[j * d + i]).abs() > 1e-12 {
                            return Err(Error::Config("covariance must be symmetric".into()));
                        }
                    }
                }
                cholesky(covariance, d)
                    .ok_or_else(|| Error::Config("covariance must be positive semidefinite".into()))?;
            }
            Self::GaussianMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 || components.iter().any(|c| c.weight < 0.0) {
                    return Err(Error::Config(format!("mixture weights must sum to 1, got {total}")));
                }
                if components.iter().any(|c| c.mean.len() != d || c.std < 0.0) {
                    return Err(Error::Config("mixture components disagree in dimension".into()));
                }
            }
            Self::UniformDisk { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Config("disk radius must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Draws `n` i.i.d. positions into `out` (`n*d` entries).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), n * d);
        match self {
            Self::Gaussian { mean, covariance } => {
                let chol = cholesky(covariance, d).expect("validated covariance");
                let mut z = vec![0.0; d];
                for x in out.chunks_exact_mut(d) {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    for i in 0..d {
                        x[i] = mean[i] + (0..=i).map(|j| chol[i * d + j] * z[j]).sum::<f64>();
                    }
                }
            }
            Self::GaussianMixture { components } => {
                for x in out.chunks_exact_mut(d) {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = components.len() - 1;
                    for (k, c) in components.iter().enumerate() {
                        acc += c.weight;
                        if u < acc {
                            pick = k;
                            break;
                        }
                    }
                    let c = &components[pick];
                    for (xi, mi) in x.iter_mut().zip(&c.mean) {
                        let z: f64 = rng.sample(StandardNormal);
                        *xi = mi + c.std * z;
                    }
                }
            }
            Self::UniformDisk { center, radius } => {
                let mut z = vec![0.0; d];
                for x in out.chunks_exact_mut(d) {
                    let r = loop {
                        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                        let r: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if r > 0.0 {
                            break r;
                        }
                    };
                    let u: f64 = rng.gen();
                    let scale = radius * u.powf(1.0 / d as f64) / r;
                    for i in 0..d {
                        x[i] = center[i] + scale * z[i];
                    }
                }
            }
        }
    }
}

/// Lower Cholesky factor of a PSD matrix; zero pivots are allowed.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    let tol = 1e-12 * (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if s < -tol {
                    return None;
                }
                l[i * d + i] = s.max(0.0).sqrt();
            } else if l[j * d + j] > 0.0 {
                l[i * d + j] = s / l[j * d + j];
            } else if s.abs() > tol {
                return None;
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let bad = InitialDistribution::GaussianMixture {
            components: vec![
                MixtureComponent { weight: 0.5, mean: vec![0.0], std: 1.0 },
                MixtureComponent { weight: 0.4, mean: vec![1.0], std: 1.0 },
            ],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let g = InitialDistribution::Gaussian { mean: vec![0.0, 0.0], covariance: vec![1.0, 2.0, 2.0, 1.0] };
        assert!(g.validate().is_err());
        let asym = InitialDistribution::Gaussian { mean: vec![0.0, 0.0], covariance: vec![1.0, 0.1, 0.0, 1.0] };
        assert!(asym.validate().is_err());
        let disk = InitialDistribution::UniformDisk { center: vec![0.0, 0.0], radius: 0.0 };
        assert!(disk.validate().is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g = InitialDistribution::Gaussian { mean: vec![1.0, -2.0], covariance: vec![4.0, 1.0, 1.0, 1.0] };
        g.validate().unwrap();
        let n = 200_000;
        let mut out = vec![0.0; 2 * n];
        g.sample(&mut stream(3, 0, Purpose::Initial), n, &mut out);
        let mx = out.iter().step_by(2).sum::<f64>() / n as f64;
        let my = out.iter().skip(1).step_by(2).sum::<f64>() / n as f64;
        let cxy = out.chunks(2).map(|p| (p[0] - mx) * (p[1] - my)).sum::<f64>() / n as f64;
        assert!((mx - 1.0).abs() < 0.02 && (my + 2.0).abs() < 0.01);
        assert!((cxy - 1.0).abs() < 0.03);
    }

    #[test]
    fn disk_samples_stay_inside() {
        let disk = InitialDistribution::UniformDisk { center: vec![1.0, 0.0], radius: 2.0 };
        let n = 50_000;
        let mut out = vec![0.0; 2 * n];
        disk.sample(&mut stream(4, 0, Purpose::Initial), n, &mut out);
        let mut inner = 0;
        for p in out.chunks(2) {
            let r = ((p[0] - 1.0).powi(2) + p[1] * p[1]).sqrt();
            assert!(r <= 2.0);
            if r < 1.0 {
                inner += 1;
            }
        }
        // uniform in area: a quarter of the mass lies within half the radius
        assert!((inner as f64 / n as f64 - 0.25).abs() < 0.01);
    }
}

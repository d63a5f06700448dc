use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::experiment::homogenize::harmonic_mean_diffusivity;
use crate::grid::Grid;
use crate::library::desc;
use crate::preset::Preset;

/// `f(x, out)`: a vector field on R^d.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `f(x)`: a scalar field on R^d.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Gradient of the pairwise interaction potential.
#[derive(Clone)]
pub enum Interaction {
    None,
    /// `K(x) = x^2/2 - |x|` in one dimension.
    Qanr,
    /// `K_delta` from the logarithmic potential `log|x| / 2pi` with a linear
    /// core of radius `delta`.
    LogCutoff { delta: f64 },
    /// Arbitrary gradient field. Must vanish at the origin.
    Custom(VectorField),
}

impl Interaction {
    /// Evaluates `grad K(x)`; returns zero at the origin.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            Interaction::None => {}
            Interaction::Qanr => {
                let v = x[0];
                out[0] = if v == 0.0 { 0.0 } else { v - v.signum() };
            }
            Interaction::LogCutoff { delta } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    return;
                }
                let r = r2.sqrt();
                let g = if r >= *delta { 1.0 / r2 } else { 1.0 / (delta * r) } / (2.0 * PI);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = g * v;
                }
            }
            Interaction::Custom(f) => {
                if x.iter().any(|v| *v != 0.0) {
                    f(x, out);
                }
            }
        }
    }
}

/// Gradient of the local potential.
#[derive(Clone)]
pub enum LocalForce {
    None,
    Constant(Vec<f64>),
    Custom(VectorField),
}

impl LocalForce {
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LocalForce::None => out.iter_mut().for_each(|o| *o = 0.0),
            LocalForce::Constant(c) => out.copy_from_slice(c),
            LocalForce::Custom(f) => f(x, out),
        }
    }
}

/// Diffusivity `sigma(x)`.
#[derive(Clone)]
pub enum Diffusivity {
    Zero,
    /// `sigma(x) = c I`.
    Constant(f64),
    /// `sigma(x) = s(x) I`.
    Scalar(ScalarField),
    /// Full `d x d` matrix, row-major.
    Matrix(VectorField),
}

impl Diffusivity {
    pub fn is_zero(&self) -> bool {
        matches!(self, Diffusivity::Zero)
    }

    /// Writes the row-major matrix `sigma(x)` into `out` (`d*d` entries).
    pub fn matrix(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let diag = match self {
            Diffusivity::Zero => return,
            Diffusivity::Constant(c) => *c,
            Diffusivity::Scalar(s) => s(x),
            Diffusivity::Matrix(f) => {
                f(x, out);
                return;
            }
        };
        for i in 0..d {
            out[i * d + i] = diag;
        }
    }
}

/// Reference coefficients of a model in a trial library.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    /// Exact coefficients keyed by library descriptor.
    Terms(Vec<(String, f64)>),
    /// Rapidly oscillating diffusivity `1 + a cos(w x1) cos(w x2)` with
    /// constant drift: the reference is the homogenized equation, whose
    /// diffusion coefficient depends on the domain.
    Homogenized {
        omega: f64,
        amplitude: f64,
        drift: Vec<(String, f64)>,
        diffusion_term: String,
    },
}

/// Ground-truth interacting particle system.
#[derive(Clone)]
pub struct IpsModel {
    pub name: String,
    pub dim: usize,
    pub interaction: Interaction,
    pub local: LocalForce,
    pub diffusivity: Diffusivity,
    pub truth: Truth,
}

impl fmt::Debug for IpsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IpsModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("truth", &self.truth)
            .finish_non_exhaustive()
    }
}

impl IpsModel {
    /// True coefficients for identification on `grid`.
    pub fn true_terms(&self, grid: &Grid) -> Result<Vec<(String, f64)>> {
        match &self.truth {
            Truth::Terms(t) => Ok(t.clone()),
            Truth::Homogenized {
                omega,
                amplitude,
                drift,
                diffusion_term,
            } => {
                let bar = harmonic_mean_diffusivity(grid, *omega, *amplitude)?;
                let mut terms = drift.clone();
                terms.push((diffusion_term.clone(), bar));
                Ok(terms)
            }
        }
    }
}

/// Critical diffusivity of the two-dimensional logarithmic model.
pub const CRITICAL_DIFFUSIVITY: f64 = 0.282_094_791_773_878_14; // 1/sqrt(4 pi)

/// Cutoff radius used by the logarithmic model and its library.
pub const LOG_CUTOFF: f64 = 0.01;

/// Keys accepted by [`builtin_model`].
pub const CATALOG: &[&str] = &[
    "cos2d:w1",
    "cos2d:w20",
    "qanr1d:zero",
    "qanr1d:const",
    "qanr1d:linear",
    "log2d:zero",
    "log2d:critical",
];

/// All catalog models.
pub fn builtin_models() -> Vec<IpsModel> {
    CATALOG
        .iter()
        .map(|k| builtin_model(k).expect("catalog keys are valid"))
        .collect()
}

/// Looks up a catalog model by `preset:variant`. For `cos2d` any
/// `w<omega>` variant is accepted.
pub fn builtin_model(key: &str) -> Result<IpsModel> {
    let (preset, variant) = key
        .split_once(':')
        .ok_or_else(|| Error::UnknownPreset(key.to_string()))?;
    let preset: Preset = preset.parse()?;
    let unknown = || Error::UnknownPreset(key.to_string());
    match preset {
        Preset::Cos2d => {
            let omega: f64 = variant
                .strip_prefix('w')
                .and_then(|w| w.parse().ok())
                .filter(|w: &f64| *w > 0.0)
                .ok_or_else(unknown)?;
            Ok(cos2d(omega))
        }
        Preset::Qanr1d => {
            let sigma = match variant {
                "zero" => QanrNoise::Zero,
                "const" => QanrNoise::Constant,
                "linear" => QanrNoise::Linear,
                _ => return Err(unknown()),
            };
            Ok(qanr1d(sigma))
        }
        Preset::Log2d => match variant {
            "zero" => Ok(log2d(false)),
            "critical" => Ok(log2d(true)),
            _ => Err(unknown()),
        },
    }
}

/// Constant advection with diffusivity `sigma sigma^T = 2(1 + 0.95 cos(w x) cos(w y)) I`.
pub fn cos2d(omega: f64) -> IpsModel {
    const AMP: f64 = 0.95;
    let diffusivity = Diffusivity::Scalar(Arc::new(move |x: &[f64]| {
        (2.0 * (1.0 + AMP * (omega * x[0]).cos() * (omega * x[1]).cos())).sqrt()
    }));
    // The drift columns are d/dx_i (U f); grad V = (-1, -1) moves mass toward +x, +y.
    let drift = vec![(desc::v_cos(1, 0, 0), -1.0), (desc::v_cos(2, 0, 0), -1.0)];
    let truth = if omega <= 5.0 && omega.fract() == 0.0 {
        let mut t = drift;
        t.push((desc::s_lap_cos(0, 0), 1.0));
        if omega != 0.0 {
            t.push((desc::s_lap_cos(omega as u32, omega as u32), AMP));
        }
        Truth::Terms(t)
    } else {
        Truth::Homogenized {
            omega,
            amplitude: AMP,
            drift,
            diffusion_term: desc::s_lap_cos(0, 0),
        }
    };
    IpsModel {
        name: format!("cos2d:w{omega}"),
        dim: 2,
        interaction: Interaction::None,
        local: LocalForce::Constant(vec![-1.0, -1.0]),
        diffusivity,
        truth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QanrNoise {
    Zero,
    /// `sigma = sqrt(0.2)`
    Constant,
    /// `sigma = sqrt(0.2) |x - 2|`
    Linear,
}

pub fn qanr1d(noise: QanrNoise) -> IpsModel {
    let s = 0.2_f64.sqrt();
    let mut truth = vec![(desc::k_power(1), -1.0), (desc::k_power(2), 0.5)];
    let (diffusivity, variant) = match noise {
        QanrNoise::Zero => (Diffusivity::Zero, "zero"),
        QanrNoise::Constant => {
            truth.push((desc::s_monomial(0), 0.1));
            (Diffusivity::Constant(s), "const")
        }
        QanrNoise::Linear => {
            // (1/2) sigma^2 = 0.1 (x - 2)^2
            truth.push((desc::s_monomial(0), 0.4));
            truth.push((desc::s_monomial(1), -0.4));
            truth.push((desc::s_monomial(2), 0.1));
            (
                Diffusivity::Scalar(Arc::new(move |x: &[f64]| s * (x[0] - 2.0).abs())),
                "linear",
            )
        }
    };
    IpsModel {
        name: format!("qanr1d:{variant}"),
        dim: 1,
        interaction: Interaction::Qanr,
        local: LocalForce::None,
        diffusivity,
        truth: Truth::Terms(truth),
    }
}

pub fn log2d(critical: bool) -> IpsModel {
    let mut truth = vec![(desc::k_cutoff_log(), 1.0 / (2.0 * PI))];
    let diffusivity = if critical {
        let half_var = CRITICAL_DIFFUSIVITY * CRITICAL_DIFFUSIVITY / 2.0;
        truth.push((desc::s_mixed_cos(1, 1, 0, 0), half_var));
        truth.push((desc::s_mixed_cos(2, 2, 0, 0), half_var));
        Diffusivity::Constant(CRITICAL_DIFFUSIVITY)
    } else {
        Diffusivity::Zero
    };
    IpsModel {
        name: format!("log2d:{}", if critical { "critical" } else { "zero" }),
        dim: 2,
        interaction: Interaction::LogCutoff { delta: LOG_CUTOFF },
        local: LocalForce::None,
        diffusivity,
        truth: Truth::Terms(truth),
    }
}

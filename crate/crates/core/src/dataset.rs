//! Particle trajectory data and its binary file layout.
//!
//! # File layout
//!
//! All integers are unsigned 64-bit little endian, all reals IEEE-754
//! binary64 little endian.
//!
//! | offset        | content                                     |
//! |---------------|---------------------------------------------|
//! | 0             | magic `b"MFIDDS01"` (8 bytes)               |
//! | 8             | `M` experiments                             |
//! | 16            | `L` timepoints                              |
//! | 24            | `N` particles per experiment                |
//! | 32            | `d` spatial dimension                       |
//! | 40            | `L` timestamps                              |
//! | 40 + 8L       | `M*L*N*d` positions, row-major `[m][l][i][c]` |

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MFIDDS01";

/// Positions of `N` particles in `d` dimensions at `L` times for `M` experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDataset {
    experiments: usize,
    particles: usize,
    dim: usize,
    times: Vec<f64>,
    positions: Vec<f64>,
}

impl ParticleDataset {
    pub fn new(
        experiments: usize,
        particles: usize,
        dim: usize,
        times: Vec<f64>,
        positions: Vec<f64>,
    ) -> Result<Self> {
        if experiments == 0 || particles == 0 || dim == 0 || times.is_empty() {
            return Err(Error::Dimension("dataset must be nonempty".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("timestamps must be strictly increasing".into()));
        }
        let expected = experiments * times.len() * particles * dim;
        if positions.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} position entries, got {}",
                positions.len()
            )));
        }
        Ok(Self {
            experiments,
            particles,
            dim,
            times,
            positions,
        })
    }

    pub fn experiments(&self) -> usize {
        self.experiments
    }

    pub fn timepoints(&self) -> usize {
        self.times.len()
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// All positions, row-major `[m][l][i][c]`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    /// `(M, L, N, d)`
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.experiments, self.times.len(), self.particles, self.dim)
    }

    /// Particle positions of experiment `m` at timepoint `l`, `N*d` entries.
    pub fn frame(&self, m: usize, l: usize) -> &[f64] {
        let stride = self.particles * self.dim;
        let start = (m * self.times.len() + l) * stride;
        &self.positions[start..start + stride]
    }

    /// Concatenates experiment blocks of datasets sharing `N`, `d` and times.
    pub fn concat(parts: Vec<ParticleDataset>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let mut first = iter
            .next()
            .ok_or_else(|| Error::Dimension("nothing to concatenate".into()))?;
        for part in iter {
            if part.particles != first.particles || part.dim != first.dim || part.times != first.times {
                return Err(Error::Dimension("experiment blocks differ in shape".into()));
            }
            first.experiments += part.experiments;
            first.positions.extend_from_slice(&part.positions);
        }
        Ok(first)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.experiments, self.times.len(), self.particles, self.dim] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * (self.times.len() + self.positions.len()));
        for x in self.times.iter().chain(&self.positions) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a particle dataset (bad magic)".into()));
        }
        let mut header = [0usize; 4];
        for h in header.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *h = usize::try_from(u64::from_le_bytes(b))
                .map_err(|_| Error::Format("header value overflows usize".into()))?;
        }
        let [m, l, n, d] = header;
        let count = m
            .checked_mul(l)
            .and_then(|v| v.checked_mul(n))
            .and_then(|v| v.checked_mul(d))
            .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
        let times = read_f64s(&mut r, l)?;
        let positions = read_f64s(&mut r, count)?;
        Self::new(m, n, d, times, positions)
    }
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trial {trial}: non-finite position for particle {particle} at fine step {step}")]
    BlowUp {
        trial: usize,
        particle: usize,
        step: usize,
    },

    #[error("degenerate density: coordinate {axis} has zero spread")]
    DegenerateDensity { axis: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no admissible query points along {axis}: support {support} cells does not fit in {available}")]
    SupportTooLarge {
        axis: String,
        support: usize,
        available: usize,
    },

    #[error("test function degree p={0} is too small, need p >= 3")]
    DegreeTooSmall(u32),

    #[error("library: {0}")]
    Library(String),

    #[error("kernel `{term}` is not finite at offset {offset:?}; use the cutoff form [.]_delta for singular kernels")]
    SingularKernel { term: String, offset: Vec<f64> },

    #[error("assembled system has a non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("sparsity threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),

    #[error("every threshold in the grid produced an empty model; review the library scaling")]
    AllDegenerate,

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

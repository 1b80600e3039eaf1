//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by embedding, extension, and model-construction routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A hyperparameter or option is outside its valid range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Input data violates a precondition (non-finite entries, bad shape, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A numerical routine failed or produced a degenerate result.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// Every kernel weight between the query and the training set underflowed;
    /// the point is too far from the sampled manifold to extend to.
    #[error("query point is too far from the sampled manifold")]
    OutOfSampleTooFar,

    /// The requested operation is only defined for density-normalization
    /// exponent alpha = 0.
    #[error("operation requires a model trained with alpha = 0")]
    UnsupportedNormalization,

    /// The kernel spectrum decays below the usable conditioning cutoff.
    #[error("ill-conditioned kernel spectrum: {0}")]
    IllConditioned(String),

    /// Too many grid nodes failed to lift for the table to be usable.
    #[error("grid covers too little of the sampled manifold: {masked} of {total} nodes masked")]
    GridCoverage { masked: usize, total: usize },

    /// The queried latent point is outside the tabulated region (or in a
    /// masked cell), i.e. the trajectory left the manifold neighborhood.
    #[error("state left the tabulated manifold region")]
    LeftManifold,

    /// Subsampling kept fewer points than required for a usable training set.
    #[error("insufficient samples: kept {kept}, need at least {required}")]
    InsufficientSampling { kept: usize, required: usize },

    /// Explicit time stepping blew up (norm exceeded the runaway bound).
    #[error("unstable time step: solution norm exceeded {0:e}")]
    UnstableStep(f64),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed CSV input.
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

use crate::field::Plane;

#[derive(Debug, Error)]
pub enum Error {
    #[error("root finder for zero {index} of J_{order} did not converge")]
    RootNotConverged { order: u32, index: u32 },

    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("invalid beam parameters: {0}")]
    InvalidBeam(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid grating: {0}")]
    InvalidGrating(String),

    #[error("binarization threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),

    #[error("expected a field on the {expected} plane, got {found}")]
    PlaneMismatch { expected: Plane, found: Plane },

    #[error("diffraction order {h} lies outside the sampled angular window")]
    OrderOutOfBand { h: i32 },

    #[error("pattern has no grating period; cannot locate order {h}")]
    NoGratingPeriod { h: i32 },

    #[error("zone {zone} holds {fringes:.2} fringes, need at least 2")]
    InsufficientFringes { zone: usize, fringes: f64 },

    #[error("field carries no energy")]
    DegenerateField,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("refusing to overwrite {} (pass --force)", .0.display())]
    WouldOverwrite(PathBuf),

    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

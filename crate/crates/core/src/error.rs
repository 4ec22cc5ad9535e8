//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed volume file (bad header, payload mismatch, unsupported dtype...).
    /// `detail` names the offending field.
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },

    /// A LabelVolume invariant does not hold.
    #[error("invalid volume: {0}")]
    Volume(String),

    #[error("label {label} is not in the label map")]
    UnknownLabel { label: u16 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Empty blood pool or similar degenerate segmentation, with context.
    #[error("degenerate volume for subject {subject}, scan {scan}, method {method}, sample {sample_index}: {detail}")]
    DegenerateVolume {
        subject: String,
        scan: String,
        method: String,
        sample_index: usize,
        detail: String,
    },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("sample size {n} outside supported range [{min}, {max}]")]
    SampleSizeRange { n: usize, min: usize, max: usize },

    #[error("zero-variance sample: {0}")]
    ZeroVariance(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("simulator: {0}")]
    Simulator(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input (files, manifests, parameters)
    /// rather than internal failures. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

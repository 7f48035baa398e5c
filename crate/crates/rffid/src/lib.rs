//! Noise-robust RF fingerprint identification at desk scale.
//!
//! The pipeline synthesizes O-QPSK baseband frames for a population of
//! synthetic transmitters, imprints per-device impairments, passes frames
//! through an AWGN channel, extracts squared cross power spectral density
//! (SCPSD) features, applies a closed-form anti-noise compensation, and
//! classifies devices with a random-subspace KNN ensemble.
//!
//! Modules follow the processing chain:
//! - [`baseband`]: ideal O-QPSK frame synthesis (cyclic-shift symbols)
//! - [`impairment`]: per-device fingerprints applied by circular convolution
//! - [`channel`]: SNR-calibrated AWGN, energy bookkeeping, blind SNR estimation
//! - [`features`]: CPSD/SCPSD extraction per symbol, averaged per frame
//! - [`antinoise`]: energy-curve fitting and noise-offset compensation
//! - [`classify`]: KNN and random-subspace KNN ensemble
//! - [`io`] / [`pipeline`]: file formats and end-to-end orchestration

pub mod antinoise;
pub mod baseband;
pub mod channel;
pub mod classify;
pub mod features;
pub mod impairment;
pub mod io;
pub mod pipeline;
pub mod seed;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty frame")]
    EmptyFrame,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("symbol index {index} out of range [0, {limit})")]
    SymbolIndexOutOfRange { index: usize, limit: usize },

    #[error("zero-energy frame cannot be normalized")]
    ZeroEnergyFrame,

    #[error("frame too short: {len} samples, need at least {min}")]
    FrameTooShort { len: usize, min: usize },

    #[error("energy fit did not converge after {iterations} iterations (rms residual {rms_residual:.6e})")]
    FitDidNotConverge { iterations: usize, rms_residual: f64 },

    #[error("need at least {min} distinct SNR levels, got {got}")]
    TooFewSnrLevels { min: usize, got: usize },

    #[error("device {device_id}: {source}")]
    Device {
        device_id: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {frame_id}: {source}")]
    Frame {
        frame_id: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("missing SNR metadata for frame {0}")]
    MissingSnr(u32),

    #[error("feature is not a normalized SCPSD")]
    NotNormalized,

    #[error("snr {snr_db} dB outside fit range [{lo}, {hi}] dB")]
    SnrOutOfRange { snr_db: f64, lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed file {path} at byte {offset}: {message}")]
    Malformed {
        path: String,
        offset: u64,
        message: String,
    },

    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("feature sidecar hash mismatch for {path}")]
    HashMismatch { path: String },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

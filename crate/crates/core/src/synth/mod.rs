//! Synthetic SRS traces: tapped-delay-line channels with Gauss–Markov tap
//! evolution and per-device analog impairments.
//!
//! The tap-gain lag-1 correlation is `ρ = exp(-2π f_d T)` for Doppler `f_d`
//! and probe period `T`.

mod dataset;
mod profile;
mod session;

pub use dataset::{
    derive_seed, gen_dataset, DatasetConfig, Manifest, ManifestSession, SessionConfig,
    MANIFEST_FILE, TRACE_EXTENSION,
};
pub use profile::{DeviceProfile, Tap, MAX_TAPS};
pub use session::{gen_session, SessionSpec, TapProcess, Q15_HEADROOM};

use std::path::PathBuf;

use thiserror::Error;

use crate::trace_format::TraceError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid device profile field `{field}`: {reason}")]
    InvalidProfile { field: String, reason: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("quantization overflow: {0}")]
    QuantizationOverflow(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

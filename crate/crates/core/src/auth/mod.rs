//! Probe classifiers: the Pearson-threshold baseline and an SE-ResNet1D
//! trained from scratch on the extracted features.

mod model_file;
mod network;
mod pearson;
mod train;

pub use model_file::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use network::{SeBlock, SeResNet1d, SeResNet1dConfig};
pub use pearson::{pearson, unified_score, PearsonAuthenticator, DEFAULT_ALPHA};
pub use train::{
    standardization, train, train_with_progress, EpochRecord, TrainConfig, TrainedModel, LEGIT_CLASS,
};

use crate::features::{FeatureMatrix, FEATURE_DIM};
use crate::numerology::N_ACTIVE;

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("enrolment needs at least 2 probes, got {found}")]
    NotEnoughEnrollment { found: usize },
    #[error("enrolment reference has zero variance")]
    DegenerateReference,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{split} split is empty")]
    EmptySplit { split: &'static str },
    #[error("row has no legit/attack label")]
    UnlabeledRow,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("non-finite activation")]
    NonFiniteActivation,
    #[error("model file: {0}")]
    Format(String),
    #[error("model file {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

/// Anything that maps feature rows to legitimacy scores in `[0, 1]`.
pub trait Scorer {
    fn score_batch(&mut self, m: &FeatureMatrix) -> Result<Vec<f64>, AuthError>;
}

impl Scorer for TrainedModel {
    fn score_batch(&mut self, m: &FeatureMatrix) -> Result<Vec<f64>, AuthError> {
        TrainedModel::score_batch(self, m)
    }
}

impl Scorer for PearsonAuthenticator {
    /// Correlation against the amplitude slice, mapped through
    /// [`unified_score`].
    fn score_batch(&mut self, m: &FeatureMatrix) -> Result<Vec<f64>, AuthError> {
        if m.dim != FEATURE_DIM {
            return Err(AuthError::DimensionMismatch { expected: FEATURE_DIM, found: m.dim });
        }
        let mut amps = vec![0.0; N_ACTIVE];
        Ok((0..m.n_rows())
            .map(|r| {
                amps.iter_mut().zip(m.row(r)).for_each(|(a, &v)| *a = v as f64);
                unified_score(self.score_amplitudes(&amps))
            })
            .collect())
    }
}

impl PearsonAuthenticator {
    /// Enrols on the legitimate rows of a feature matrix.
    pub fn enroll_matrix(m: &FeatureMatrix) -> Result<Self, AuthError> {
        if m.dim != FEATURE_DIM {
            return Err(AuthError::DimensionMismatch { expected: FEATURE_DIM, found: m.dim });
        }
        let rows: Vec<Vec<f64>> = (0..m.n_rows())
            .filter(|&r| m.meta[r].label == crate::trace_format::DeviceLabel::Legit)
            .map(|r| m.row(r)[..N_ACTIVE].iter().map(|&v| v as f64).collect())
            .collect();
        Self::enroll_amplitudes(rows.iter().map(|r| r.as_slice()))
    }
}

//! Split construction, authentication metrics, paired split experiments and
//! per-stage latency measurement.

mod experiment;
mod latency;
mod metrics;
mod report;
mod splits;

pub use experiment::{
    evaluate_split, run_experiment, run_experiment_with_progress, Authenticator, Experiment, SplitRun,
};
pub use latency::{bench_latency, LatencyTable, StageLatency, STAGES, WARMUP_PROBES};
pub use metrics::{
    accuracy_at, compute_auc, compute_eer, eer_from_sweep, score_histogram, threshold_sweep, Histogram,
    SweepPoint,
};
pub use report::{history_csv, DetPoint, EvalReport, ExperimentSummary, ModelKind, HISTOGRAM_BINS};
pub use splits::{
    chronological_purity, make_splits, session_rows, ClassCounts, SplitCounts, SplitMethod, SplitSpec, Splits,
    MIN_SESSION_PROBES,
};

use crate::auth::AuthError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("session {session} has {probes} probes; at least 7 are needed to split")]
    SessionTooSmall { session: u32, probes: usize },
    #[error("a score class is empty")]
    EmptyClass,
    #[error("score is NaN")]
    NonFiniteScore,
    #[error("{split} split lacks one of the two classes")]
    MissingClass { split: String },
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("benchmark: {0}")]
    Bench(String),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{
    accuracy_at, compute_auc, eer_from_sweep, score_histogram, threshold_sweep, Histogram, SweepPoint,
};
use super::{EvalError, LatencyTable, SplitCounts, SplitMethod};
use crate::auth::EpochRecord;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pearson,
    Resnet,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pearson => "pearson",
            ModelKind::Resnet => "resnet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub far_pct: f64,
    pub frr_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub split: SplitMethod,
    pub counts: SplitCounts,
    pub eer: f64,
    pub eer_threshold: f64,
    pub auc: f64,
    pub accuracy_at_half: f64,
    pub sweep: Vec<SweepPoint>,
    pub det_points: Vec<DetPoint>,
    pub histogram: Histogram,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<LatencyTable>,
}

impl EvalReport {
    pub fn from_scores(
        model: ModelKind,
        split: SplitMethod,
        counts: SplitCounts,
        legit: &[f64],
        attack: &[f64],
    ) -> Result<Self, EvalError> {
        let sweep = threshold_sweep(legit, attack)?;
        let (eer, eer_threshold) = eer_from_sweep(&sweep);
        let det_points =
            sweep.iter().map(|p| DetPoint { far_pct: 100.0 * p.far, frr_pct: 100.0 * p.frr }).collect();
        Ok(EvalReport {
            model,
            split,
            counts,
            eer,
            eer_threshold,
            auc: compute_auc(legit, attack)?,
            accuracy_at_half: accuracy_at(legit, attack, 0.5),
            det_points,
            histogram: score_histogram(legit, attack, HISTOGRAM_BINS),
            sweep,
            latency: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn det_csv(&self) -> String {
        let mut s = String::from("far_pct,frr_pct\n");
        for p in &self.det_points {
            writeln!(s, "{},{}", p.far_pct, p.frr_pct).unwrap();
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let h = &self.histogram;
        let mut s = String::from("bin_lo,bin_hi,legit_density,attack_density\n");
        for i in 0..h.legit_density.len() {
            writeln!(s, "{},{},{},{}", h.edges[i], h.edges[i + 1], h.legit_density[i], h.attack_density[i])
                .unwrap();
        }
        s
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,lr,train_loss,val_accuracy\n");
    for h in history {
        writeln!(s, "{},{},{},{}", h.epoch, h.lr, h.train_loss, h.val_accuracy).unwrap();
    }
    s
}

/// Paired reports plus `EER_chronological - EER_random` when both exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: ModelKind,
    pub reports: Vec<EvalReport>,
    pub delta_eer: Option<f64>,
}

impl ExperimentSummary {
    pub fn new(model: ModelKind, reports: Vec<EvalReport>) -> Self {
        let eer = |m: SplitMethod| reports.iter().find(|r| r.split == m).map(|r| r.eer);
        let delta_eer = match (eer(SplitMethod::Chronological), eer(SplitMethod::Random)) {
            (Some(c), Some(r)) => Some(c - r),
            _ => None,
        };
        ExperimentSummary { model, reports, delta_eer }
    }

    /// Writes `summary.json` and, per split, `report_<split>.json`,
    /// `det_<split>.csv` and `hist_<split>.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), EvalError> {
        let io = |path: &Path, bytes: &[u8]| {
            crate::write_atomic(path, bytes).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
        };
        for r in &self.reports {
            let name = r.split.name();
            io(&dir.join(format!("report_{name}.json")), r.to_json().as_bytes())?;
            io(&dir.join(format!("det_{name}.csv")), r.det_csv().as_bytes())?;
            io(&dir.join(format!("hist_{name}.csv")), r.histogram_csv().as_bytes())?;
        }
        let summary = serde_json::to_string_pretty(self).expect("summary serializes");
        io(&dir.join("summary.json"), summary.as_bytes())
    }
}

//! Per-probe feature extraction into a fixed 2,531-dimensional layout.

pub mod doppler;
mod matrix;
pub mod nonlinear;
pub mod pdp;
pub mod spectral;

pub use doppler::doppler_temporal_features;
pub use matrix::{
    extract_dataset, extract_probes, read_feature_file, write_feature_file, FeatureError,
    FeatureMatrix, RowMeta, FEATURE_MAGIC, ROW_META_BYTES,
};
pub use nonlinear::nonlinear_features;
pub use pdp::pdp_delay_features;
pub use spectral::{amplitude_features, diff_phase_features};

use serde::Serialize;

use crate::trace_format::SrsProbe;

/// Probes per Doppler window, including the current one.
pub const WINDOW_LEN: usize = 20;

pub const FEATURE_DIM: usize = 2531;

/// Named half-open slices of the feature vector.
pub const LAYOUT: [(&str, usize, usize); 5] = [
    ("amplitude", 0, 1248),
    ("diff_phase", 1248, 2495),
    ("pdp_delay", 2495, 2511),
    ("doppler_temporal", 2511, 2519),
    ("nonlinear", 2519, 2531),
];

pub fn slice_boundaries() -> [usize; 6] {
    [0, 1248, 2495, 2511, 2519, 2531]
}

#[derive(Debug, Clone, Serialize)]
pub struct LayoutSlice {
    pub name: &'static str,
    pub start: usize,
    pub end: usize,
}

pub fn layout_manifest() -> Vec<LayoutSlice> {
    LAYOUT
        .iter()
        .map(|&(name, start, end)| LayoutSlice { name, start, end })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        LAYOUT
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(_, s, e)| &self.values[s..e])
    }
}

/// The current probe plus up to `WINDOW_LEN - 1` earlier probes of the same
/// RNTI stream, oldest first.
#[derive(Debug, Clone, Copy)]
pub struct ProbeWindow<'a> {
    pub current: &'a SrsProbe,
    pub history: &'a [SrsProbe],
}

impl<'a> ProbeWindow<'a> {
    pub fn new(current: &'a SrsProbe, history: &'a [SrsProbe]) -> Result<Self, String> {
        if history.len() > WINDOW_LEN - 1 {
            return Err(format!("history holds {} probes, at most {}", history.len(), WINDOW_LEN - 1));
        }
        let ordered = history
            .iter()
            .chain(std::iter::once(current))
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[0].timestamp_ns < w[1].timestamp_ns);
        if !ordered {
            return Err("window timestamps must be strictly increasing".into());
        }
        Ok(ProbeWindow { current, history })
    }
}

/// Concatenates all feature groups in layout order.
pub fn extract(window: &ProbeWindow<'_>) -> FeatureVector {
    let amps = amplitude_features(window.current);
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.extend_from_slice(&amps);
    values.extend(diff_phase_features(window.current));
    values.extend(pdp_delay_features(window.current, &amps));
    values.extend(doppler_temporal_features(window, &amps));
    values.extend(nonlinear_features(&amps));
    debug_assert_eq!(values.len(), FEATURE_DIM);
    FeatureVector { values }
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::features::FeatureMatrix;
use crate::synth::derive_seed;
use crate::trace_format::DeviceLabel;

pub const MIN_SESSION_PROBES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    #[serde(alias = "chrono")]
    Chronological,
    Random,
}

impl SplitMethod {
    pub fn name(self) -> &'static str {
        match self {
            SplitMethod::Chronological => "chronological",
            SplitMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub method: SplitMethod,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

fn default_fractions() -> [f64; 3] {
    [0.70, 0.15, 0.15]
}

impl SplitSpec {
    pub fn chronological() -> Self {
        SplitSpec { method: SplitMethod::Chronological, fractions: default_fractions(), seed: 0 }
    }

    pub fn random(seed: u64) -> Self {
        SplitSpec { method: SplitMethod::Random, fractions: default_fractions(), seed }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSplit(format!(
                "fractions {:?} must be positive and sum to 1",
                self.fractions
            )));
        }
        Ok(())
    }

    /// Train and validation counts for a session of `n` probes; the test
    /// split takes the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize) {
        // The epsilon keeps exact products such as 0.7 * 30 from flooring low.
        let take = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        (take(self.fractions[0]), take(self.fractions[1]))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub legit: usize,
    pub attack: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: ClassCounts,
    pub val: ClassCounts,
    pub test: ClassCounts,
}

fn class_counts(m: &FeatureMatrix, rows: &[usize]) -> ClassCounts {
    let mut c = ClassCounts::default();
    for &r in rows {
        match m.meta[r].label {
            DeviceLabel::Legit => c.legit += 1,
            DeviceLabel::Attack => c.attack += 1,
            DeviceLabel::Unknown => {}
        }
    }
    c
}

impl Splits {
    pub fn counts(&self, m: &FeatureMatrix) -> SplitCounts {
        SplitCounts {
            train: class_counts(m, &self.train),
            val: class_counts(m, &self.val),
            test: class_counts(m, &self.test),
        }
    }
}

/// Row indices of each session in `(timestamp, rnti)` order.
pub fn session_rows(m: &FeatureMatrix) -> BTreeMap<u32, Vec<usize>> {
    let mut by_session: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (r, meta) in m.meta.iter().enumerate() {
        by_session.entry(meta.session).or_default().push(r);
    }
    for rows in by_session.values_mut() {
        rows.sort_by_key(|&r| (m.meta[r].timestamp_ns, m.meta[r].rnti, r));
    }
    by_session
}

/// Splits every session independently. Chronological keeps temporal order;
/// random shuffles within the session with the same per-session counts, so
/// both methods yield identical class counts per split.
pub fn make_splits(m: &FeatureMatrix, spec: &SplitSpec) -> Result<Splits, EvalError> {
    spec.validate()?;
    let mut out = Splits::default();
    for (session, mut rows) in session_rows(m) {
        let n = rows.len();
        if n < MIN_SESSION_PROBES {
            return Err(EvalError::SessionTooSmall { session, probes: n });
        }
        if spec.method == SplitMethod::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, session as u64));
            rows.shuffle(&mut rng);
        }
        let (n_train, n_val) = spec.counts(n);
        out.train.extend_from_slice(&rows[..n_train]);
        out.val.extend_from_slice(&rows[n_train..n_train + n_val]);
        out.test.extend_from_slice(&rows[n_train + n_val..]);
    }
    Ok(out)
}

/// Checks that within every session all training timestamps precede all
/// validation timestamps, which precede all test timestamps.
pub fn chronological_purity(m: &FeatureMatrix, s: &Splits) -> bool {
    let mut bounds: BTreeMap<u32, [(u64, u64); 3]> = BTreeMap::new();
    for (k, rows) in [&s.train, &s.val, &s.test].into_iter().enumerate() {
        for &r in rows {
            let meta = &m.meta[r];
            let e = bounds.entry(meta.session).or_insert([(u64::MAX, 0); 3]);
            e[k].0 = e[k].0.min(meta.timestamp_ns);
            e[k].1 = e[k].1.max(meta.timestamp_ns);
        }
    }
    bounds.values().all(|b| {
        let empty = |i: usize| b[i].0 == u64::MAX;
        let before = |i: usize, j: usize| empty(i) || empty(j) || b[i].1 < b[j].0;
        before(0, 1) && before(1, 2) && before(0, 2)
    })
}

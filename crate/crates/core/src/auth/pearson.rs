use serde::{Deserialize, Serialize};

use super::AuthError;
use crate::features::amplitude_features;
use crate::numerology::N_ACTIVE;
use crate::trace_format::SrsProbe;

pub const DEFAULT_ALPHA: f64 = 0.85;

/// Pearson correlation of the probe amplitude vector against a mean
/// enrolment profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonAuthenticator {
    pub reference_profile: Vec<f64>,
    pub threshold_alpha: f64,
    pub n_enroll: usize,
}

/// Sample Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson inputs differ in length");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

impl PearsonAuthenticator {
    pub fn enroll(probes: &[SrsProbe]) -> Result<Self, AuthError> {
        let amps: Vec<Vec<f64>> = probes.iter().map(amplitude_features).collect();
        Self::enroll_amplitudes(amps.iter().map(|a| a.as_slice()))
    }

    /// Enrols from precomputed amplitude vectors.
    pub fn enroll_amplitudes<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, AuthError> {
        let mut sum = vec![0.0; N_ACTIVE];
        let mut n = 0usize;
        for row in rows {
            if row.len() != N_ACTIVE {
                return Err(AuthError::DimensionMismatch { expected: N_ACTIVE, found: row.len() });
            }
            sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            n += 1;
        }
        if n < 2 {
            return Err(AuthError::NotEnoughEnrollment { found: n });
        }
        let reference: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        if reference.iter().all(|&v| v == reference[0]) {
            return Err(AuthError::DegenerateReference);
        }
        Ok(PearsonAuthenticator { reference_profile: reference, threshold_alpha: DEFAULT_ALPHA, n_enroll: n })
    }

    pub fn with_threshold(mut self, alpha: f64) -> Result<Self, AuthError> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(AuthError::InvalidConfig {
                field: "threshold_alpha".into(),
                reason: "must be in [-1, 1]".into(),
            });
        }
        self.threshold_alpha = alpha;
        Ok(self)
    }

    pub fn score_amplitudes(&self, amplitudes: &[f64]) -> f64 {
        pearson(amplitudes, &self.reference_profile)
    }

    pub fn score(&self, probe: &SrsProbe) -> f64 {
        self.score_amplitudes(&amplitude_features(probe))
    }

    pub fn accepts(&self, score: f64) -> bool {
        score >= self.threshold_alpha
    }
}

/// Maps a correlation in `[-1, 1]` onto `[0, 1]`.
pub fn unified_score(rho: f64) -> f64 {
    (rho + 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_correlation() {
        let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 6.0]);
        assert!((r - 10.0 / 148f64.sqrt()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn affine_invariance_and_zero_variance() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 7.0).collect();
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[3.0; 50]), 0.0);
        assert_eq!(unified_score(1.0), 1.0);
        assert_eq!(unified_score(-1.0), 0.0);
    }

    fn ramp(scale: f64) -> Vec<f64> {
        (0..N_ACTIVE).map(|i| scale * (1.0 + (i % 13) as f64)).collect()
    }

    #[test]
    fn enrolment_mean() {
        let (a, b) = (ramp(1.0), ramp(3.0));
        let auth = PearsonAuthenticator::enroll_amplitudes([a.as_slice(), b.as_slice()]).unwrap();
        for (r, v) in auth.reference_profile.iter().zip(ramp(2.0)) {
            assert!((r - v).abs() < 1e-12);
        }
        assert_eq!(auth.n_enroll, 2);
        assert_eq!(auth.threshold_alpha, 0.85);
    }

    #[test]
    fn enrolment_errors() {
        let a = ramp(1.0);
        assert!(matches!(
            PearsonAuthenticator::enroll_amplitudes([a.as_slice()]),
            Err(AuthError::NotEnoughEnrollment { found: 1 })
        ));
        let flat = vec![0.4; N_ACTIVE];
        assert!(matches!(
            PearsonAuthenticator::enroll_amplitudes([flat.as_slice(), flat.as_slice()]),
            Err(AuthError::DegenerateReference)
        ));
    }
}

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::numerology::FFT_SIZE;

pub const MAX_TAPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    /// Delay in samples of the 1,536-point grid.
    pub delay_index: usize,
    /// Mean linear power of the tap.
    pub mean_power: f64,
    /// Static phase offset of the tap, radians.
    #[serde(default)]
    pub phase0: f64,
}

/// Synthetic hardware and propagation fingerprint of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub taps: Vec<Tap>,
    #[serde(default)]
    pub cfo_hz: f64,
    #[serde(default = "unit")]
    pub iq_gain_imbalance: f64,
    #[serde(default)]
    pub iq_phase_imbalance_rad: f64,
    #[serde(default)]
    pub pa_coeff3: f64,
    #[serde(default)]
    pub doppler_hz: f64,
    #[serde(default)]
    pub toa_mean_ns: f64,
    #[serde(default)]
    pub toa_jitter_ns: f64,
    #[serde(default = "default_snr")]
    pub snr_db_mean: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_snr() -> f64 {
    25.0
}

fn invalid(field: &str, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidProfile {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl DeviceProfile {
    /// Flat single-tap channel with no impairments.
    pub fn single_tap(delay_index: usize) -> Self {
        DeviceProfile {
            taps: vec![Tap {
                delay_index,
                mean_power: 1.0,
                phase0: 0.0,
            }],
            cfo_hz: 0.0,
            iq_gain_imbalance: 1.0,
            iq_phase_imbalance_rad: 0.0,
            pa_coeff3: 0.0,
            doppler_hz: 0.0,
            toa_mean_ns: 0.0,
            toa_jitter_ns: 0.0,
            snr_db_mean: default_snr(),
        }
    }

    /// Lag-1 correlation of the tap-gain process at the given probe period,
    /// `exp(-2π f_d T)`.
    pub fn correlation(&self, probe_period_ns: u64) -> f64 {
        (-2.0 * std::f64::consts::PI * self.doppler_hz * probe_period_ns as f64 * 1e-9).exp()
    }

    /// Doppler frequency that yields lag-1 correlation `rho` at the period.
    pub fn doppler_for_correlation(rho: f64, probe_period_ns: u64) -> f64 {
        -rho.ln() / (2.0 * std::f64::consts::PI * probe_period_ns as f64 * 1e-9)
    }

    pub fn validate(&self, probe_period_ns: u64) -> Result<(), SynthError> {
        if self.taps.is_empty() || self.taps.len() > MAX_TAPS {
            return Err(invalid(
                "taps",
                format!("need 1..={MAX_TAPS} taps, got {}", self.taps.len()),
            ));
        }
        for w in self.taps.windows(2) {
            if w[1].delay_index <= w[0].delay_index {
                return Err(invalid("taps.delay_index", "delays must be strictly increasing"));
            }
        }
        if let Some(t) = self.taps.iter().find(|t| t.delay_index >= FFT_SIZE) {
            return Err(invalid(
                "taps.delay_index",
                format!("{} outside [0, {}]", t.delay_index, FFT_SIZE - 1),
            ));
        }
        if self
            .taps
            .iter()
            .any(|t| !(t.mean_power.is_finite() && t.mean_power >= 0.0) || !t.phase0.is_finite())
        {
            return Err(invalid("taps.mean_power", "tap power must be finite and non-negative"));
        }
        if self.taps.iter().map(|t| t.mean_power).sum::<f64>() <= 0.0 {
            return Err(invalid("taps.mean_power", "total tap power must be positive"));
        }
        let scalars = [
            ("cfo_hz", self.cfo_hz),
            ("iq_gain_imbalance", self.iq_gain_imbalance),
            ("iq_phase_imbalance_rad", self.iq_phase_imbalance_rad),
            ("pa_coeff3", self.pa_coeff3),
            ("doppler_hz", self.doppler_hz),
            ("toa_mean_ns", self.toa_mean_ns),
            ("toa_jitter_ns", self.toa_jitter_ns),
            ("snr_db_mean", self.snr_db_mean),
        ];
        if let Some((name, _)) = scalars.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(name, "must be finite"));
        }
        if self.iq_gain_imbalance <= 0.0 {
            return Err(invalid("iq_gain_imbalance", "must be positive"));
        }
        if self.toa_jitter_ns < 0.0 {
            return Err(invalid("toa_jitter_ns", "must be non-negative"));
        }
        let nyquist = 0.5e9 / probe_period_ns as f64;
        if self.doppler_hz < 0.0 || self.doppler_hz >= nyquist {
            return Err(invalid(
                "doppler_hz",
                format!("must lie in [0, {nyquist}) Hz for this probe rate"),
            ));
        }
        Ok(())
    }
}

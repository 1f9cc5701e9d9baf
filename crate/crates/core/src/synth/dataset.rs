use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::profile::{DeviceProfile, Tap};
use super::session::{gen_session, SessionSpec};
use super::SynthError;
use crate::fsutil::write_atomic;
use crate::numerology::DEFAULT_PROBE_PERIOD_NS;
use crate::trace_format::{DeviceLabel, TraceWriter};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_EXTENSION: &str = "srstrace";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub id: String,
    /// Key into [`DatasetConfig::devices`].
    pub device: String,
    pub label: DeviceLabel,
    pub n_probes: usize,
    pub rnti: u16,
    #[serde(default)]
    pub start_timestamp_ns: u64,
    /// Overrides the seed derived from the dataset seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_period")]
    pub probe_period_ns: u64,
    pub devices: BTreeMap<String, DeviceProfile>,
    pub sessions: Vec<SessionConfig>,
}

fn default_period() -> u64 {
    DEFAULT_PROBE_PERIOD_NS
}

/// Mixes a dataset seed with a session index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn taps(delays: &[usize], powers_db: &[f64]) -> Vec<Tap> {
    delays
        .iter()
        .zip(powers_db)
        .enumerate()
        .map(|(i, (&d, &db))| Tap {
            delay_index: d,
            mean_power: 10f64.powf(db / 10.0),
            phase0: 0.7 * i as f64,
        })
        .collect()
}

impl DatasetConfig {
    /// Legitimate USRP-class transmitter at fixed indoor position.
    pub fn default_legit_profile() -> DeviceProfile {
        DeviceProfile {
            taps: taps(&[0, 2, 5, 9, 14, 22], &[0.0, -3.0, -6.0, -9.0, -13.0, -18.0]),
            cfo_hz: 150.0,
            iq_gain_imbalance: 1.01,
            iq_phase_imbalance_rad: 0.01,
            pa_coeff3: -0.02,
            doppler_hz: 0.1,
            toa_mean_ns: 40.0,
            toa_jitter_ns: 3.0,
            snr_db_mean: 28.0,
        }
    }

    /// Handset attacker: different multipath geometry, stronger IQ imbalance
    /// and PA compression, faster channel variation.
    pub fn default_attack_profile() -> DeviceProfile {
        DeviceProfile {
            taps: taps(
                &[0, 1, 3, 6, 11, 17, 26],
                &[0.0, -2.0, -5.0, -8.0, -11.0, -15.0, -20.0],
            ),
            cfo_hz: -420.0,
            iq_gain_imbalance: 1.06,
            iq_phase_imbalance_rad: 0.08,
            pa_coeff3: -0.12,
            doppler_hz: 0.8,
            toa_mean_ns: 95.0,
            toa_jitter_ns: 12.0,
            snr_db_mean: 21.0,
        }
    }

    /// Desk-scale layout with the proportions of four legitimate capture
    /// sessions and one attack session (counts are the field sizes / 5).
    pub fn desk_default(seed: u64) -> Self {
        let day_ns: u64 = 86_400 * 1_000_000_000;
        let legit = [
            ("trace1", 642usize, 0x4601u16),
            ("anchor1", 472, 0x4602),
            ("anchor2", 1486, 0x4603),
            ("anchor3", 1362, 0x4604),
        ];
        let mut sessions: Vec<SessionConfig> = legit
            .iter()
            .enumerate()
            .map(|(i, &(id, n, rnti))| SessionConfig {
                id: id.into(),
                device: "ue1_usrp".into(),
                label: DeviceLabel::Legit,
                n_probes: n,
                rnti,
                start_timestamp_ns: i as u64 * day_ns,
                seed: None,
            })
            .collect();
        sessions.push(SessionConfig {
            id: "attack".into(),
            device: "ue2_phone".into(),
            label: DeviceLabel::Attack,
            n_probes: 102,
            rnti: 0x4701,
            start_timestamp_ns: 4 * day_ns,
            seed: None,
        });
        DatasetConfig {
            seed,
            probe_period_ns: DEFAULT_PROBE_PERIOD_NS,
            devices: BTreeMap::from([
                ("ue1_usrp".to_string(), Self::default_legit_profile()),
                ("ue2_phone".to_string(), Self::default_attack_profile()),
            ]),
            sessions,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.probe_period_ns == 0 {
            return Err(SynthError::Config("probe_period_ns must be positive".into()));
        }
        for (name, dev) in &self.devices {
            dev.validate(self.probe_period_ns).map_err(|e| match e {
                SynthError::InvalidProfile { field, reason } => SynthError::InvalidProfile {
                    field: format!("devices.{name}.{field}"),
                    reason,
                },
                other => other,
            })?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.sessions {
            if !ids.insert(s.id.as_str()) {
                return Err(SynthError::Config(format!("duplicate session id {:?}", s.id)));
            }
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(SynthError::Config(format!("invalid session id {:?}", s.id)));
            }
            if !self.devices.contains_key(&s.device) {
                return Err(SynthError::Config(format!(
                    "session {:?} references unknown device {:?}",
                    s.id, s.device
                )));
            }
            if s.n_probes == 0 {
                return Err(SynthError::Config(format!("session {:?} has no probes", s.id)));
            }
            if s.label == DeviceLabel::Unknown {
                return Err(SynthError::Config(format!(
                    "session {:?} must be labelled legit or attack",
                    s.id
                )));
            }
        }
        for (label, name) in [(DeviceLabel::Legit, "legit"), (DeviceLabel::Attack, "attack")] {
            if !self.sessions.iter().any(|s| s.label == label) {
                return Err(SynthError::Config(format!("config needs at least one {name} session")));
            }
        }
        Ok(())
    }

    pub fn session_spec(&self, index: usize) -> SessionSpec {
        let s = &self.sessions[index];
        SessionSpec {
            device: self.devices[&s.device].clone(),
            n_probes: s.n_probes,
            probe_period_ns: self.probe_period_ns,
            start_timestamp_ns: s.start_timestamp_ns,
            rnti: s.rnti,
            label: s.label,
            seed: s.seed.unwrap_or_else(|| derive_seed(self.seed, index as u64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSession {
    pub id: String,
    /// Trace file name, relative to the manifest directory.
    pub path: String,
    pub label: DeviceLabel,
    pub device: String,
    pub rnti: u16,
    pub n_probes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub probe_period_ns: u64,
    pub seed: u64,
    pub legit_probes: usize,
    pub attack_probes: usize,
    pub sessions: Vec<ManifestSession>,
    /// Device profiles used, including the attacker defaults.
    pub devices: BTreeMap<String, DeviceProfile>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, SynthError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| SynthError::Io {
            path: path.clone(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))
    }

    pub fn trace_path(&self, dir: &Path, session: &ManifestSession) -> PathBuf {
        dir.join(&session.path)
    }
}

/// Writes one trace file per session plus `manifest.json` into `out_dir`.
pub fn gen_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<Manifest, SynthError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| SynthError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut sessions = Vec::with_capacity(config.sessions.len());
    for (i, s) in config.sessions.iter().enumerate() {
        let spec = config.session_spec(i);
        let probes = gen_session(&spec)?;
        let mut w = TraceWriter::new(Vec::new())?;
        for p in &probes {
            for r in p.to_records() {
                w.write_record(&r)?;
            }
        }
        let file = format!("{}.{TRACE_EXTENSION}", s.id);
        let path = out_dir.join(&file);
        write_atomic(&path, &w.finish()?).map_err(|e| SynthError::Io { path, source: e })?;
        sessions.push(ManifestSession {
            id: s.id.clone(),
            path: file,
            label: s.label,
            device: s.device.clone(),
            rnti: s.rnti,
            n_probes: probes.len(),
            seed: spec.seed,
        });
    }
    let count = |l| sessions.iter().filter(|s| s.label == l).map(|s| s.n_probes).sum();
    let manifest = Manifest {
        format: "srspla-manifest-1".into(),
        probe_period_ns: config.probe_period_ns,
        seed: config.seed,
        legit_probes: count(DeviceLabel::Legit),
        attack_probes: count(DeviceLabel::Attack),
        sessions,
        devices: config.devices.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = out_dir.join(MANIFEST_FILE);
    write_atomic(&path, &json).map_err(|e| SynthError::Io { path, source: e })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_default_ratio_near_38_to_1() {
        let cfg = DatasetConfig::desk_default(1);
        cfg.validate().unwrap();
        let count = |l| {
            cfg.sessions
                .iter()
                .filter(|s| s.label == l)
                .map(|s| s.n_probes)
                .sum::<usize>() as f64
        };
        let ratio = count(DeviceLabel::Legit) / count(DeviceLabel::Attack);
        assert!((ratio / 38.0 - 1.0).abs() <= 0.10, "ratio {ratio}");
    }

    #[test]
    fn requires_both_classes() {
        let mut cfg = DatasetConfig::desk_default(1);
        cfg.sessions.retain(|s| s.label == DeviceLabel::Legit);
        assert!(matches!(cfg.validate(), Err(SynthError::Config(m)) if m.contains("attack")));
    }

    #[test]
    fn device_errors_carry_path() {
        let mut cfg = DatasetConfig::desk_default(1);
        cfg.devices.get_mut("ue2_phone").unwrap().doppler_hz = -1.0;
        match cfg.validate() {
            Err(SynthError::InvalidProfile { field, .. }) => {
                assert_eq!(field, "devices.ue2_phone.doppler_hz")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}

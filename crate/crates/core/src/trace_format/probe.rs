use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::c16::C16Word;
use super::record::{Payload, TraceRecord};
use super::TraceError;
use crate::numerology::{active_bins, FFT_SIZE, N_PRB, TIME_EST_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceLabel {
    Legit,
    Attack,
    Unknown,
}

impl DeviceLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            DeviceLabel::Legit => 0,
            DeviceLabel::Attack => 1,
            DeviceLabel::Unknown => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(DeviceLabel::Legit),
            1 => Some(DeviceLabel::Attack),
            2 => Some(DeviceLabel::Unknown),
            _ => None,
        }
    }
}

/// One SRS reception, decoded to floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SrsProbe {
    /// Frequency-domain estimate over the full FFT grid; guard bins are zero.
    pub freq_est: Vec<Complex64>,
    pub time_est: Vec<Complex64>,
    /// Per-RB SNR in dB.
    pub snr_per_rb: Vec<f64>,
    pub toa_ns: f64,
    pub timestamp_ns: u64,
    pub rnti: u16,
    pub device_label: DeviceLabel,
}

impl SrsProbe {
    /// Active-bin slice of the frequency estimate.
    pub fn active(&self) -> &[Complex64] {
        &self.freq_est[active_bins()]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.freq_est.len() != FFT_SIZE {
            return Err(format!("freq_est has {} bins", self.freq_est.len()));
        }
        if self.time_est.len() != TIME_EST_LEN {
            return Err(format!("time_est has {} samples", self.time_est.len()));
        }
        if self.snr_per_rb.len() != N_PRB {
            return Err(format!("snr_per_rb has {} values", self.snr_per_rb.len()));
        }
        let guard_nonzero = self
            .freq_est
            .iter()
            .enumerate()
            .any(|(k, z)| !active_bins().contains(&k) && (z.re != 0.0 || z.im != 0.0));
        if guard_nonzero {
            return Err("nonzero value outside the active subcarrier window".into());
        }
        Ok(())
    }

    /// Encodes the probe as its four trace events. Values are quantized to
    /// Q15; probes decoded from a trace round-trip exactly.
    pub fn to_records(&self) -> [TraceRecord; 4] {
        let rec = |payload| TraceRecord {
            timestamp_ns: self.timestamp_ns,
            rnti: self.rnti,
            payload,
        };
        let snr = self
            .snr_per_rb
            .iter()
            .map(|&db| (db * 10.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
            .collect();
        [
            rec(Payload::FreqChanEst(
                self.freq_est.iter().map(|&z| C16Word::quantize(z)).collect(),
            )),
            rec(Payload::TimeChanEst(
                self.time_est.iter().map(|&z| C16Word::quantize(z)).collect(),
            )),
            rec(Payload::SnrEst(snr)),
            rec(Payload::ToaNs(self.toa_ns.round() as i64)),
        ]
    }

    fn from_group(timestamp_ns: u64, rnti: u16, group: [TraceRecord; 4]) -> SrsProbe {
        let [f, t, s, a] = group;
        let words = |p: Payload| match p {
            Payload::FreqChanEst(v) | Payload::TimeChanEst(v) => {
                v.into_iter().map(C16Word::to_complex).collect()
            }
            _ => unreachable!("slot holds a different event type"),
        };
        let snr_per_rb = match s.payload {
            Payload::SnrEst(v) => v.into_iter().map(|x| x as f64 / 10.0).collect(),
            _ => unreachable!("slot holds a different event type"),
        };
        let toa_ns = match a.payload {
            Payload::ToaNs(t) => t as f64,
            _ => unreachable!("slot holds a different event type"),
        };
        SrsProbe {
            freq_est: words(f.payload),
            time_est: words(t.payload),
            snr_per_rb,
            toa_ns,
            timestamp_ns,
            rnti,
            device_label: DeviceLabel::Unknown,
        }
    }
}

type Slots = [Option<TraceRecord>; 4];

/// Streaming grouper of events into probes, keyed by `(timestamp_ns, rnti)`.
///
/// Only groups sharing the newest timestamp are held open, so memory does not
/// grow with trace length.
#[derive(Default)]
pub struct ProbeAssembler {
    open: BTreeMap<(u64, u16), Slots>,
    index: usize,
    last_ts: Option<u64>,
    pub emitted: usize,
    pub dropped_groups: usize,
    pub dropped_records: usize,
}

impl ProbeAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one record; probes completed by this record's arrival are
    /// appended to `out`.
    pub fn push(&mut self, record: TraceRecord, out: &mut Vec<SrsProbe>) -> Result<(), TraceError> {
        let ts = record.timestamp_ns;
        if let Some(last) = self.last_ts {
            if ts < last {
                return Err(TraceError::OutOfOrder { index: self.index });
            }
            if ts > last {
                self.flush_into(out);
            }
        }
        self.last_ts = Some(ts);
        self.index += 1;

        let event = record.event_id();
        let slots = self.open.entry((ts, record.rnti)).or_default();
        let slot = &mut slots[event.slot()];
        if slot.is_some() {
            return Err(TraceError::DuplicateEvent {
                event,
                timestamp_ns: ts,
                rnti: record.rnti,
            });
        }
        *slot = Some(record);
        Ok(())
    }

    /// Closes every open group.
    pub fn flush_into(&mut self, out: &mut Vec<SrsProbe>) {
        for ((ts, rnti), slots) in std::mem::take(&mut self.open) {
            if slots.iter().all(Option::is_some) {
                let [a, b, c, d] = slots.map(Option::unwrap);
                out.push(SrsProbe::from_group(ts, rnti, [a, b, c, d]));
                self.emitted += 1;
            } else {
                self.dropped_groups += 1;
                self.dropped_records += slots.iter().filter(|s| s.is_some()).count();
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub probes: Vec<SrsProbe>,
    pub dropped_groups: usize,
    pub dropped_records: usize,
}

pub fn assemble_probes<I>(records: I) -> Result<Assembly, TraceError>
where
    I: IntoIterator<Item = TraceRecord>,
{
    let mut asm = ProbeAssembler::new();
    let mut probes = Vec::new();
    for r in records {
        asm.push(r, &mut probes)?;
    }
    asm.flush_into(&mut probes);
    Ok(Assembly {
        probes,
        dropped_groups: asm.dropped_groups,
        dropped_records: asm.dropped_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_format::EventId;

    fn group(ts: u64, rnti: u16, fill: i16) -> Vec<TraceRecord> {
        let mk = |payload| TraceRecord {
            timestamp_ns: ts,
            rnti,
            payload,
        };
        vec![
            mk(Payload::FreqChanEst(vec![C16Word::from_iq(fill, 0); FFT_SIZE])),
            mk(Payload::TimeChanEst(vec![C16Word::from_iq(0, fill); TIME_EST_LEN])),
            mk(Payload::SnrEst(vec![250; N_PRB])),
            mk(Payload::ToaNs(fill as i64)),
        ]
    }

    #[test]
    fn one_complete_group() {
        let a = assemble_probes(group(10, 3, 5)).unwrap();
        assert_eq!(a.probes.len(), 1);
        let p = &a.probes[0];
        assert_eq!((p.timestamp_ns, p.rnti), (10, 3));
        assert_eq!(p.snr_per_rb[0], 25.0);
        assert_eq!(p.toa_ns, 5.0);
        assert_eq!(p.device_label, DeviceLabel::Unknown);
    }

    #[test]
    fn incomplete_group_dropped() {
        let mut recs = group(10, 3, 5);
        recs.pop();
        let a = assemble_probes(recs).unwrap();
        assert!(a.probes.is_empty());
        assert_eq!((a.dropped_groups, a.dropped_records), (1, 3));
    }

    #[test]
    fn interleaved_groups_in_timestamp_order() {
        // Two UEs sounded in the same slot, events interleaved, followed by a
        // later group whose events arrive in reverse order.
        let a = group(100, 7, 1);
        let b = group(100, 2, 2);
        let mut recs = Vec::new();
        for (x, y) in a.into_iter().zip(b) {
            recs.push(x);
            recs.push(y);
        }
        let mut c = group(180, 7, 3);
        c.reverse();
        recs.extend(c);
        let out = assemble_probes(recs).unwrap();
        let keys: Vec<_> = out.probes.iter().map(|p| (p.timestamp_ns, p.rnti)).collect();
        assert_eq!(keys, vec![(100, 2), (100, 7), (180, 7)]);
        assert_eq!(out.probes[1].toa_ns, 1.0);
    }

    #[test]
    fn duplicate_event_rejected() {
        let mut recs = group(10, 3, 5);
        recs.push(recs[3].clone());
        assert!(matches!(
            assemble_probes(recs),
            Err(TraceError::DuplicateEvent {
                event: EventId::ToaNs,
                ..
            })
        ));
    }

    #[test]
    fn out_of_order_rejected() {
        let mut recs = group(10, 3, 5);
        recs.extend(group(5, 3, 5));
        assert!(matches!(
            assemble_probes(recs),
            Err(TraceError::OutOfOrder { index: 4 })
        ));
    }
}

use super::c16::C16Word;
use crate::numerology::{FFT_SIZE, N_PRB, TIME_EST_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum EventId {
    FreqChanEst = 1,
    TimeChanEst = 2,
    SnrEst = 3,
    ToaNs = 4,
}

impl EventId {
    pub const ALL: [EventId; 4] = [
        EventId::FreqChanEst,
        EventId::TimeChanEst,
        EventId::SnrEst,
        EventId::ToaNs,
    ];

    pub fn from_u32(id: u32) -> Option<Self> {
        match id {
            1 => Some(EventId::FreqChanEst),
            2 => Some(EventId::TimeChanEst),
            3 => Some(EventId::SnrEst),
            4 => Some(EventId::ToaNs),
            _ => None,
        }
    }

    /// Exact payload size in bytes mandated for this event type.
    pub const fn payload_len(self) -> u32 {
        match self {
            EventId::FreqChanEst => (FFT_SIZE * 4) as u32,
            EventId::TimeChanEst => (TIME_EST_LEN * 4) as u32,
            EventId::SnrEst => (N_PRB * 2) as u32,
            EventId::ToaNs => 8,
        }
    }

    pub(crate) const fn slot(self) -> usize {
        self as usize - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    FreqChanEst(Vec<C16Word>),
    TimeChanEst(Vec<C16Word>),
    /// Per-RB SNR in 0.1 dB units.
    SnrEst(Vec<i16>),
    ToaNs(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub timestamp_ns: u64,
    pub rnti: u16,
    pub payload: Payload,
}

impl TraceRecord {
    pub fn event_id(&self) -> EventId {
        match self.payload {
            Payload::FreqChanEst(_) => EventId::FreqChanEst,
            Payload::TimeChanEst(_) => EventId::TimeChanEst,
            Payload::SnrEst(_) => EventId::SnrEst,
            Payload::ToaNs(_) => EventId::ToaNs,
        }
    }

    /// Checks the fixed payload cardinality of the event type.
    pub fn validate(&self) -> Result<(), String> {
        let (found, expected) = match &self.payload {
            Payload::FreqChanEst(v) => (v.len(), FFT_SIZE),
            Payload::TimeChanEst(v) => (v.len(), TIME_EST_LEN),
            Payload::SnrEst(v) => (v.len(), N_PRB),
            Payload::ToaNs(_) => (1, 1),
        };
        if found != expected {
            return Err(format!(
                "{:?} carries {found} values, expected {expected}",
                self.event_id()
            ));
        }
        Ok(())
    }

    pub(crate) fn encode_payload(&self, out: &mut Vec<u8>) {
        match &self.payload {
            Payload::FreqChanEst(v) | Payload::TimeChanEst(v) => {
                for w in v {
                    out.extend_from_slice(&w.raw().to_le_bytes());
                }
            }
            Payload::SnrEst(v) => {
                for s in v {
                    out.extend_from_slice(&s.to_le_bytes());
                }
            }
            Payload::ToaNs(t) => out.extend_from_slice(&t.to_le_bytes()),
        }
    }

    /// `bytes` must already have the length required by `event`.
    pub(crate) fn decode_payload(event: EventId, bytes: &[u8]) -> Payload {
        let words = || {
            bytes
                .chunks_exact(4)
                .map(|c| C16Word(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect()
        };
        match event {
            EventId::FreqChanEst => Payload::FreqChanEst(words()),
            EventId::TimeChanEst => Payload::TimeChanEst(words()),
            EventId::SnrEst => Payload::SnrEst(
                bytes
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            EventId::ToaNs => {
                let mut b = [0u8; 8];
                b.copy_from_slice(bytes);
                Payload::ToaNs(i64::from_le_bytes(b))
            }
        }
    }
}

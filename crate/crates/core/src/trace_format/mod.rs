//! Binary container for SRS channel-estimate events.
//!
//! Wire layout, all integers little-endian:
//!
//! ```text
//! file   := magic "SRSPLA01" record*
//! record := event_id:u32 timestamp_ns:u64 rnti:u16 pad:[u8;2] payload_len:u32 payload
//! ```
//!
//! Payloads are fixed-size per event type: 1,536 packed complex words for the
//! frequency estimate, 3,072 for the time estimate, 106 `i16` SNR values in
//! 0.1 dB steps and one `i64` time of arrival in nanoseconds.

mod c16;
mod io;
mod probe;
mod record;

pub use c16::{decode_c16, encode_c16, C16Word, DecodedC16, Q15_SCALE};
pub use io::{read_trace, write_trace, TraceReader, TraceWriter};
pub use probe::{assemble_probes, Assembly, DeviceLabel, ProbeAssembler, SrsProbe};
pub use record::{EventId, Payload, TraceRecord};

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"SRSPLA01";
/// Bytes in a record header: id, timestamp, rnti, padding, payload length.
pub const RECORD_HEADER_LEN: usize = 4 + 8 + 2 + 2 + 4;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("bad magic at offset 0: expected SRSPLA01, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("truncated record at byte offset {offset}")]
    TruncatedRecord { offset: u64 },
    #[error("unknown event id {id} at byte offset {offset}")]
    UnknownEventId { offset: u64, id: u32 },
    #[error("payload length {found} does not match {expected} for {event:?} at byte offset {offset}")]
    PayloadLengthMismatch {
        offset: u64,
        event: EventId,
        expected: u32,
        found: u32,
    },
    #[error("record {index} violates its invariants: {reason}")]
    InvariantViolation { index: usize, reason: String },
    #[error("duplicate {event:?} event for timestamp {timestamp_ns} rnti {rnti}")]
    DuplicateEvent {
        event: EventId,
        timestamp_ns: u64,
        rnti: u16,
    },
    #[error("record {index} is older than its predecessor")]
    OutOfOrder { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

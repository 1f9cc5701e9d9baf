use std::io::{self, Read, Write};

use super::record::{EventId, TraceRecord};
use super::{TraceError, MAGIC, RECORD_HEADER_LEN};

/// Single-pass streaming reader. Holds at most one record in memory.
pub struct TraceReader<R> {
    inner: R,
    offset: u64,
    buf: Vec<u8>,
    done: bool,
}

impl<R: Read> TraceReader<R> {
    /// Consumes and checks the magic.
    pub fn new(mut inner: R) -> Result<Self, TraceError> {
        let mut magic = [0u8; 8];
        let n = read_full(&mut inner, &mut magic)?;
        if n < magic.len() || &magic != MAGIC {
            return Err(TraceError::BadMagic {
                found: magic[..n].to_vec(),
            });
        }
        Ok(TraceReader {
            inner,
            offset: MAGIC.len() as u64,
            buf: Vec::new(),
            done: false,
        })
    }

    /// Byte offset of the next unread record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn next_record(&mut self) -> Result<Option<TraceRecord>, TraceError> {
        let start = self.offset;
        let mut header = [0u8; RECORD_HEADER_LEN];
        let n = read_full(&mut self.inner, &mut header)?;
        if n == 0 {
            return Ok(None);
        }
        if n < RECORD_HEADER_LEN {
            return Err(TraceError::TruncatedRecord { offset: start });
        }
        let id = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let timestamp_ns = u64::from_le_bytes(header[4..12].try_into().unwrap());
        let rnti = u16::from_le_bytes(header[12..14].try_into().unwrap());
        let payload_len = u32::from_le_bytes(header[16..20].try_into().unwrap());

        let event =
            EventId::from_u32(id).ok_or(TraceError::UnknownEventId { offset: start, id })?;
        if payload_len != event.payload_len() {
            return Err(TraceError::PayloadLengthMismatch {
                offset: start,
                event,
                expected: event.payload_len(),
                found: payload_len,
            });
        }

        self.buf.resize(payload_len as usize, 0);
        if read_full(&mut self.inner, &mut self.buf)? < self.buf.len() {
            return Err(TraceError::TruncatedRecord { offset: start });
        }
        self.offset += (RECORD_HEADER_LEN + self.buf.len()) as u64;
        Ok(Some(TraceRecord {
            timestamp_ns,
            rnti,
            payload: TraceRecord::decode_payload(event, &self.buf),
        }))
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads as many bytes as available up to `buf.len()`; short count means EOF.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub fn read_trace(bytes: &[u8]) -> Result<Vec<TraceRecord>, TraceError> {
    TraceReader::new(bytes)?.collect()
}

pub struct TraceWriter<W> {
    inner: W,
    index: usize,
    scratch: Vec<u8>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, TraceError> {
        inner.write_all(MAGIC)?;
        Ok(TraceWriter {
            inner,
            index: 0,
            scratch: Vec::new(),
        })
    }

    pub fn write_record(&mut self, record: &TraceRecord) -> Result<(), TraceError> {
        record
            .validate()
            .map_err(|reason| TraceError::InvariantViolation {
                index: self.index,
                reason,
            })?;
        let event = record.event_id();
        self.scratch.clear();
        self.scratch.extend_from_slice(&(event as u32).to_le_bytes());
        self.scratch
            .extend_from_slice(&record.timestamp_ns.to_le_bytes());
        self.scratch.extend_from_slice(&record.rnti.to_le_bytes());
        self.scratch.extend_from_slice(&[0, 0]);
        self.scratch
            .extend_from_slice(&event.payload_len().to_le_bytes());
        record.encode_payload(&mut self.scratch);
        self.inner.write_all(&self.scratch)?;
        self.index += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, TraceError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Serializes a full record sequence. Validates every record before
/// anything is emitted, so a failing input never yields partial bytes.
pub fn write_trace(records: &[TraceRecord]) -> Result<Vec<u8>, TraceError> {
    for (index, r) in records.iter().enumerate() {
        r.validate()
            .map_err(|reason| TraceError::InvariantViolation { index, reason })?;
    }
    let mut w = TraceWriter::new(Vec::new())?;
    for r in records {
        w.write_record(r)?;
    }
    w.finish()
}

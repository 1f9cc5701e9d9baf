use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{extract, layout_manifest, ProbeWindow, FEATURE_DIM, WINDOW_LEN};
use crate::fsutil::write_atomic;
use crate::synth::{Manifest, MANIFEST_FILE};
use crate::trace_format::{DeviceLabel, ProbeAssembler, SrsProbe, TraceError, TraceReader};

pub const FEATURE_MAGIC: &[u8; 8] = b"SRSFEAT1";
/// timestamp u64, rnti u16, label u8, pad u8, session u32.
pub const ROW_META_BYTES: u32 = 16;
const HEADER_LEN: usize = 8 + 8 + 4 + 4;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Trace { path: PathBuf, source: TraceError },
    #[error("{}: malformed feature file: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("{0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub timestamp_ns: u64,
    pub rnti: u16,
    pub label: DeviceLabel,
    pub session: u32,
}

/// Row-major feature rows with per-row metadata. Values are stored as `f32`,
/// the on-disk precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dim: usize,
    pub values: Vec<f32>,
    pub meta: Vec<RowMeta>,
    pub sessions: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        FeatureMatrix {
            dim,
            values: Vec::new(),
            meta: Vec::new(),
            sessions: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.meta.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, row: &[f64], meta: RowMeta) {
        assert_eq!(row.len(), self.dim, "row width");
        self.values.extend(row.iter().map(|&v| v as f32));
        self.meta.push(meta);
    }

    /// Copies of the selected rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::new(self.dim);
        out.sessions = self.sessions.clone();
        for &r in rows {
            out.values.extend_from_slice(self.row(r));
            out.meta.push(self.meta[r]);
        }
        out
    }

    pub fn labels(&self) -> impl Iterator<Item = DeviceLabel> + '_ {
        self.meta.iter().map(|m| m.label)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4 + self.meta.len() * 16);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&(self.n_rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&ROW_META_BYTES.to_le_bytes());
        for (i, m) in self.meta.iter().enumerate() {
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&m.timestamp_ns.to_le_bytes());
            out.extend_from_slice(&m.rnti.to_le_bytes());
            out.push(m.label.as_u8());
            out.push(0);
            out.extend_from_slice(&m.session.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != FEATURE_MAGIC {
            return Err("bad magic".into());
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let meta_len = u32::from_le_bytes(bytes[20..24].try_into().unwrap());
        if meta_len != ROW_META_BYTES {
            return Err(format!("unsupported per-row metadata size {meta_len}"));
        }
        let stride = dim * 4 + ROW_META_BYTES as usize;
        let expected = rows
            .checked_mul(stride)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or("row count overflows")?;
        if bytes.len() != expected {
            return Err(format!("expected {expected} bytes, found {}", bytes.len()));
        }
        let mut m = FeatureMatrix::new(dim);
        m.values.reserve(rows * dim);
        for r in 0..rows {
            let rec = &bytes[HEADER_LEN + r * stride..HEADER_LEN + (r + 1) * stride];
            m.values.extend(
                rec[..dim * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
            let meta = &rec[dim * 4..];
            let label = DeviceLabel::from_u8(meta[10]).ok_or_else(|| format!("row {r}: bad label byte"))?;
            m.meta.push(RowMeta {
                timestamp_ns: u64::from_le_bytes(meta[0..8].try_into().unwrap()),
                rnti: u16::from_le_bytes(meta[8..10].try_into().unwrap()),
                label,
                session: u32::from_le_bytes(meta[12..16].try_into().unwrap()),
            });
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    rows: usize,
    layout: Vec<SidecarSlice>,
    sessions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SidecarSlice {
    name: String,
    start: usize,
    end: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".layout.json");
    PathBuf::from(s)
}

/// Writes the binary matrix and its JSON layout/session sidecar.
pub fn write_feature_file(path: &Path, m: &FeatureMatrix) -> Result<(), FeatureError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| FeatureError::Io { path: p, source: e }
    };
    write_atomic(path, &m.to_bytes()).map_err(io(path))?;
    let side = Sidecar {
        dim: m.dim,
        rows: m.n_rows(),
        layout: layout_manifest()
            .into_iter()
            .map(|s| SidecarSlice {
                name: s.name.to_string(),
                start: s.start,
                end: s.end,
            })
            .collect(),
        sessions: m.sessions.clone(),
    };
    let sp = sidecar_path(path);
    write_atomic(&sp, &serde_json::to_vec_pretty(&side).expect("sidecar serializes")).map_err(io(&sp))
}

pub fn read_feature_file(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    let bytes = std::fs::read(path).map_err(|e| FeatureError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut m = FeatureMatrix::from_bytes(&bytes).map_err(|reason| FeatureError::Format {
        path: path.to_path_buf(),
        reason,
    })?;
    if let Ok(text) = std::fs::read_to_string(sidecar_path(path)) {
        if let Ok(side) = serde_json::from_str::<Sidecar>(&text) {
            m.sessions = side.sessions;
        }
    }
    Ok(m)
}

/// Extracts one feature row per probe. Each RNTI stream gets its own
/// Doppler window; rows keep the input (timestamp) order.
pub fn extract_probes(probes: &[SrsProbe], session: u32, out: &mut FeatureMatrix) {
    let mut streams: std::collections::BTreeMap<u16, Vec<SrsProbe>> = Default::default();
    let mut position = Vec::with_capacity(probes.len());
    for p in probes {
        let s = streams.entry(p.rnti).or_default();
        position.push(s.len());
        s.push(p.clone());
    }
    for (p, &pos) in probes.iter().zip(&position) {
        let stream = &streams[&p.rnti];
        let start = pos.saturating_sub(WINDOW_LEN - 1);
        let window = ProbeWindow {
            current: &stream[pos],
            history: &stream[start..pos],
        };
        let fv = extract(&window);
        out.push(
            &fv.values,
            RowMeta {
                timestamp_ns: p.timestamp_ns,
                rnti: p.rnti,
                label: p.device_label,
                session,
            },
        );
    }
}

fn read_session(path: &Path, label: DeviceLabel) -> Result<Vec<SrsProbe>, FeatureError> {
    let file = File::open(path).map_err(|e| FeatureError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let trace_err = |e| FeatureError::Trace {
        path: path.to_path_buf(),
        source: e,
    };
    let reader = TraceReader::new(BufReader::new(file)).map_err(trace_err)?;
    let mut asm = ProbeAssembler::new();
    let mut probes = Vec::new();
    for rec in reader {
        asm.push(rec.map_err(trace_err)?, &mut probes).map_err(trace_err)?;
    }
    asm.flush_into(&mut probes);
    for p in &mut probes {
        p.device_label = label;
    }
    Ok(probes)
}

/// Extracts every session listed in `<dir>/manifest.json`, or a single
/// `.srstrace` file (labels unknown).
pub fn extract_dataset(input: &Path) -> Result<FeatureMatrix, FeatureError> {
    let mut out = FeatureMatrix::new(FEATURE_DIM);
    if input.is_file() {
        let probes = read_session(input, DeviceLabel::Unknown)?;
        let name = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.sessions.push(name);
        extract_probes(&probes, 0, &mut out);
        return Ok(out);
    }
    if !input.join(MANIFEST_FILE).exists() {
        return Err(FeatureError::Io {
            path: input.join(MANIFEST_FILE),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no manifest"),
        });
    }
    let manifest = Manifest::load(input).map_err(|e| FeatureError::Manifest(e.to_string()))?;
    for (i, s) in manifest.sessions.iter().enumerate() {
        let probes = read_session(&manifest.trace_path(input, s), s.label)?;
        out.sessions.push(s.id.clone());
        extract_probes(&probes, i as u32, &mut out);
    }
    Ok(out)
}

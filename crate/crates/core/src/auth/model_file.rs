//! Binary model container.
//!
//! ```text
//! magic "SRSMDL01"
//! u32 meta_len, meta_len bytes of JSON (network + training config, history)
//! u32 dim, f32[dim] feature mean, f32[dim] feature std
//! u32 n_tensors, then per tensor: u32 ndim, u32[ndim] shape, f32[prod] data
//! ```
//!
//! All integers and floats are little-endian. Tensors are the trainable
//! parameters in network order followed by each batch-norm layer's running
//! mean and variance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AuthError, EpochRecord, SeResNet1d, SeResNet1dConfig, TrainConfig, TrainedModel};
use crate::nn::Layer;

pub const MODEL_MAGIC: &[u8; 8] = b"SRSMDL01";

#[derive(Serialize, Deserialize)]
struct Meta {
    network: SeResNet1dConfig,
    train: TrainConfig,
    best_epoch: usize,
    history: Vec<EpochRecord>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("length fits in u32").to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
}

fn put_tensor(out: &mut Vec<u8>, shape: &[usize], v: &[f64]) {
    put_u32(out, shape.len());
    for &d in shape {
        put_u32(out, d);
    }
    put_f32s(out, v);
}

pub fn write_model(model: &mut TrainedModel) -> Vec<u8> {
    let meta = Meta {
        network: model.net.config.clone(),
        train: model.train_config.clone(),
        best_epoch: model.best_epoch,
        history: model.history.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("model metadata serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, json.len());
    out.extend_from_slice(&json);
    put_u32(&mut out, model.mean.len());
    put_f32s(&mut out, &model.mean);
    put_f32s(&mut out, &model.std);
    let mut tensors: Vec<(Vec<usize>, Vec<f64>)> =
        model.net.params_mut().iter().map(|p| (p.shape.clone(), p.value.clone())).collect();
    for bn in model.net.batch_norms_mut() {
        tensors.push((vec![bn.running_mean.len()], bn.running_mean.clone()));
        tensors.push((vec![bn.running_var.len()], bn.running_var.clone()));
    }
    put_u32(&mut out, tensors.len());
    for (shape, v) in &tensors {
        put_tensor(&mut out, shape, v);
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AuthError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| AuthError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, AuthError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, AuthError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| AuthError::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }

    fn tensor(&mut self, expected: &[usize]) -> Result<Vec<f64>, AuthError> {
        let ndim = self.u32()?;
        let shape = (0..ndim).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        if shape != expected {
            return Err(AuthError::Format(format!("tensor shape {shape:?}, expected {expected:?}")));
        }
        let v = self.f32s(shape.iter().product())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(AuthError::Format("non-finite tensor value".into()));
        }
        Ok(v)
    }
}

pub fn read_model(bytes: &[u8]) -> Result<TrainedModel, AuthError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MODEL_MAGIC {
        return Err(AuthError::Format("bad magic".into()));
    }
    let meta_len = c.u32()?;
    let meta: Meta =
        serde_json::from_slice(c.take(meta_len)?).map_err(|e| AuthError::Format(format!("metadata: {e}")))?;
    let dim = c.u32()?;
    if dim != meta.network.input_dim {
        return Err(AuthError::Format(format!(
            "standardization has {dim} dims, network expects {}",
            meta.network.input_dim
        )));
    }
    let mean = c.f32s(dim)?;
    let std = c.f32s(dim)?;
    let mut net = SeResNet1d::new(meta.network, 0).map_err(|e| AuthError::Format(e.to_string()))?;
    let n_tensors = c.u32()?;
    let n_params = net.params_mut().len();
    let n_bn = net.batch_norms_mut().len();
    if n_tensors != n_params + 2 * n_bn {
        return Err(AuthError::Format(format!("{n_tensors} tensors, expected {}", n_params + 2 * n_bn)));
    }
    for p in net.params_mut() {
        p.value = c.tensor(&p.shape)?;
    }
    for bn in net.batch_norms_mut() {
        bn.running_mean = c.tensor(&[bn.channels()])?;
        bn.running_var = c.tensor(&[bn.channels()])?;
    }
    if c.pos != bytes.len() {
        return Err(AuthError::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(TrainedModel {
        train_config: meta.train,
        mean,
        std,
        net,
        history: meta.history,
        best_epoch: meta.best_epoch,
    })
}

pub fn save_model(path: &Path, model: &mut TrainedModel) -> Result<(), AuthError> {
    crate::write_atomic(path, &write_model(model))
        .map_err(|source| AuthError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, AuthError> {
    let bytes = std::fs::read(path).map_err(|source| AuthError::Io { path: path.to_path_buf(), source })?;
    read_model(&bytes)
}

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{AuthError, SeResNet1d, SeResNet1dConfig};
use crate::features::FeatureMatrix;
use crate::nn::{
    clip_grad_norm, cosine_lr, smooth_targets, softmax, softmax_cross_entropy, Act, Adam, Ctx, Layer,
};
use crate::trace_format::DeviceLabel;

/// Class index of legitimate probes in the two-way output.
pub const LEGIT_CLASS: usize = 1;
const SCORE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs_max: usize,
    pub label_smoothing: f64,
    pub mixup_alpha: f64,
    pub grad_clip_norm: f64,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight the loss by inverse class frequency.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 1e-4,
            epochs_max: 100,
            label_smoothing: 0.1,
            mixup_alpha: 0.2,
            grad_clip_norm: 1.0,
            early_stop_patience: 15,
            batch_size: 64,
            seed: 0,
            class_weighting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AuthError> {
        let bad = |field: &str, reason: &str| {
            Err(AuthError::InvalidConfig { field: field.to_string(), reason: reason.to_string() })
        };
        let positive = [("lr", self.lr), ("grad_clip_norm", self.grad_clip_norm)];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(field, "must be positive");
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay", "must be non-negative");
        }
        if !(self.mixup_alpha.is_finite() && self.mixup_alpha >= 0.0) {
            return bad("mixup_alpha", "must be non-negative");
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return bad("label_smoothing", "must be in [0, 0.5)");
        }
        if self.epochs_max == 0 {
            return bad("epochs_max", "must be positive");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience", "must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size", "must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub train_config: TrainConfig,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub net: SeResNet1d,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn class_of(label: DeviceLabel) -> Result<usize, AuthError> {
    match label {
        DeviceLabel::Legit => Ok(LEGIT_CLASS),
        DeviceLabel::Attack => Ok(1 - LEGIT_CLASS),
        DeviceLabel::Unknown => Err(AuthError::UnlabeledRow),
    }
}

fn round_to_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = *x as f32 as f64);
}

/// Per-dimension mean and population standard deviation; constant
/// dimensions get unit scale.
pub fn standardization(m: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n_rows() as f64;
    let mut mean = vec![0.0; m.dim];
    for r in 0..m.n_rows() {
        mean.iter_mut().zip(m.row(r)).for_each(|(s, &v)| *s += v as f64);
    }
    mean.iter_mut().for_each(|s| *s /= n);
    let mut var = vec![0.0; m.dim];
    for r in 0..m.n_rows() {
        for ((s, &v), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
            *s += (v as f64 - mu).powi(2);
        }
    }
    let std = var.iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
    (mean, std)
}

impl TrainedModel {
    pub fn config(&self) -> &SeResNet1dConfig {
        &self.net.config
    }

    fn standardize_into(&self, row: &[f32], out: &mut Vec<f64>) {
        out.extend(row.iter().zip(&self.mean).zip(&self.std).map(|((&v, m), s)| (v as f64 - m) / s));
    }

    fn infer(&mut self, x: Act) -> Result<Vec<f64>, AuthError> {
        let logits = self.net.forward(&x, &mut Ctx::eval());
        if logits.data.iter().any(|v| !v.is_finite()) {
            return Err(AuthError::NonFiniteActivation);
        }
        Ok(logits.data)
    }

    /// Inference on one raw (unstandardized) feature vector:
    /// `(p_legit, logits)`.
    pub fn forward(&mut self, features: &[f64]) -> Result<(f64, [f64; 2]), AuthError> {
        let dim = self.mean.len();
        if features.len() != dim {
            return Err(AuthError::DimensionMismatch { expected: dim, found: features.len() });
        }
        let x: Vec<f64> =
            features.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect();
        let logits = self.infer(Act::new(x, 1, dim, 1))?;
        let p = softmax(&logits, 2);
        Ok((p[LEGIT_CLASS], [logits[0], logits[1]]))
    }

    /// `p_legit` per row, in row order.
    pub fn score_batch(&mut self, m: &FeatureMatrix) -> Result<Vec<f64>, AuthError> {
        let dim = self.mean.len();
        if m.dim != dim {
            return Err(AuthError::DimensionMismatch { expected: dim, found: m.dim });
        }
        let mut scores = Vec::with_capacity(m.n_rows());
        let rows: Vec<usize> = (0..m.n_rows()).collect();
        for chunk in rows.chunks(SCORE_CHUNK) {
            let mut x = Vec::with_capacity(chunk.len() * dim);
            for &r in chunk {
                self.standardize_into(m.row(r), &mut x);
            }
            let logits = self.infer(Act::new(x, chunk.len(), dim, 1))?;
            scores.extend(softmax(&logits, 2).chunks_exact(2).map(|p| p[LEGIT_CLASS]));
        }
        Ok(scores)
    }

    /// Quantizes every stored value to `f32` so the in-memory model matches
    /// its serialized form exactly.
    pub(crate) fn round_to_storage(&mut self) {
        round_to_f32(&mut self.mean);
        round_to_f32(&mut self.std);
        for p in self.net.params_mut() {
            round_to_f32(&mut p.value);
        }
        for bn in self.net.batch_norms_mut() {
            round_to_f32(&mut bn.running_mean);
            round_to_f32(&mut bn.running_var);
        }
    }
}

struct Standardized {
    x: Vec<f64>,
    classes: Vec<usize>,
    dim: usize,
}

fn standardize(m: &FeatureMatrix, mean: &[f64], std: &[f64]) -> Result<Standardized, AuthError> {
    let mut x = Vec::with_capacity(m.n_rows() * m.dim);
    for r in 0..m.n_rows() {
        x.extend(m.row(r).iter().zip(mean).zip(std).map(|((&v, mu), s)| (v as f64 - mu) / s));
    }
    let classes = m.labels().map(class_of).collect::<Result<_, _>>()?;
    Ok(Standardized { x, classes, dim: m.dim })
}

fn accuracy(net: &mut SeResNet1d, data: &Standardized) -> Result<f64, AuthError> {
    let mut correct = 0usize;
    let n = data.classes.len();
    for start in (0..n).step_by(SCORE_CHUNK) {
        let end = (start + SCORE_CHUNK).min(n);
        let x = data.x[start * data.dim..end * data.dim].to_vec();
        let logits = net.forward(&Act::new(x, end - start, data.dim, 1), &mut Ctx::eval());
        if logits.data.iter().any(|v| !v.is_finite()) {
            return Err(AuthError::NonFiniteActivation);
        }
        for (p, &c) in softmax(&logits.data, 2).chunks_exact(2).zip(&data.classes[start..end]) {
            let predicted = if p[LEGIT_CLASS] >= 0.5 { LEGIT_CLASS } else { 1 - LEGIT_CLASS };
            correct += (predicted == c) as usize;
        }
    }
    Ok(correct as f64 / n as f64)
}

pub fn train(
    train_set: &FeatureMatrix,
    val_set: &FeatureMatrix,
    net_config: &SeResNet1dConfig,
    config: &TrainConfig,
) -> Result<TrainedModel, AuthError> {
    train_with_progress(train_set, val_set, net_config, config, |_| {})
}

/// As [`train`], calling `on_epoch` after every completed epoch.
pub fn train_with_progress(
    train_set: &FeatureMatrix,
    val_set: &FeatureMatrix,
    net_config: &SeResNet1dConfig,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedModel, AuthError> {
    config.validate()?;
    net_config.validate()?;
    if train_set.n_rows() < 2 {
        return Err(AuthError::EmptySplit { split: "train" });
    }
    if val_set.n_rows() == 0 {
        return Err(AuthError::EmptySplit { split: "val" });
    }
    for m in [train_set, val_set] {
        if m.dim != net_config.input_dim {
            return Err(AuthError::DimensionMismatch { expected: net_config.input_dim, found: m.dim });
        }
    }
    let (mean, std) = standardization(train_set);
    let tr = standardize(train_set, &mean, &std)?;
    let va = standardize(val_set, &mean, &std)?;
    let dim = tr.dim;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = SeResNet1d::new(net_config.clone(), rng.next_u64())?;
    let mut opt = Adam::new(config.weight_decay);
    let beta = (config.mixup_alpha > 0.0)
        .then(|| Beta::new(config.mixup_alpha, config.mixup_alpha))
        .transpose()
        .map_err(|e| AuthError::InvalidConfig { field: "mixup_alpha".into(), reason: e.to_string() })?;
    let class_weight = {
        let n = tr.classes.len() as f64;
        let legit = tr.classes.iter().filter(|&&c| c == LEGIT_CLASS).count() as f64;
        let w = |count: f64| if config.class_weighting && count > 0.0 { n / (2.0 * count) } else { 1.0 };
        let mut cw = [w(n - legit), w(legit)];
        if LEGIT_CLASS == 0 {
            cw.swap(0, 1);
        }
        cw
    };
    let targets: Vec<Vec<f64>> =
        (0..2).map(|c| smooth_targets(c, 2, config.label_smoothing)).collect();

    let mut order: Vec<usize> = (0..tr.classes.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, SeResNet1d)> = None;
    for epoch in 0..config.epochs_max {
        let lr = cosine_lr(config.lr, epoch, config.epochs_max);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut loss_rows) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let b = batch.len();
            let lambda = beta.as_ref().map_or(1.0, |d| d.sample(&mut rng));
            let mut partner: Vec<usize> = (0..b).collect();
            partner.shuffle(&mut rng);
            let mut x = vec![0.0; b * dim];
            let mut t = vec![0.0; b * 2];
            let mut w = vec![0.0; b];
            for (i, (&r, &p)) in batch.iter().zip(&partner).enumerate() {
                let q = batch[p];
                let (xr, xq) = (&tr.x[r * dim..(r + 1) * dim], &tr.x[q * dim..(q + 1) * dim]);
                for ((o, a), c) in x[i * dim..(i + 1) * dim].iter_mut().zip(xr).zip(xq) {
                    *o = lambda * a + (1.0 - lambda) * c;
                }
                let (cr, cq) = (tr.classes[r], tr.classes[q]);
                for j in 0..2 {
                    t[i * 2 + j] = lambda * targets[cr][j] + (1.0 - lambda) * targets[cq][j];
                }
                w[i] = lambda * class_weight[cr] + (1.0 - lambda) * class_weight[cq];
            }
            let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(rng.next_u64()));
            let logits = net.forward(&Act::new(x, b, dim, 1), &mut ctx);
            let (loss, grad) = softmax_cross_entropy(&logits.data, &t, 2, Some(&w));
            if !loss.is_finite() {
                return Err(AuthError::Diverged { epoch });
            }
            let mut params = net.params_mut();
            params.iter_mut().for_each(|p| p.zero_grad());
            drop(params);
            net.backward(&Act::new(grad, b, 2, 1));
            let mut params = net.params_mut();
            let norm = clip_grad_norm(&mut params, config.grad_clip_norm);
            if !norm.is_finite() {
                return Err(AuthError::Diverged { epoch });
            }
            opt.step(&mut params, lr);
            loss_sum += loss * b as f64;
            loss_rows += b;
        }
        let val_accuracy = accuracy(&mut net, &va).map_err(|_| AuthError::Diverged { epoch })?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / loss_rows.max(1) as f64,
            val_accuracy,
        };
        on_epoch(&record);
        history.push(record);
        match &best {
            Some((acc, _, _)) if val_accuracy <= *acc => {}
            _ => best = Some((val_accuracy, epoch, net.clone())),
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch - best_epoch >= config.early_stop_patience {
            break;
        }
    }
    let (_, best_epoch, net) = best.expect("at least one epoch ran");
    let mut model = TrainedModel { train_config: config.clone(), mean, std, net, history, best_epoch };
    model.round_to_storage();
    Ok(model)
}

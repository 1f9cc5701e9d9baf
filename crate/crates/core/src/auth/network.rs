use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AuthError;
use crate::features::FEATURE_DIM;
use crate::nn::{
    Act, BatchNorm1d, Conv1d, Ctx, Dropout, GlobalAvgPool, Layer, Linear, MaxPool1d, Param, Relu,
    SqueezeExcite,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeResNet1dConfig {
    pub input_dim: usize,
    pub stem_out: usize,
    pub n_blocks: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub se_reduction: usize,
    pub dropout: f64,
    pub head_hidden: usize,
}

impl Default for SeResNet1dConfig {
    fn default() -> Self {
        SeResNet1dConfig {
            input_dim: FEATURE_DIM,
            stem_out: 256,
            n_blocks: 2,
            channels: 64,
            kernel: 3,
            stem_kernel: 7,
            stem_stride: 2,
            pool_kernel: 3,
            pool_stride: 2,
            se_reduction: 16,
            dropout: 0.2,
            head_hidden: 256,
        }
    }
}

impl SeResNet1dConfig {
    /// Six blocks at 256 channels.
    pub fn paper() -> Self {
        SeResNet1dConfig { n_blocks: 6, channels: 256, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AuthError> {
        let bad = |field: &str, reason: &str| {
            Err(AuthError::InvalidConfig { field: field.to_string(), reason: reason.to_string() })
        };
        for (field, v) in [
            ("input_dim", self.input_dim),
            ("stem_out", self.stem_out),
            ("channels", self.channels),
            ("kernel", self.kernel),
            ("stem_kernel", self.stem_kernel),
            ("stem_stride", self.stem_stride),
            ("pool_kernel", self.pool_kernel),
            ("pool_stride", self.pool_stride),
            ("se_reduction", self.se_reduction),
            ("head_hidden", self.head_hidden),
        ] {
            if v == 0 {
                return bad(field, "must be positive");
            }
        }
        for (field, v) in
            [("kernel", self.kernel), ("stem_kernel", self.stem_kernel), ("pool_kernel", self.pool_kernel)]
        {
            if v % 2 == 0 {
                return bad(field, "must be odd");
            }
        }
        if self.channels % self.se_reduction != 0 {
            return bad("se_reduction", "must divide channels");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", "must be in [0, 1)");
        }
        if self.stem_out < self.stem_kernel / 2 + 1 {
            return bad("stem_out", "too short for the stem convolution");
        }
        Ok(())
    }

    /// Sequence length entering the residual blocks.
    pub fn block_len(&self) -> usize {
        let conv = (self.stem_out + 2 * (self.stem_kernel / 2) - self.stem_kernel) / self.stem_stride + 1;
        (conv + 2 * (self.pool_kernel / 2) - self.pool_kernel) / self.pool_stride + 1
    }
}

/// conv → BN → ReLU → dropout → conv → BN → SE, plus the identity skip,
/// then ReLU. The second BN scale starts at zero.
#[derive(Debug, Clone)]
pub struct SeBlock {
    pub conv1: Conv1d,
    pub bn1: BatchNorm1d,
    relu1: Relu,
    drop: Dropout,
    pub conv2: Conv1d,
    pub bn2: BatchNorm1d,
    pub se: SqueezeExcite,
    relu_out: Relu,
}

impl SeBlock {
    pub fn new(cfg: &SeResNet1dConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c, k) = (cfg.channels, cfg.kernel);
        let mut bn2 = BatchNorm1d::new(c);
        bn2.gamma.value.fill(0.0);
        SeBlock {
            conv1: Conv1d::new(c, c, k, 1, k / 2, rng),
            bn1: BatchNorm1d::new(c),
            relu1: Relu::new(),
            drop: Dropout::new(cfg.dropout),
            conv2: Conv1d::new(c, c, k, 1, k / 2, rng),
            bn2,
            se: SqueezeExcite::new(c, cfg.se_reduction, rng),
            relu_out: Relu::new(),
        }
    }
}

impl Layer for SeBlock {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        let h = self.conv1.forward(x, ctx);
        let h = self.bn1.forward(&h, ctx);
        let h = self.relu1.forward(&h, ctx);
        let h = self.drop.forward(&h, ctx);
        let h = self.conv2.forward(&h, ctx);
        let h = self.bn2.forward(&h, ctx);
        let mut h = self.se.forward(&h, ctx);
        h.data.iter_mut().zip(&x.data).for_each(|(a, b)| *a += b);
        self.relu_out.forward(&h, ctx)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let d = self.relu_out.backward(dy);
        let b = self.se.backward(&d);
        let b = self.bn2.backward(&b);
        let b = self.conv2.backward(&b);
        let b = self.drop.backward(&b);
        let b = self.relu1.backward(&b);
        let b = self.bn1.backward(&b);
        let mut dx = self.conv1.backward(&b);
        dx.data.iter_mut().zip(&d.data).for_each(|(a, b)| *a += b);
        dx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.bn1.params_mut());
        p.extend(self.conv2.params_mut());
        p.extend(self.bn2.params_mut());
        p.extend(self.se.params_mut());
        p
    }
}

/// Maps `(n, input_dim, 1)` standardized features to `(n, 2, 1)` logits;
/// class 1 is legitimate.
#[derive(Debug, Clone)]
pub struct SeResNet1d {
    pub config: SeResNet1dConfig,
    stem_fc: Linear,
    stem_bn: BatchNorm1d,
    stem_relu: Relu,
    stem_conv: Conv1d,
    conv_bn: BatchNorm1d,
    conv_relu: Relu,
    pool: MaxPool1d,
    pub blocks: Vec<SeBlock>,
    gap: GlobalAvgPool,
    head1: Linear,
    head_relu: Relu,
    head2: Linear,
}

impl SeResNet1d {
    pub fn new(config: SeResNet1dConfig, seed: u64) -> Result<Self, AuthError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.channels;
        let stem_fc = Linear::new(config.input_dim, config.stem_out, &mut rng);
        let stem_conv =
            Conv1d::new(1, c, config.stem_kernel, config.stem_stride, config.stem_kernel / 2, &mut rng);
        let blocks = (0..config.n_blocks).map(|_| SeBlock::new(&config, &mut rng)).collect();
        let head1 = Linear::new(c, config.head_hidden, &mut rng);
        let head2 = Linear::new(config.head_hidden, 2, &mut rng);
        Ok(SeResNet1d {
            stem_bn: BatchNorm1d::new(config.stem_out),
            stem_relu: Relu::new(),
            conv_bn: BatchNorm1d::new(c),
            conv_relu: Relu::new(),
            pool: MaxPool1d::new(config.pool_kernel, config.pool_stride, config.pool_kernel / 2),
            gap: GlobalAvgPool::new(),
            head_relu: Relu::new(),
            config,
            stem_fc,
            stem_conv,
            blocks,
            head1,
            head2,
        })
    }

    /// Batch-norm layers in a fixed order, for their running statistics.
    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm1d> {
        let mut v = vec![&mut self.stem_bn, &mut self.conv_bn];
        for b in &mut self.blocks {
            v.push(&mut b.bn1);
            v.push(&mut b.bn2);
        }
        v
    }

    pub fn n_parameters(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    /// Activations entering the residual blocks.
    pub fn stem(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        let h = self.stem_fc.forward(x, ctx);
        let h = self.stem_bn.forward(&h, ctx);
        let h = self.stem_relu.forward(&h, ctx).reshape(1, self.config.stem_out);
        let h = self.stem_conv.forward(&h, ctx);
        let h = self.conv_bn.forward(&h, ctx);
        let h = self.conv_relu.forward(&h, ctx);
        self.pool.forward(&h, ctx)
    }
}

impl Layer for SeResNet1d {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        let mut h = self.stem(x, ctx);
        for b in &mut self.blocks {
            h = b.forward(&h, ctx);
        }
        let h = self.gap.forward(&h, ctx);
        let h = self.head1.forward(&h, ctx);
        let h = self.head_relu.forward(&h, ctx);
        self.head2.forward(&h, ctx)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let d = self.head2.backward(dy);
        let d = self.head_relu.backward(&d);
        let d = self.head1.backward(&d);
        let mut d = self.gap.backward(&d);
        for b in self.blocks.iter_mut().rev() {
            d = b.backward(&d);
        }
        let d = self.pool.backward(&d);
        let d = self.conv_relu.backward(&d);
        let d = self.conv_bn.backward(&d);
        let d = self.stem_conv.backward(&d);
        let d = d.reshape(self.config.stem_out, 1);
        let d = self.stem_relu.backward(&d);
        let d = self.stem_bn.backward(&d);
        self.stem_fc.backward(&d)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.stem_fc.params_mut();
        p.extend(self.stem_bn.params_mut());
        p.extend(self.stem_conv.params_mut());
        p.extend(self.conv_bn.params_mut());
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        p.extend(self.head1.params_mut());
        p.extend(self.head2.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_and_paper_configs_validate() {
        SeResNet1dConfig::default().validate().unwrap();
        SeResNet1dConfig::paper().validate().unwrap();
        assert_eq!(SeResNet1dConfig::default().block_len(), 64);
        let bad = SeResNet1dConfig { channels: 8, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AuthError::InvalidConfig { field, .. }) if field == "se_reduction"));
    }

    #[test]
    fn block_is_identity_at_init() {
        let cfg = SeResNet1dConfig { channels: 16, se_reduction: 4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut block = SeBlock::new(&cfg, &mut rng);
        let x = Param::uniform(&[4 * 16 * 10], 1.0, &mut rng).value.iter().map(|v| v.abs()).collect();
        let x = Act::new(x, 4, 16, 10);
        let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(1));
        assert_eq!(block.forward(&x, &mut ctx), x);
        assert_eq!(block.forward(&x, &mut Ctx::eval()), x);
    }
}

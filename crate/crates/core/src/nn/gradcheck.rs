//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Act, Ctx, Layer, Param};

pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-6;

/// Something with a scalar loss whose gradients land in its parameters.
pub trait Differentiable {
    /// Zeroes gradients, evaluates the loss and backpropagates it.
    fn loss_and_backward(&mut self) -> f64;
    /// Evaluates the loss without touching gradients.
    fn loss(&mut self) -> f64;
    fn params_mut(&mut self) -> Vec<&mut Param>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, ABS_FLOOR / REL_TOL)`.
    pub worst_error: f64,
    pub worst_at: (usize, usize),
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

pub fn check_gradients(model: &mut dyn Differentiable, step: f64) -> GradCheck {
    model.loss_and_backward();
    let analytic: Vec<Vec<f64>> = model.params_mut().iter().map(|p| p.grad.clone()).collect();
    let mut report = GradCheck { checked: 0, failures: 0, worst_error: 0.0, worst_at: (0, 0) };
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.params_mut()[pi].value[i];
            model.params_mut()[pi].value[i] = orig + step;
            let up = model.loss();
            model.params_mut()[pi].value[i] = orig - step;
            let down = model.loss();
            model.params_mut()[pi].value[i] = orig;
            let num = (up - down) / (2.0 * step);
            let diff = (a - num).abs();
            let err = diff / a.abs().max(num.abs()).max(ABS_FLOOR / REL_TOL);
            report.checked += 1;
            if diff > (REL_TOL * a.abs().max(num.abs())).max(ABS_FLOOR) {
                report.failures += 1;
            }
            if err > report.worst_error {
                report.worst_error = err;
                report.worst_at = (pi, i);
            }
        }
    }
    report
}

/// Wraps a single layer with loss `sum(r * layer(x))` for fixed random `r`.
/// The input is exposed as the last parameter so its gradient is checked too.
pub struct LayerProbe<L: Layer> {
    pub layer: L,
    pub input: Param,
    shape: (usize, usize, usize),
    weights: Vec<f64>,
    train: bool,
    seed: u64,
}

impl<L: Layer> LayerProbe<L> {
    pub fn new(layer: L, shape: (usize, usize, usize), train: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = Param::uniform(&[shape.0, shape.1, shape.2], 1.0, &mut rng);
        let mut probe = LayerProbe { layer, input, shape, weights: Vec::new(), train, seed };
        let out_len = probe.run().len();
        probe.weights = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
        probe
    }

    fn ctx(&self) -> Ctx {
        let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed));
        ctx.train = self.train;
        ctx
    }

    fn run(&mut self) -> Act {
        let (n, c, l) = self.shape;
        let x = Act::new(self.input.value.clone(), n, c, l);
        let mut ctx = self.ctx();
        self.layer.forward(&x, &mut ctx)
    }
}

impl<L: Layer> Differentiable for LayerProbe<L> {
    fn loss_and_backward(&mut self) -> f64 {
        for p in self.params_mut() {
            p.zero_grad();
        }
        let y = self.run();
        let dx = self.layer.backward(&Act::new(self.weights.clone(), y.n, y.c, y.l));
        self.input.grad.copy_from_slice(&dx.data);
        y.data.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    fn loss(&mut self) -> f64 {
        let y = self.run();
        y.data.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.layer.params_mut();
        p.push(&mut self.input);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    fn assert_ok(name: &str, r: GradCheck) {
        assert!(r.passed(), "{name}: {r:?}");
    }

    #[test]
    fn linear() {
        let l = Linear::new(7, 5, &mut rng());
        assert_ok("linear", check_gradients(&mut LayerProbe::new(l, (4, 7, 1), true, 1), 1e-5));
    }

    #[test]
    fn conv1d_strided_padded() {
        let c = Conv1d::new(3, 4, 7, 2, 3, &mut rng());
        assert_ok("conv", check_gradients(&mut LayerProbe::new(c, (2, 3, 13), true, 2), 1e-5));
        let c = Conv1d::new(2, 3, 3, 1, 1, &mut rng());
        assert_ok("conv k3", check_gradients(&mut LayerProbe::new(c, (3, 2, 6), true, 3), 1e-5));
    }

    #[test]
    fn batch_norm_train_and_eval() {
        let mut bn = BatchNorm1d::new(3);
        bn.gamma.value = vec![0.7, -1.3, 2.0];
        bn.beta.value = vec![0.1, 0.0, -0.5];
        assert_ok("bn train", check_gradients(&mut LayerProbe::new(bn.clone(), (4, 3, 5), true, 4), 1e-5));
        assert_ok("bn flat", check_gradients(&mut LayerProbe::new(bn.clone(), (6, 3, 1), true, 5), 1e-5));
        bn.running_mean = vec![0.2, -0.1, 0.4];
        bn.running_var = vec![0.5, 2.0, 1.5];
        assert_ok("bn eval", check_gradients(&mut LayerProbe::new(bn, (4, 3, 5), false, 6), 1e-5));
    }

    #[test]
    fn relu_maxpool_gap() {
        assert_ok("relu", check_gradients(&mut LayerProbe::new(Relu::new(), (3, 2, 9), true, 7), 1e-6));
        let mp = MaxPool1d::new(3, 2, 1);
        assert_ok("maxpool", check_gradients(&mut LayerProbe::new(mp, (2, 3, 11), true, 8), 1e-6));
        let gap = GlobalAvgPool::new();
        assert_ok("gap", check_gradients(&mut LayerProbe::new(gap, (2, 3, 7), true, 9), 1e-5));
    }

    #[test]
    fn dropout_off_and_fixed_mask() {
        let d = Dropout::new(0.3);
        assert_ok("dropout eval", check_gradients(&mut LayerProbe::new(d.clone(), (2, 3, 8), false, 10), 1e-5));
        assert_ok("dropout mask", check_gradients(&mut LayerProbe::new(d, (2, 3, 8), true, 11), 1e-5));
    }

    #[test]
    fn squeeze_excite() {
        let se = SqueezeExcite::new(8, 2, &mut rng());
        assert_ok("se", check_gradients(&mut LayerProbe::new(se, (3, 8, 6), true, 12), 1e-5));
    }

    #[test]
    fn se_zero_bottleneck_halves_input() {
        let mut se = SqueezeExcite::new(4, 2, &mut rng());
        for p in se.params_mut() {
            p.value.fill(0.0);
        }
        let x = Act::new(vec![1.5; 2 * 4 * 3], 2, 4, 3);
        let y = se.forward(&x, &mut Ctx::eval());
        assert!(se.gates().iter().all(|&g| g == 0.5));
        assert!(y.data.iter().all(|&v| v == 0.75));
    }
}

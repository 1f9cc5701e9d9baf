use rand_chacha::ChaCha8Rng;

use super::{Act, Ctx, Layer, Linear, Param, Relu};

/// Squeeze-and-excitation: per-channel sigmoid gates computed from the
/// length-averaged activations through a `c -> c / r -> c` bottleneck.
#[derive(Debug, Clone)]
pub struct SqueezeExcite {
    pub fc1: Linear,
    pub fc2: Linear,
    relu: Relu,
    input: Act,
    gates: Vec<f64>,
}

impl SqueezeExcite {
    pub fn new(channels: usize, reduction: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(reduction > 0 && channels % reduction == 0, "channels must divide by reduction");
        let hidden = channels / reduction;
        SqueezeExcite {
            fc1: Linear::new(channels, hidden, rng),
            fc2: Linear::new(hidden, channels, rng),
            relu: Relu::new(),
            input: Act::zeros(0, 0, 0),
            gates: Vec::new(),
        }
    }

    pub fn gates(&self) -> &[f64] {
        &self.gates
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Layer for SqueezeExcite {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        let (n, c, l) = (x.n, x.c, x.l);
        let squeezed = x.data.chunks_exact(l).map(|r| r.iter().sum::<f64>() / l as f64).collect();
        let h = self.fc1.forward(&Act::new(squeezed, n, c, 1), ctx);
        let h = self.relu.forward(&h, ctx);
        let z = self.fc2.forward(&h, ctx);
        self.gates = z.data.iter().map(|&v| sigmoid(v)).collect();
        let mut y = x.data.clone();
        for (row, g) in y.chunks_exact_mut(l).zip(&self.gates) {
            row.iter_mut().for_each(|v| *v *= g);
        }
        self.input = x.clone();
        Act::new(y, n, c, l)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let (n, c, l) = (self.input.n, self.input.c, self.input.l);
        let mut dx = dy.data.clone();
        let mut dz = vec![0.0; n * c];
        for (i, ((dxr, xr), g)) in
            dx.chunks_exact_mut(l).zip(self.input.data.chunks_exact(l)).zip(&self.gates).enumerate()
        {
            let dg: f64 = dxr.iter().zip(xr).map(|(d, x)| d * x).sum();
            dz[i] = dg * g * (1.0 - g);
            dxr.iter_mut().for_each(|v| *v *= g);
        }
        let dh = self.fc2.backward(&Act::new(dz, n, c, 1));
        let dh = self.relu.backward(&dh);
        let ds = self.fc1.backward(&dh);
        for (dxr, d) in dx.chunks_exact_mut(l).zip(&ds.data) {
            let share = d / l as f64;
            dxr.iter_mut().for_each(|v| *v += share);
        }
        Act::new(dx, n, c, l)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fc1.params_mut();
        p.extend(self.fc2.params_mut());
        p
    }
}

use super::Param;

/// Cosine-annealed learning rate for `epoch` in `0..epochs_max`.
pub fn cosine_lr(base: f64, epoch: usize, epochs_max: usize) -> f64 {
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs_max as f64).cos())
}

pub fn global_grad_norm(params: &[&mut Param]) -> f64 {
    params.iter().flat_map(|p| p.grad.iter()).map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut [&mut Param], max_norm: f64) -> f64 {
    let norm = global_grad_norm(params);
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(weight_decay: f64) -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, params: &mut [&mut Param], lr: f64) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter set changed between steps");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i] + self.weight_decay * p.value[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                p.value[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_midpoint_is_half() {
        assert!((cosine_lr(1e-3, 50, 100) - 5e-4).abs() < 1e-18);
        assert_eq!(cosine_lr(1e-3, 0, 100), 1e-3);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut a = Param::zeros(&[3]);
        let mut b = Param::zeros(&[2]);
        a.grad = vec![3.0, -4.0, 12.0];
        b.grad = vec![1e3, 2.0];
        let mut ps = vec![&mut a, &mut b];
        let before = clip_grad_norm(&mut ps, 1.0);
        assert!(before > 1.0);
        assert!(global_grad_norm(&ps) <= 1.0 + 1e-9);
        let mut c = Param::zeros(&[1]);
        c.grad = vec![0.5];
        let mut ps = vec![&mut c];
        clip_grad_norm(&mut ps, 1.0);
        assert_eq!(ps[0].grad, vec![0.5]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Param::filled(&[2], 1.0);
        p.grad = vec![0.3, -2.0];
        let mut opt = Adam::new(0.0);
        opt.step(&mut [&mut p], 0.01);
        assert!((p.value[0] - 0.99).abs() < 1e-7);
        assert!((p.value[1] - 1.01).abs() < 1e-7);
    }
}

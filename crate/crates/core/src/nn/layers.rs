use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{gemm, Act, Ctx, Layer, Param};

/// Fully connected layer on `(n, c, 1)` inputs; `c` is the feature axis.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Vec<f64>,
    n: usize,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Linear {
            weight: Param::uniform(&[out_dim, in_dim], bound, rng),
            bias: Param::uniform(&[out_dim], bound, rng),
            input: Vec::new(),
            n: 0,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Act, _ctx: &mut Ctx) -> Act {
        let (n, i, o) = (x.n, self.in_dim(), self.out_dim());
        assert_eq!(x.c * x.l, i, "linear input width");
        let mut y = Vec::with_capacity(n * o);
        for _ in 0..n {
            y.extend_from_slice(&self.bias.value);
        }
        let w = &self.weight.value;
        gemm(n, i, o, (&x.data, i as isize, 1), (w, 1, i as isize), 1.0, (&mut y, o as isize, 1));
        self.input.clone_from(&x.data);
        self.n = n;
        Act::new(y, n, o, 1)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let (n, i, o) = (self.n, self.in_dim(), self.out_dim());
        assert_eq!(dy.len(), n * o);
        let dyd = &dy.data;
        gemm(
            o,
            n,
            i,
            (dyd, 1, o as isize),
            (&self.input, i as isize, 1),
            1.0,
            (&mut self.weight.grad, i as isize, 1),
        );
        for row in dyd.chunks_exact(o) {
            for (g, d) in self.bias.grad.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; n * i];
        let w = &self.weight.value;
        gemm(n, o, i, (dyd, o as isize, 1), (w, i as isize, 1), 0.0, (&mut dx, i as isize, 1));
        Act::new(dx, n, i, 1)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 1-D convolution with zero padding, lowered to a matrix product per sample.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    cols: Vec<f64>,
    n: usize,
    l_in: usize,
}

impl Conv1d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(kernel > 0 && stride > 0);
        let bound = 1.0 / ((c_in * kernel) as f64).sqrt();
        Conv1d {
            weight: Param::uniform(&[c_out, c_in, kernel], bound, rng),
            bias: Param::uniform(&[c_out], bound, rng),
            stride,
            padding,
            cols: Vec::new(),
            n: 0,
            l_in: 0,
        }
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape[2]
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        (l_in + 2 * self.padding - self.kernel()) / self.stride + 1
    }

    /// Input position read by output `t` at tap `k`, if inside the signal.
    fn src(&self, t: usize, k: usize, l_in: usize) -> Option<usize> {
        (t * self.stride + k).checked_sub(self.padding).filter(|&s| s < l_in)
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, x: &Act, _ctx: &mut Ctx) -> Act {
        let (ci, co, k) = (self.c_in(), self.c_out(), self.kernel());
        assert_eq!(x.c, ci, "conv input channels");
        assert!(x.l + 2 * self.padding >= k, "conv input too short");
        let (n, l_in) = (x.n, x.l);
        let l_out = self.out_len(l_in);
        let rows = ci * k;
        let mut cols = vec![0.0; n * rows * l_out];
        let mut y = vec![0.0; n * co * l_out];
        for s in 0..n {
            let xs = &x.data[s * ci * l_in..(s + 1) * ci * l_in];
            let cs = &mut cols[s * rows * l_out..(s + 1) * rows * l_out];
            for c in 0..ci {
                for kk in 0..k {
                    let r = (c * k + kk) * l_out;
                    for t in 0..l_out {
                        if let Some(p) = self.src(t, kk, l_in) {
                            cs[r + t] = xs[c * l_in + p];
                        }
                    }
                }
            }
            let ys = &mut y[s * co * l_out..(s + 1) * co * l_out];
            for (o, b) in self.bias.value.iter().enumerate() {
                ys[o * l_out..(o + 1) * l_out].fill(*b);
            }
            gemm(
                co,
                rows,
                l_out,
                (&self.weight.value, rows as isize, 1),
                (cs, l_out as isize, 1),
                1.0,
                (ys, l_out as isize, 1),
            );
        }
        self.cols = cols;
        self.n = n;
        self.l_in = l_in;
        Act::new(y, n, co, l_out)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let (ci, co, k) = (self.c_in(), self.c_out(), self.kernel());
        let (n, l_in) = (self.n, self.l_in);
        let l_out = self.out_len(l_in);
        let rows = ci * k;
        assert_eq!(dy.len(), n * co * l_out);
        let mut dx = vec![0.0; n * ci * l_in];
        let mut dcols = vec![0.0; rows * l_out];
        for s in 0..n {
            let dys = &dy.data[s * co * l_out..(s + 1) * co * l_out];
            let cs = &self.cols[s * rows * l_out..(s + 1) * rows * l_out];
            gemm(
                co,
                l_out,
                rows,
                (dys, l_out as isize, 1),
                (cs, 1, l_out as isize),
                1.0,
                (&mut self.weight.grad, rows as isize, 1),
            );
            for (o, g) in self.bias.grad.iter_mut().enumerate() {
                *g += dys[o * l_out..(o + 1) * l_out].iter().sum::<f64>();
            }
            gemm(
                rows,
                co,
                l_out,
                (&self.weight.value, 1, rows as isize),
                (dys, l_out as isize, 1),
                0.0,
                (&mut dcols, l_out as isize, 1),
            );
            let dxs = &mut dx[s * ci * l_in..(s + 1) * ci * l_in];
            for c in 0..ci {
                for kk in 0..k {
                    let r = (c * k + kk) * l_out;
                    for t in 0..l_out {
                        if let Some(p) = self.src(t, kk, l_in) {
                            dxs[c * l_in + p] += dcols[r + t];
                        }
                    }
                }
            }
        }
        Act::new(dx, n, ci, l_in)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Batch normalization per channel over the batch and length axes.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    trained_step: bool,
    shape: (usize, usize, usize),
}

impl BatchNorm1d {
    pub fn new(c: usize) -> Self {
        BatchNorm1d {
            gamma: Param::filled(&[c], 1.0),
            beta: Param::zeros(&[c]),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            trained_step: false,
            shape: (0, 0, 0),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }
}

impl Layer for BatchNorm1d {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        let (n, c, l) = (x.n, x.c, x.l);
        assert_eq!(c, self.channels(), "batch-norm channels");
        let m = (n * l) as f64;
        let at = |s: usize, ch: usize| (s * c + ch) * l;
        let mut mean = vec![0.0; c];
        let mut inv_std = vec![0.0; c];
        if ctx.train {
            assert!(n * l > 1, "batch-norm needs more than one value per channel");
            for ch in 0..c {
                let mut sum = 0.0;
                for s in 0..n {
                    sum += x.data[at(s, ch)..at(s, ch) + l].iter().sum::<f64>();
                }
                let mu = sum / m;
                let mut ss = 0.0;
                for s in 0..n {
                    ss += x.data[at(s, ch)..at(s, ch) + l].iter().map(|v| (v - mu).powi(2)).sum::<f64>();
                }
                let var = ss / m;
                mean[ch] = mu;
                inv_std[ch] = 1.0 / (var + self.eps).sqrt();
                let mom = self.momentum;
                self.running_mean[ch] = (1.0 - mom) * self.running_mean[ch] + mom * mu;
                self.running_var[ch] = (1.0 - mom) * self.running_var[ch] + mom * ss / (m - 1.0);
            }
        } else {
            for ch in 0..c {
                mean[ch] = self.running_mean[ch];
                inv_std[ch] = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            }
        }
        let mut xhat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for s in 0..n {
            for ch in 0..c {
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                for i in at(s, ch)..at(s, ch) + l {
                    let h = (x.data[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = h;
                    y[i] = g * h + b;
                }
            }
        }
        self.xhat = xhat;
        self.inv_std = inv_std;
        self.trained_step = ctx.train;
        self.shape = (n, c, l);
        Act::new(y, n, c, l)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let (n, c, l) = self.shape;
        assert_eq!(dy.len(), n * c * l);
        let m = (n * l) as f64;
        let at = |s: usize, ch: usize| (s * c + ch) * l;
        let mut dx = vec![0.0; dy.len()];
        for ch in 0..c {
            let (mut sdy, mut sdyx) = (0.0, 0.0);
            for s in 0..n {
                for i in at(s, ch)..at(s, ch) + l {
                    sdy += dy.data[i];
                    sdyx += dy.data[i] * self.xhat[i];
                }
            }
            self.gamma.grad[ch] += sdyx;
            self.beta.grad[ch] += sdy;
            let k = self.gamma.value[ch] * self.inv_std[ch];
            for s in 0..n {
                for i in at(s, ch)..at(s, ch) + l {
                    dx[i] = if self.trained_step {
                        k * (dy.data[i] - sdy / m - self.xhat[i] * sdyx / m)
                    } else {
                        k * dy.data[i]
                    };
                }
            }
        }
        Act::new(dx, n, c, l)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, x: &Act, _ctx: &mut Ctx) -> Act {
        self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        Act::new(x.data.iter().map(|&v| v.max(0.0)).collect(), x.n, x.c, x.l)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let data = dy.data.iter().zip(&self.mask).map(|(&d, &m)| if m { d } else { 0.0 }).collect();
        Act::new(data, dy.n, dy.c, dy.l)
    }
}

/// Max pooling with implicit `-inf` padding; ties go to the first position.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    argmax: Vec<usize>,
    in_shape: (usize, usize, usize),
}

impl MaxPool1d {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        assert!(padding < kernel, "padding must leave a real input in every window");
        MaxPool1d { kernel, stride, padding, argmax: Vec::new(), in_shape: (0, 0, 0) }
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        (l_in + 2 * self.padding - self.kernel) / self.stride + 1
    }
}

impl Layer for MaxPool1d {
    fn forward(&mut self, x: &Act, _ctx: &mut Ctx) -> Act {
        let (n, c, l) = (x.n, x.c, x.l);
        let l_out = self.out_len(l);
        let mut y = Vec::with_capacity(n * c * l_out);
        let mut argmax = Vec::with_capacity(n * c * l_out);
        for row in x.data.chunks_exact(l) {
            let base = argmax.len() / l_out * l;
            for t in 0..l_out {
                let lo = (t * self.stride).saturating_sub(self.padding);
                let hi = (t * self.stride + self.kernel - self.padding).min(l);
                let mut best = lo;
                for p in lo + 1..hi {
                    if row[p] > row[best] {
                        best = p;
                    }
                }
                y.push(row[best]);
                argmax.push(base + best);
            }
        }
        self.argmax = argmax;
        self.in_shape = (n, c, l);
        Act::new(y, n, c, l_out)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let (n, c, l) = self.in_shape;
        let mut dx = vec![0.0; n * c * l];
        for (&src, &d) in self.argmax.iter().zip(&dy.data) {
            dx[src] += d;
        }
        Act::new(dx, n, c, l)
    }
}

/// Inverted dropout: kept activations are scaled by `1 / (1 - p)`.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub p: f64,
    mask: Vec<f64>,
}

impl Dropout {
    pub fn new(p: f64) -> Self {
        assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
        Dropout { p, mask: Vec::new() }
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act {
        if !ctx.train || self.p == 0.0 {
            self.mask = vec![1.0; x.len()];
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.p);
        self.mask = (0..x.len()).map(|_| if ctx.rng.random::<f64>() < self.p { 0.0 } else { keep }).collect();
        let data = x.data.iter().zip(&self.mask).map(|(v, m)| v * m).collect();
        Act::new(data, x.n, x.c, x.l)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let data = dy.data.iter().zip(&self.mask).map(|(d, m)| d * m).collect();
        Act::new(data, dy.n, dy.c, dy.l)
    }
}

/// Mean over the length axis, producing `(n, c, 1)`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    l: usize,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool::default()
    }
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: &Act, _ctx: &mut Ctx) -> Act {
        self.l = x.l;
        let data = x.data.chunks_exact(x.l).map(|r| r.iter().sum::<f64>() / x.l as f64).collect();
        Act::new(data, x.n, x.c, 1)
    }

    fn backward(&mut self, dy: &Act) -> Act {
        let l = self.l;
        let data = dy.data.iter().flat_map(|&d| std::iter::repeat_n(d / l as f64, l)).collect();
        Act::new(data, dy.n, dy.c, l)
    }
}

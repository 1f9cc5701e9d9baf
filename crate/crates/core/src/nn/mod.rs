//! Minimal differentiable layers over dense `f64` activations with
//! hand-written backward passes.
//!
//! Activations are `(batch, channels, length)` tensors stored row-major.
//! A layer caches whatever its backward pass needs during `forward`, so a
//! backward call must follow the forward call it differentiates.

pub mod gradcheck;
mod layers;
mod loss;
mod optim;
mod se;

pub use layers::{BatchNorm1d, Conv1d, Dropout, GlobalAvgPool, Linear, MaxPool1d, Relu};
pub use loss::{smooth_targets, softmax, softmax_cross_entropy};
pub use optim::{clip_grad_norm, cosine_lr, global_grad_norm, Adam};
pub use se::SqueezeExcite;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub data: Vec<f64>,
    pub n: usize,
    pub c: usize,
    pub l: usize,
}

impl Act {
    pub fn new(data: Vec<f64>, n: usize, c: usize, l: usize) -> Self {
        assert_eq!(data.len(), n * c * l, "activation shape mismatch");
        Act { data, n, c, l }
    }

    pub fn zeros(n: usize, c: usize, l: usize) -> Self {
        Act::new(vec![0.0; n * c * l], n, c, l)
    }

    /// Same data viewed with a different `(c, l)` split.
    pub fn reshape(self, c: usize, l: usize) -> Self {
        Act::new(self.data, self.n, c, l)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param { shape: shape.to_vec(), value: vec![0.0; n], grad: vec![0.0; n] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let mut p = Param::zeros(shape);
        p.value.fill(v);
        p
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Param::zeros(shape);
        for v in &mut p.value {
            *v = rng.random_range(-bound..=bound);
        }
        p
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Per-call execution state: training mode and the RNG used by dropout.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub train: bool,
    pub rng: ChaCha8Rng,
}

impl Ctx {
    pub fn train(rng: ChaCha8Rng) -> Self {
        Ctx { train: true, rng }
    }

    pub fn eval() -> Self {
        use rand::SeedableRng;
        Ctx { train: false, rng: ChaCha8Rng::seed_from_u64(0) }
    }
}

pub trait Layer {
    fn forward(&mut self, x: &Act, ctx: &mut Ctx) -> Act;
    /// Accumulates parameter gradients and returns the input gradient.
    fn backward(&mut self, dy: &Act) -> Act;
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

/// `c = alpha * a * b + beta * c` for strided row/column-major views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    beta: f64,
    c: (&mut [f64], isize, isize),
) {
    let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(a.0.len() as isize >= span(m, k, a.1, a.2));
    assert!(b.0.len() as isize >= span(k, n, b.1, b.2));
    assert!(c.0.len() as isize >= span(m, n, c.1, c.2));
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.0.as_mut_ptr(),
            c.1,
            c.2,
        );
    }
}

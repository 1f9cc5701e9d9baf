/// Row-wise softmax over `k` classes.
pub fn softmax(logits: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    out
}

/// Label-smoothed one-hot target: `(1 - eps)` on the class plus `eps / k`
/// spread uniformly.
pub fn smooth_targets(class: usize, k: usize, eps: f64) -> Vec<f64> {
    let mut t = vec![eps / k as f64; k];
    t[class] += 1.0 - eps;
    t
}

/// Weighted mean cross-entropy against soft targets, with its gradient
/// w.r.t. the logits. `weights` defaults to one per row.
pub fn softmax_cross_entropy(
    logits: &[f64],
    targets: &[f64],
    k: usize,
    weights: Option<&[f64]>,
) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), targets.len());
    let n = logits.len() / k;
    let p = softmax(logits, k);
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for r in 0..n {
        let w = weights.map_or(1.0, |w| w[r]);
        let row = &logits[r * k..(r + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for j in 0..k {
            let t = targets[r * k + j];
            loss -= w * t * (row[j] - lse);
            grad[r * k + j] = w * (p[r * k + j] - t) / n as f64;
        }
    }
    (loss / n as f64, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zero_logits() {
        assert_eq!(softmax(&[0.0, 0.0], 2), vec![0.5, 0.5]);
    }

    #[test]
    fn smoothing_example() {
        let t = smooth_targets(1, 2, 0.1);
        assert!((t[0] - 0.05).abs() < 1e-15 && (t[1] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_difference() {
        let logits = [0.3, -1.2, 2.0, 0.7, -0.4, 0.1];
        let targets = [0.05, 0.95, 0.6, 0.4, 0.5, 0.5];
        let weights = [1.0, 2.5, 0.5];
        let (_, g) = softmax_cross_entropy(&logits, &targets, 2, Some(&weights));
        let h = 1e-6;
        for i in 0..logits.len() {
            let mut a = logits;
            let mut b = logits;
            a[i] += h;
            b[i] -= h;
            let fa = softmax_cross_entropy(&a, &targets, 2, Some(&weights)).0;
            let fb = softmax_cross_entropy(&b, &targets, 2, Some(&weights)).0;
            let num = (fa - fb) / (2.0 * h);
            assert!((num - g[i]).abs() <= 1e-4 * num.abs().max(g[i].abs()).max(1e-2), "{i}: {num} {}", g[i]);
        }
    }
}

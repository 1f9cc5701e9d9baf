//! Nonlinear-dynamics indicators of the subcarrier amplitude sequence.
//!
//! All pairwise-distance statistics visit candidate pairs in order of the
//! first embedding coordinate and stop scanning once that coordinate alone
//! exceeds the tolerance, so typical cost is far below `O(N²)`.

pub const NONLINEAR_DIM: usize = 12;
pub const WAVELET_SCALES: usize = 8;
pub const SAMPEN_M: usize = 2;
pub const TOLERANCE_FACTOR: f64 = 0.2;
pub const HIGUCHI_KMAX: usize = 8;
pub const LYAP_EMBED: usize = 3;
pub const LYAP_STEPS: usize = 10;
/// Minimum index separation of nearest neighbours in the divergence estimate.
pub const LYAP_THEILER: usize = 10;
pub const RECURRENCE_EMBED: usize = 2;

fn std_pop(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Non-decimated Haar detail variance (mean of squared coefficients) at
/// levels 1..=8. Level `j` differences adjacent blocks of `2^(j-1)` samples,
/// normalized by `2^(j/2)`; only boundary-free coefficients are used.
pub fn wavelet_variances(x: &[f64]) -> [f64; WAVELET_SCALES] {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    let mut out = [0.0; WAVELET_SCALES];
    for (j, slot) in out.iter_mut().enumerate() {
        let half = 1usize << j;
        let width = 2 * half;
        if x.len() < width {
            continue;
        }
        let norm = 2f64.powf(-((j + 1) as f64) / 2.0);
        let mut sum_sq = 0.0;
        let count = x.len() - width + 1;
        for start in 0..count {
            let older = prefix[start + half] - prefix[start];
            let newer = prefix[start + width] - prefix[start + half];
            let d = (newer - older) * norm;
            sum_sq += d * d;
        }
        *slot = sum_sq / count as f64;
    }
    out
}

/// Indices sorted by value.
fn argsort(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    idx
}

/// Sample entropy with `m = 2`, Chebyshev tolerance `r`, and the recurrence
/// rate of the 2-dimensional delay embedding at the same tolerance.
/// Both count unordered pairs; self-matches are excluded.
fn sampen_and_recurrence(x: &[f64], r: f64) -> (f64, f64) {
    let n = x.len();
    if n < SAMPEN_M + 2 {
        return (0.0, 1.0);
    }
    let order = argsort(x);
    // Templates of length 2 start at i < n-1; SampEn uses i < n-m for both lengths.
    let n_emb = n - 1;
    let n_tmpl = n - SAMPEN_M;
    let (mut b, mut a, mut rec) = (0u64, 0u64, 0u64);
    for (p, &i) in order.iter().enumerate() {
        let xi = x[i];
        for &j in &order[p + 1..] {
            if x[j] - xi > r {
                break;
            }
            if i >= n_emb || j >= n_emb || (x[i + 1] - x[j + 1]).abs() > r {
                continue;
            }
            rec += 1;
            if i < n_tmpl && j < n_tmpl {
                b += 1;
                if (x[i + 2] - x[j + 2]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    let pairs = (n_emb * (n_emb - 1) / 2) as f64;
    let sampen = if b == 0 {
        0.0
    } else if a == 0 {
        // No length-3 match: bound by a single match.
        (b as f64).ln()
    } else {
        -(a as f64 / b as f64).ln()
    };
    (sampen, rec as f64 / pairs)
}

pub fn sample_entropy(x: &[f64]) -> f64 {
    sampen_and_recurrence(x, TOLERANCE_FACTOR * std_pop(x)).0
}

pub fn recurrence_rate(x: &[f64]) -> f64 {
    sampen_and_recurrence(x, TOLERANCE_FACTOR * std_pop(x)).1
}

/// Higuchi fractal dimension with `k = 1..=8`. Returns 1 for a constant series.
pub fn higuchi_fd(x: &[f64]) -> f64 {
    let n = x.len();
    let mut ln_k = Vec::with_capacity(HIGUCHI_KMAX);
    let mut ln_l = Vec::with_capacity(HIGUCHI_KMAX);
    for k in 1..=HIGUCHI_KMAX {
        let mut total = 0.0;
        let mut used = 0;
        for m in 0..k {
            let steps = (n - m - 1) / k;
            if steps == 0 {
                continue;
            }
            let mut len = 0.0;
            for i in 1..=steps {
                len += (x[m + i * k] - x[m + (i - 1) * k]).abs();
            }
            total += len * (n - 1) as f64 / (steps * k) as f64 / k as f64;
            used += 1;
        }
        if used == 0 {
            continue;
        }
        let l = total / used as f64;
        if l <= 0.0 {
            return 1.0;
        }
        ln_k.push((1.0 / k as f64).ln());
        ln_l.push(l.ln());
    }
    if ln_k.len() < 2 {
        return 1.0;
    }
    super::doppler::ls_slope(&ln_k, &ln_l)
}

/// Largest Lyapunov exponent (per sample) by Rosenstein's method: embedding
/// dimension 3, delay 1, nearest neighbours separated by more than the
/// Theiler window, linear fit of mean log divergence over the first ten steps.
pub fn lyapunov_rosenstein(x: &[f64]) -> f64 {
    if x.len() < LYAP_EMBED + LYAP_STEPS + LYAP_THEILER + 2 {
        return 0.0;
    }
    let m = x.len() - (LYAP_EMBED - 1);
    let dist2 = |i: usize, j: usize| -> f64 {
        (0..LYAP_EMBED).map(|d| (x[i + d] - x[j + d]).powi(2)).sum()
    };
    // Only neighbours that can be followed for the full horizon.
    let horizon = m - LYAP_STEPS + 1;
    let first = &x[..horizon];
    let order = argsort(first);
    let mut pos = vec![0usize; horizon];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }

    let mut sum_log = [0.0f64; LYAP_STEPS];
    let mut count = [0usize; LYAP_STEPS];
    for i in 0..horizon {
        let p = pos[i];
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        let consider = |j: usize, best: &mut f64, best_j: &mut usize| {
            if i.abs_diff(j) > LYAP_THEILER {
                let d = dist2(i, j);
                if d > 0.0 && d < *best {
                    *best = d;
                    *best_j = j;
                }
            }
        };
        for &j in order[p + 1..].iter() {
            let dx = first[j] - first[i];
            if dx * dx >= best {
                break;
            }
            consider(j, &mut best, &mut best_j);
        }
        for &j in order[..p].iter().rev() {
            let dx = first[i] - first[j];
            if dx * dx >= best {
                break;
            }
            consider(j, &mut best, &mut best_j);
        }
        if best_j == usize::MAX {
            continue;
        }
        for k in 0..LYAP_STEPS {
            let d = dist2(i + k, best_j + k);
            if d > 0.0 {
                sum_log[k] += 0.5 * d.ln();
                count[k] += 1;
            }
        }
    }
    let (steps, logs): (Vec<f64>, Vec<f64>) = (0..LYAP_STEPS)
        .filter(|&k| count[k] > 0)
        .map(|k| (k as f64, sum_log[k] / count[k] as f64))
        .unzip();
    if steps.len() < 2 {
        return 0.0;
    }
    super::doppler::ls_slope(&steps, &logs)
}

/// `[wv1..wv8, sample_entropy, higuchi_fd, lyapunov, recurrence_rate]`.
pub fn nonlinear_features(amplitudes: &[f64]) -> [f64; NONLINEAR_DIM] {
    let mut out = [0.0; NONLINEAR_DIM];
    let constant = amplitudes.iter().all(|&v| v == amplitudes[0]);
    let sd = std_pop(amplitudes);
    if constant || !(sd > 0.0) {
        out[9] = 1.0;
        out[11] = 1.0;
        return out;
    }
    out[..WAVELET_SCALES].copy_from_slice(&wavelet_variances(amplitudes));
    let (sampen, rr) = sampen_and_recurrence(amplitudes, TOLERANCE_FACTOR * sd);
    out[8] = sampen;
    out[9] = higuchi_fd(amplitudes);
    out[10] = lyapunov_rosenstein(amplitudes);
    out[11] = rr;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    // Brute-force references over all ordered pairs.
    fn sampen_brute(x: &[f64], r: f64) -> (u64, u64) {
        let n = x.len();
        let (mut a, mut b) = (0, 0);
        for i in 0..n - 2 {
            for j in i + 1..n - 2 {
                let c2 = (0..2).all(|d| (x[i + d] - x[j + d]).abs() <= r);
                if c2 {
                    b += 1;
                    if (x[i + 2] - x[j + 2]).abs() <= r {
                        a += 1;
                    }
                }
            }
        }
        (a, b)
    }

    fn rr_brute(x: &[f64], r: f64) -> f64 {
        let n = x.len() - 1;
        let mut hits = 0;
        for i in 0..n {
            for j in i + 1..n {
                if (0..2).all(|d| (x[i + d] - x[j + d]).abs() <= r) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn constant_series_defaults() {
        let f = nonlinear_features(&[0.4; 1248]);
        assert_eq!(&f[..8], &[0.0; 8]);
        assert_eq!(f[8], 0.0);
        assert_eq!(f[9], 1.0);
        assert_eq!(f[10], 0.0);
        assert_eq!(f[11], 1.0);
    }

    #[test]
    fn alternating_haar_scale_one() {
        let x: Vec<f64> = (0..1248).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let wv = wavelet_variances(&x);
        assert!((wv[0] - 2.0).abs() < 1e-9);
        assert!(wv[1..].iter().all(|&v| v < wv[0]));
        assert!(wv[1..].iter().all(|&v| v.abs() < 1e-20));
    }

    #[test]
    fn haar_matches_direct_filter() {
        let x = white(300, 4);
        let wv = wavelet_variances(&x);
        for j in 0..WAVELET_SCALES {
            let half = 1 << j;
            if 2 * half > x.len() {
                continue;
            }
            let mut coeffs = Vec::new();
            for t in 2 * half - 1..x.len() {
                let newer: f64 = (0..half).map(|l| x[t - l]).sum();
                let older: f64 = (half..2 * half).map(|l| x[t - l]).sum();
                coeffs.push((newer - older) / 2f64.powf((j + 1) as f64 / 2.0));
            }
            let direct = coeffs.iter().map(|c| c * c).sum::<f64>() / coeffs.len() as f64;
            assert!((wv[j] - direct).abs() < 1e-9 * direct.max(1.0));
        }
        // White noise: scale-1 detail variance equals the process variance.
        let long = white(20_000, 9);
        let wv = wavelet_variances(&long);
        assert!((wv[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampen_and_rr_match_brute_force() {
        for seed in 0..5 {
            let x = white(400, seed);
            let r = 0.2 * std_pop(&x);
            let (a, b) = sampen_brute(&x, r);
            let (s, rr) = sampen_and_recurrence(&x, r);
            assert!((s + (a as f64 / b as f64).ln()).abs() < 1e-12);
            assert!((rr - rr_brute(&x, r)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampen_white_noise_near_theory() {
        // For white Gaussian noise SampEn(2, 0.2σ) ≈ 2.2.
        let s = sample_entropy(&white(2000, 1));
        assert!((1.9..2.5).contains(&s), "{s}");
        // A sine is highly regular.
        let sine: Vec<f64> = (0..1248).map(|k| (k as f64 * 0.05).sin()).collect();
        assert!(sample_entropy(&sine) < 0.3);
    }

    #[test]
    fn higuchi_white_noise_and_line() {
        for seed in 0..5 {
            let d = higuchi_fd(&white(1248, 100 + seed));
            assert!((1.8..=2.05).contains(&d), "{d}");
        }
        let line: Vec<f64> = (0..1248).map(|k| k as f64 * 0.01).collect();
        assert!((higuchi_fd(&line) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lyapunov_signs() {
        // Logistic map at r = 4 has λ = ln 2 per step.
        let mut v = 0.3;
        let chaotic: Vec<f64> = (0..1248)
            .map(|_| {
                v = 4.0 * v * (1.0 - v);
                v
            })
            .collect();
        let l = lyapunov_rosenstein(&chaotic);
        assert!(l > 0.3, "{l}");
        let sine: Vec<f64> = (0..1248).map(|k| (k as f64 * 0.1).sin()).collect();
        assert!(lyapunov_rosenstein(&sine).abs() < 0.05);
    }

    #[test]
    fn nn_search_matches_brute_force() {
        // Pruned nearest-neighbour search agrees with the exhaustive one.
        let x = white(200, 77);
        let got = lyapunov_rosenstein(&x);
        let m = x.len() - 2;
        let horizon = m - LYAP_STEPS + 1;
        let d2 = |i: usize, j: usize| (0..3).map(|d| (x[i + d] - x[j + d]).powi(2)).sum::<f64>();
        let mut sum = [0.0; LYAP_STEPS];
        let mut cnt = [0usize; LYAP_STEPS];
        for i in 0..horizon {
            let best = (0..horizon)
                .filter(|&j| i.abs_diff(j) > LYAP_THEILER && d2(i, j) > 0.0)
                .min_by(|&a, &b| d2(i, a).total_cmp(&d2(i, b)))
                .unwrap();
            for k in 0..LYAP_STEPS {
                let d = d2(i + k, best + k);
                sum[k] += 0.5 * d.ln();
                cnt[k] += 1;
            }
        }
        let ks: Vec<f64> = (0..LYAP_STEPS).map(|k| k as f64).collect();
        let ys: Vec<f64> = (0..LYAP_STEPS).map(|k| sum[k] / cnt[k] as f64).collect();
        let want = crate::features::doppler::ls_slope(&ks, &ys);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ProbeWindow;

pub const DOPPLER_DIM: usize = 8;
pub const MAX_LAG: usize = 5;
pub const ENTROPY_BINS: usize = 32;
/// Doppler floor (Hz) before computing the coherence time.
pub const DOPPLER_FLOOR_HZ: f64 = 1e-3;
pub const COHERENCE_TIME_CAP_S: f64 = 0.423 / DOPPLER_FLOOR_HZ;
const LOG_FLOOR: f64 = 1e-12;

/// Shannon entropy (nats) of a 32-bin equal-width histogram over `[min, max]`.
pub fn amplitude_entropy(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if x.is_empty() || !(hi > lo) {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    let width = (hi - lo) / ENTROPY_BINS as f64;
    for &v in x {
        let b = (((v - lo) / width) as usize).min(ENTROPY_BINS - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn energy(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Correlation-decay statistics of the probe window:
/// `[doppler_mean, doppler_max, doppler_std, coherence_time, amplitude_entropy, r1, r5, decay_slope]`.
///
/// Per adjacent pair, `f_d = sqrt(2(1 − |r|)) / (2πΔt)` from the normalized
/// correlation of the active-bin vectors. `r(ℓ)` pools all lag-ℓ pairs of the
/// window into one normalized correlation; when the window is shorter than
/// five lags, `r5` reports the longest available lag. Windows with fewer
/// than two past probes yield zeros.
pub fn doppler_temporal_features(window: &ProbeWindow<'_>, current_amplitudes: &[f64]) -> [f64; DOPPLER_DIM] {
    let mut out = [0.0; DOPPLER_DIM];
    if window.history.len() < 2 {
        return out;
    }
    let seq: Vec<&[Complex64]> = window
        .history
        .iter()
        .chain(std::iter::once(window.current))
        .map(|p| p.active())
        .collect();
    let stamps: Vec<u64> = window
        .history
        .iter()
        .chain(std::iter::once(window.current))
        .map(|p| p.timestamp_ns)
        .collect();
    let energies: Vec<f64> = seq.iter().map(|v| energy(v)).collect();

    let dopplers: Vec<f64> = (1..seq.len())
        .map(|n| {
            let denom = (energies[n] * energies[n - 1]).sqrt();
            let r = if denom > 0.0 {
                (inner(seq[n], seq[n - 1]).norm() / denom).min(1.0)
            } else {
                0.0
            };
            let dt = (stamps[n] - stamps[n - 1]) as f64 * 1e-9;
            (2.0 * (1.0 - r)).max(0.0).sqrt() / (2.0 * PI * dt)
        })
        .collect();
    let m = dopplers.len() as f64;
    let mean = dopplers.iter().sum::<f64>() / m;
    let max = dopplers.iter().cloned().fold(0.0, f64::max);
    let std = (dopplers.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / m).sqrt();

    let max_lag = MAX_LAG.min(seq.len() - 1);
    let lags: Vec<f64> = (1..=max_lag).map(|l| l as f64).collect();
    let corr: Vec<f64> = (1..=max_lag)
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            let (mut ea, mut eb) = (0.0, 0.0);
            for n in l..seq.len() {
                acc += inner(seq[n], seq[n - l]);
                ea += energies[n];
                eb += energies[n - l];
            }
            let denom = (ea * eb).sqrt();
            if denom > 0.0 {
                (acc.norm() / denom).min(1.0)
            } else {
                0.0
            }
        })
        .collect();
    let log_corr: Vec<f64> = corr.iter().map(|r| r.max(LOG_FLOOR).ln()).collect();

    out[0] = mean;
    out[1] = max;
    out[2] = std;
    out[3] = 0.423 / mean.max(DOPPLER_FLOOR_HZ);
    out[4] = amplitude_entropy(current_amplitudes);
    out[5] = corr[0];
    out[6] = corr[max_lag - 1];
    out[7] = if max_lag >= 2 { ls_slope(&lags, &log_corr) } else { 0.0 };
    out
}

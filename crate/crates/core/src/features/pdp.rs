use crate::trace_format::SrsProbe;

pub const PDP_DIM: usize = 16;
pub const TOP_TAPS: usize = 5;

/// Floor applied to the RMS delay spread before inversion, in samples.
pub const DELAY_SPREAD_FLOOR: f64 = 1.0;
/// Coherence-bandwidth value of a single-delay channel.
pub const COHERENCE_BW_CAP: f64 = 1.0 / DELAY_SPREAD_FLOOR;

/// Power-weighted RMS spread of delay indices. Zero for an empty profile.
pub fn rms_delay_spread(pdp: &[f64]) -> f64 {
    let total: f64 = pdp.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean = pdp.iter().enumerate().map(|(l, p)| l as f64 * p).sum::<f64>() / total;
    let var = pdp
        .iter()
        .enumerate()
        .map(|(l, p)| p * (l as f64 - mean).powi(2))
        .sum::<f64>()
        / total;
    var.max(0.0).sqrt()
}

/// Mean, population standard deviation and kurtosis (`m4 / m2²`, 0 for a
/// constant series).
pub fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in x {
        let d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
    (mean, m2.sqrt(), kurt)
}

/// `[p1..p5, d1..d5, τ_rms, toa_ns, coherence_bw, amp_mean, amp_std, amp_kurtosis]`.
pub fn pdp_delay_features(probe: &SrsProbe, amplitudes: &[f64]) -> [f64; PDP_DIM] {
    let pdp: Vec<f64> = probe.time_est.iter().map(|z| z.norm_sqr()).collect();
    let mut out = [0.0; PDP_DIM];

    let mut order: Vec<usize> = (0..pdp.len()).collect();
    let k = TOP_TAPS.min(order.len());
    let by_power = |a: &usize, b: &usize| pdp[*b].total_cmp(&pdp[*a]).then(a.cmp(b));
    if k > 0 && k < order.len() {
        order.select_nth_unstable_by(k - 1, by_power);
    }
    order[..k].sort_by(by_power);
    for (slot, &idx) in order[..k].iter().enumerate() {
        out[slot] = pdp[idx];
        out[TOP_TAPS + slot] = idx as f64;
    }

    let tau = rms_delay_spread(&pdp);
    out[10] = tau;
    out[11] = probe.toa_ns;
    out[12] = 1.0 / tau.max(DELAY_SPREAD_FLOOR);
    let (mean, std, kurt) = moments(amplitudes);
    out[13] = mean;
    out[14] = std;
    out[15] = kurt;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerology::{FFT_SIZE, N_PRB, TIME_EST_LEN};
    use crate::trace_format::DeviceLabel;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn probe_with_taps(taps: &[(usize, Complex64)]) -> SrsProbe {
        let mut time_est = vec![Complex64::new(0.0, 0.0); TIME_EST_LEN];
        for &(i, g) in taps {
            time_est[i] = g;
        }
        SrsProbe {
            freq_est: vec![Complex64::new(0.0, 0.0); FFT_SIZE],
            time_est,
            snr_per_rb: vec![0.0; N_PRB],
            toa_ns: 12.0,
            timestamp_ns: 0,
            rnti: 1,
            device_label: DeviceLabel::Unknown,
        }
    }

    #[test]
    fn single_tap() {
        let p = probe_with_taps(&[(7, Complex64::new(1.0, 0.0))]);
        let f = pdp_delay_features(&p, &[1.0, 1.0]);
        assert_eq!(&f[..5], &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f[5], 7.0);
        assert_eq!(f[10], 0.0);
        assert_eq!(f[11], 12.0);
        assert_eq!(f[12], COHERENCE_BW_CAP);
    }

    #[test]
    fn two_equal_taps() {
        let g = Complex64::new(0.0, 0.5);
        let p = probe_with_taps(&[(0, g), (2, g)]);
        let f = pdp_delay_features(&p, &[1.0, 2.0]);
        assert_eq!(f[10], 1.0);
        assert_eq!(f[12], 1.0);
        assert_eq!((f[5], f[6]), (0.0, 2.0));
    }

    #[test]
    fn top_taps_descending_with_index_tiebreak() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let p = probe_with_taps(&[(40, c(1.0)), (3, c(2.0)), (9, c(1.0)), (100, c(0.5)), (7, c(3.0)), (8, c(0.1))]);
        let f = pdp_delay_features(&p, &[1.0]);
        assert_eq!(&f[..5], &[9.0, 4.0, 1.0, 1.0, 0.25]);
        assert_eq!(&f[5..10], &[7.0, 3.0, 9.0, 40.0, 100.0]);
    }

    #[test]
    fn random_taps_match_direct_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let taps: Vec<(usize, Complex64)> = (0..8)
                .map(|_| {
                    (
                        rng.random_range(0..TIME_EST_LEN),
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    )
                })
                .collect();
            let p = probe_with_taps(&taps);
            // Direct double sum over the nonzero taps only.
            let mut uniq = std::collections::BTreeMap::new();
            for &(i, g) in &taps {
                uniq.insert(i, g);
            }
            let pw: f64 = uniq.values().map(|g| g.norm_sqr()).sum();
            let mut second = 0.0;
            for (&i, gi) in &uniq {
                for (&j, gj) in &uniq {
                    second += gi.norm_sqr() * gj.norm_sqr() * (i as f64 - j as f64).powi(2);
                }
            }
            let oracle = (second / (2.0 * pw * pw)).sqrt();
            let got = pdp_delay_features(&p, &[1.0])[10];
            assert!(((got - oracle) / oracle).abs() < 1e-9, "{got} vs {oracle}");
        }
    }

    #[test]
    fn moments_of_constant() {
        assert_eq!(moments(&[2.0, 2.0, 2.0]), (2.0, 0.0, 0.0));
        let (_, s, k) = moments(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!((s, k), (1.0, 1.0));
    }
}

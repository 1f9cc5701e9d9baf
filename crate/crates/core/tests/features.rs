use num_complex::Complex64;
use srspla::features::{
    amplitude_features, diff_phase_features, extract, extract_probes, slice_boundaries,
    FeatureMatrix, ProbeWindow, FEATURE_DIM, WINDOW_LEN,
};
use srspla::numerology::{active_bins, DEFAULT_PROBE_PERIOD_NS};
use srspla::synth::{gen_session, DeviceProfile, SessionSpec, Tap};
use srspla::trace_format::{DeviceLabel, SrsProbe};

fn rich_profile(doppler_hz: f64) -> DeviceProfile {
    DeviceProfile {
        taps: (0..16)
            .map(|i| Tap {
                delay_index: 4 * i + (i * 7) % 3,
                mean_power: 1.0,
                phase0: 0.0,
            })
            .collect(),
        doppler_hz,
        ..DeviceProfile::single_tap(0)
    }
}

fn session(rho: f64, n: usize, seed: u64) -> Vec<SrsProbe> {
    let doppler = if rho >= 1.0 {
        0.0
    } else {
        DeviceProfile::doppler_for_correlation(rho, DEFAULT_PROBE_PERIOD_NS)
    };
    gen_session(&SessionSpec::new(rich_profile(doppler), n, DeviceLabel::Legit, seed)).unwrap()
}

fn window_at(probes: &[SrsProbe], i: usize) -> ProbeWindow<'_> {
    let start = i.saturating_sub(WINDOW_LEN - 1);
    ProbeWindow::new(&probes[i], &probes[start..i]).unwrap()
}

#[test]
fn layout_and_length() {
    let probes = session(0.9, 25, 1);
    assert_eq!(slice_boundaries(), [0, 1248, 2495, 2511, 2519, 2531]);
    for i in [0, 1, 2, 10, 24] {
        let fv = extract(&window_at(&probes, i));
        assert_eq!(fv.values.len(), FEATURE_DIM);
        assert!(fv.values.iter().all(|v| v.is_finite()));
        assert_eq!(fv, extract(&window_at(&probes, i)));
    }
    // Cold start: fewer than two past probes leaves the Doppler slice empty.
    let fv = extract(&window_at(&probes, 1));
    assert!(fv.slice("doppler_temporal").unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn frozen_channel_doppler() {
    let probes = session(1.0, 20, 3);
    let fv = extract(&window_at(&probes, 19));
    let d = fv.slice("doppler_temporal").unwrap();
    assert!(d[0].abs() < 1e-6, "doppler mean {}", d[0]);
    assert!((d[3] - srspla::features::doppler::COHERENCE_TIME_CAP_S).abs() < 1e-9 || d[3] > 1e5);
    assert!((d[5] - 1.0).abs() < 1e-12 && (d[6] - 1.0).abs() < 1e-12);
    assert!(d[7].abs() < 1e-12);
}

fn with_phase_ramp(p: &SrsProbe, beta: f64, scale: Complex64) -> SrsProbe {
    let mut q = p.clone();
    for k in active_bins() {
        q.freq_est[k] = p.freq_est[k] * Complex64::from_polar(1.0, beta * k as f64) * scale;
    }
    q
}

#[test]
fn timing_offset_invariance() {
    let probes = session(0.9, 3, 5);
    let p = &probes[2];
    let q = with_phase_ramp(p, 0.37, Complex64::new(1.0, 0.0));
    let (a, b) = (amplitude_features(p), amplitude_features(&q));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    let (dp, dq) = (diff_phase_features(p), diff_phase_features(&q));
    for (x, y) in dp.iter().zip(&dq) {
        let shift = srspla::features::spectral::wrap_phase(y - x - 0.37);
        assert!(shift.abs() < 1e-9);
    }
    let var = |v: &[f64]| {
        // Circular variance is the shift-invariant spread of wrapped phases.
        let c: Complex64 = v.iter().map(|&t| Complex64::from_polar(1.0, t)).sum();
        1.0 - c.norm() / v.len() as f64
    };
    assert!((var(&dp) - var(&dq)).abs() < 1e-9);
}

#[test]
fn complex_scaling_invariance() {
    let probes = session(0.9, 2, 8);
    let p = &probes[1];
    let c = Complex64::from_polar(0.5, 1.1);
    let q = with_phase_ramp(p, 0.0, c);
    for (x, y) in amplitude_features(p).iter().zip(amplitude_features(&q)) {
        assert!((x * 0.5 - y).abs() < 1e-12);
    }
    for (x, y) in diff_phase_features(p).iter().zip(diff_phase_features(&q)) {
        assert!(srspla::features::spectral::wrap_phase(x - y).abs() < 1e-9);
    }
}

#[test]
fn doppler_tracks_generator_correlation() {
    for (rho, seed) in [(0.99, 1), (0.9, 2), (0.7, 3)] {
        let probes = session(rho, 400, seed);
        let (mut r1, mut slope, mut n) = (0.0, 0.0, 0.0);
        for i in WINDOW_LEN..probes.len() {
            let fv = extract(&window_at(&probes, i));
            let d = fv.slice("doppler_temporal").unwrap();
            r1 += d[5];
            slope += d[7];
            n += 1.0;
        }
        let (r1, slope) = (r1 / n, slope / n);
        assert!((r1 - rho).abs() <= 0.05, "rho {rho}: r1 {r1}");
        assert!((slope - rho.ln()).abs() <= 0.05, "rho {rho}: slope {slope}");
    }
}

#[test]
fn extract_probes_keeps_order_and_streams() {
    let mut a = session(0.9, 6, 11);
    let b = session(0.9, 6, 12);
    for (i, p) in a.iter_mut().enumerate() {
        p.timestamp_ns = 2 * i as u64 * 1_000;
    }
    let mut merged = Vec::new();
    for (i, mut p) in b.into_iter().enumerate() {
        p.timestamp_ns = (2 * i as u64 + 1) * 1_000;
        p.rnti = 99;
        merged.push(a[i].clone());
        merged.push(p);
    }
    let mut m = FeatureMatrix::new(FEATURE_DIM);
    extract_probes(&merged, 0, &mut m);
    assert_eq!(m.n_rows(), 12);
    let ts: Vec<u64> = m.meta.iter().map(|r| r.timestamp_ns).collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
    // Row 4 is the third probe of the first stream: its window sees two
    // same-stream predecessors, so the Doppler slice is populated.
    assert!(m.row(4)[2511..2519].iter().any(|&v| v != 0.0));
    assert!(m.row(3)[2511..2519].iter().all(|&v| v == 0.0));
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srspla::eval::*;
use srspla::features::{FeatureMatrix, RowMeta};
use srspla::trace_format::DeviceLabel;

/// Area under the ROC polyline built by brute force at every distinct
/// score, integrated with the trapezoid rule.
fn trapezoid_auc(legit: &[f64], attack: &[f64]) -> f64 {
    let mut ts: Vec<f64> = legit.iter().chain(attack).cloned().collect();
    ts.push(f64::INFINITY);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let fpr = attack.iter().filter(|&&s| s >= t).count() as f64 / attack.len() as f64;
            let tpr = legit.iter().filter(|&&s| s >= t).count() as f64 / legit.len() as f64;
            (fpr, tpr)
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize, shift: f64, quantized: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = (rng.random::<f64>() + shift).clamp(0.0, 1.0);
            if quantized { (v * 20.0).round() / 20.0 } else { v }
        })
        .collect()
}

#[test]
fn eer_examples() {
    assert_eq!(compute_eer(&[0.9, 0.8], &[0.1, 0.2]).unwrap().0, 0.0);
    let (eer, _) = compute_eer(&[0.8, 0.6, 0.4], &[0.7, 0.5, 0.3]).unwrap();
    assert!((eer - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn identical_distributions_give_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = random_scores(&mut rng, 10_000, 0.0, false);
    let a = random_scores(&mut rng, 10_000, 0.0, false);
    let (eer, _) = compute_eer(&l, &a).unwrap();
    assert!((eer - 0.5).abs() <= 0.02, "{eer}");
}

#[test]
fn auc_matches_trapezoid_and_sweeps_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for set in 0..100 {
        let quantized = set % 2 == 0;
        let shift = rng.random_range(-0.3..0.5);
        let l = random_scores(&mut rng, 200, shift, quantized);
        let a = random_scores(&mut rng, 200, 0.0, quantized);
        let auc = compute_auc(&l, &a).unwrap();
        assert!((auc - trapezoid_auc(&l, &a)).abs() < 1e-9, "set {set}");
        let sweep = threshold_sweep(&l, &a).unwrap();
        assert!(sweep.windows(2).all(|w| w[1].far <= w[0].far && w[1].frr >= w[0].frr));
        let (eer, t) = compute_eer(&l, &a).unwrap();
        let i = sweep.iter().position(|p| p.threshold >= t).unwrap();
        let lo = sweep[i.saturating_sub(1)];
        let hi = sweep[i];
        let (min, max) = [lo.far, lo.frr, hi.far, hi.frr]
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(eer >= min - 1e-12 && eer <= max + 1e-12, "set {set}: eer outside bracket");
        if sweep.iter().all(|p| p.far <= 1.0 - p.frr) {
            assert!(eer <= 0.5 + 1e-12, "set {set}: eer {eer} above chance");
        }
    }
}

fn sessions(sizes: &[usize]) -> FeatureMatrix {
    let mut m = FeatureMatrix::new(3);
    for (s, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            let label = if s == 0 { DeviceLabel::Attack } else { DeviceLabel::Legit };
            let meta = RowMeta { timestamp_ns: 1_000 * i as u64, rnti: s as u16, label, session: s as u32 };
            m.push(&[i as f64, 0.0, 1.0], meta);
        }
    }
    m
}

#[test]
fn chronological_fractions() {
    let m = sessions(&[100]);
    let s = make_splits(&m, &SplitSpec::chronological()).unwrap();
    assert_eq!(s.train, (0..70).collect::<Vec<_>>());
    assert_eq!(s.val, (70..85).collect::<Vec<_>>());
    assert_eq!(s.test, (85..100).collect::<Vec<_>>());
    assert!(chronological_purity(&m, &s));
}

#[test]
fn splits_partition_every_session() {
    let m = sessions(&[7, 30, 101, 642]);
    for spec in [SplitSpec::chronological(), SplitSpec::random(5)] {
        let s = make_splits(&m, &spec).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        all.sort();
        assert_eq!(all, (0..m.n_rows()).collect::<Vec<_>>());
        assert_eq!(s.train.len(), 4 + 21 + 70 + 449);
    }
    let c = make_splits(&m, &SplitSpec::chronological()).unwrap();
    let r = make_splits(&m, &SplitSpec::random(5)).unwrap();
    assert_eq!(c.counts(&m), r.counts(&m));
    assert_eq!(r, make_splits(&m, &SplitSpec::random(5)).unwrap());
    assert_ne!(r, make_splits(&m, &SplitSpec::random(6)).unwrap());
    assert!(chronological_purity(&m, &c));
    assert!(!chronological_purity(&m, &r));
}

#[test]
fn tiny_session_rejected() {
    let m = sessions(&[20, 6]);
    assert!(matches!(
        make_splits(&m, &SplitSpec::chronological()),
        Err(EvalError::SessionTooSmall { session: 1, probes: 6 })
    ));
    let bad = SplitSpec { fractions: [0.5, 0.3, 0.3], ..SplitSpec::chronological() };
    assert!(matches!(make_splits(&m, &bad), Err(EvalError::InvalidSplit(_))));
}

#[test]
fn reports_are_deterministic_and_paired() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let l = random_scores(&mut rng, 50, 0.3, false);
    let a = random_scores(&mut rng, 20, 0.0, false);
    let counts = SplitCounts::default();
    let r1 = EvalReport::from_scores(ModelKind::Pearson, SplitMethod::Chronological, counts, &l, &a).unwrap();
    let r2 = EvalReport::from_scores(ModelKind::Pearson, SplitMethod::Chronological, counts, &l, &a).unwrap();
    assert_eq!(r1.to_json(), r2.to_json());
    assert!(r1.det_csv().starts_with("far_pct,frr_pct\n"));
    assert_eq!(r1.histogram_csv().lines().count(), HISTOGRAM_BINS + 1);
    let mut r3 = r1.clone();
    r3.split = SplitMethod::Random;
    r3.eer = r1.eer - 0.01;
    let summary = ExperimentSummary::new(ModelKind::Pearson, vec![r1, r3]);
    assert!((summary.delta_eer.unwrap() - 0.01).abs() < 1e-12);
}

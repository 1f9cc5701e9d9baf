use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use srspla::auth::{
    read_model, train, write_model, PearsonAuthenticator, Scorer, SeResNet1d, SeResNet1dConfig,
    TrainConfig, LEGIT_CLASS,
};
use srspla::features::{amplitude_features, FeatureMatrix, RowMeta, FEATURE_DIM};
use srspla::nn::gradcheck::{check_gradients, Differentiable};
use srspla::nn::{smooth_targets, softmax_cross_entropy, Act, Ctx, Layer, Param};
use srspla::synth::{gen_session, DatasetConfig, DeviceProfile, SessionSpec};
use srspla::trace_format::DeviceLabel;

struct NetProbe {
    net: SeResNet1d,
    x: Vec<f64>,
    targets: Vec<f64>,
    n: usize,
}

impl NetProbe {
    fn logits(&mut self) -> Act {
        let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(99));
        let x = Act::new(self.x.clone(), self.n, self.x.len() / self.n, 1);
        self.net.forward(&x, &mut ctx)
    }
}

impl Differentiable for NetProbe {
    fn loss_and_backward(&mut self) -> f64 {
        for p in self.net.params_mut() {
            p.zero_grad();
        }
        let y = self.logits();
        let (loss, grad) = softmax_cross_entropy(&y.data, &self.targets, 2, None);
        self.net.backward(&Act::new(grad, self.n, 2, 1));
        loss
    }

    fn loss(&mut self) -> f64 {
        let y = self.logits();
        softmax_cross_entropy(&y.data, &self.targets, 2, None).0
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }
}

fn small_config() -> SeResNet1dConfig {
    SeResNet1dConfig {
        stem_out: 16,
        n_blocks: 1,
        channels: 8,
        se_reduction: 2,
        head_hidden: 8,
        ..Default::default()
    }
}

#[test]
fn full_small_network_gradients() {
    let mut net = SeResNet1d::new(small_config(), 5).unwrap();
    // Nonzero second batch-norm scale so the residual branch is exercised.
    for b in &mut net.blocks {
        b.bn2.gamma.value.fill(0.8);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 4;
    let x = (0..n * FEATURE_DIM).map(|_| rng.sample(StandardNormal)).collect();
    let targets = [0, 1, 1, 0].iter().flat_map(|&c| smooth_targets(c, 2, 0.1)).collect();
    let mut probe = NetProbe { net, x, targets, n };
    let report = check_gradients(&mut probe, 1e-5);
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.checked, probe.net.n_parameters());
}

fn blobs(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = FeatureMatrix::new(FEATURE_DIM);
    for i in 0..n {
        let legit = i % 2 == 0;
        let shift = if legit { 0.15 } else { -0.15 };
        let row: Vec<f64> = (0..FEATURE_DIM).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect();
        let label = if legit { DeviceLabel::Legit } else { DeviceLabel::Attack };
        m.push(&row, RowMeta { timestamp_ns: i as u64, rnti: 1, label, session: 0 });
    }
    m
}

fn quick_train() -> TrainConfig {
    TrainConfig { epochs_max: 20, seed: 3, ..Default::default() }
}

#[test]
fn separable_blobs_reach_full_val_accuracy() {
    let (tr, va) = (blobs(160, 1), blobs(40, 2));
    let model = train(&tr, &va, &SeResNet1dConfig::default(), &quick_train()).unwrap();
    assert!(model.history.len() <= 20);
    let best = model.history.iter().map(|h| h.val_accuracy).fold(0.0, f64::max);
    assert_eq!(best, 1.0, "{:?}", model.history);
    assert_eq!(model.history[model.best_epoch].val_accuracy, best);
    assert!(model.history.iter().all(|h| h.train_loss.is_finite()));
}

#[test]
fn training_is_deterministic_and_file_round_trips() {
    let (tr, va) = (blobs(40, 4), blobs(12, 5));
    let cfg = TrainConfig { epochs_max: 3, batch_size: 16, ..quick_train() };
    let net = small_config();
    let mut a = train(&tr, &va, &net, &cfg).unwrap();
    let mut b = train(&tr, &va, &net, &cfg).unwrap();
    let bytes = write_model(&mut a);
    assert_eq!(bytes, write_model(&mut b));
    assert_eq!(&bytes[..8], b"SRSMDL01");

    let mut loaded = read_model(&bytes).unwrap();
    assert_eq!(write_model(&mut loaded), bytes);
    assert_eq!(loaded.history, a.history);
    let test = blobs(30, 6);
    let s1 = a.score_batch(&test).unwrap();
    assert_eq!(s1, loaded.score_batch(&test).unwrap());
    assert_eq!(s1, a.score_batch(&test).unwrap());
    for (r, s) in s1.iter().enumerate() {
        let row: Vec<f64> = test.row(r).iter().map(|&v| v as f64).collect();
        let (p, logits) = a.forward(&row).unwrap();
        assert!((p - s).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&p) && logits.iter().all(|v| v.is_finite()));
    }
    assert!(read_model(&bytes[..bytes.len() - 1]).is_err());
    let narrow = FeatureMatrix::new(10);
    assert!(a.score_batch(&narrow).is_err());
}

#[test]
fn empty_splits_rejected() {
    let empty = FeatureMatrix::new(FEATURE_DIM);
    let va = blobs(4, 1);
    assert!(train(&empty, &va, &small_config(), &quick_train()).is_err());
    assert!(train(&va, &empty, &small_config(), &quick_train()).is_err());
}

#[test]
fn pearson_enrolment_matches_mean_oracle() {
    let probes = gen_session(&SessionSpec::new(
        DeviceProfile { doppler_hz: 2.0, ..DatasetConfig::default_legit_profile() },
        50,
        DeviceLabel::Legit,
        8,
    ))
    .unwrap();
    let auth = PearsonAuthenticator::enroll(&probes).unwrap();
    let amps: Vec<Vec<f64>> = probes.iter().map(amplitude_features).collect();
    for (k, r) in auth.reference_profile.iter().enumerate() {
        let mean = amps.iter().map(|a| a[k]).sum::<f64>() / 50.0;
        assert!((r - mean).abs() < 1e-12);
    }
    let reference = PearsonAuthenticator::enroll(&probes[..2]).unwrap();
    let same = PearsonAuthenticator::enroll(&[probes[0].clone(), probes[0].clone()]).unwrap();
    assert_eq!(same.reference_profile, amps[0]);
    assert!((same.score(&probes[0]) - 1.0).abs() < 1e-12);
    // Positive affine maps of the amplitude vector keep the decision.
    for a in &amps[2..10] {
        let t: Vec<f64> = a.iter().map(|v| 3.0 * v + 0.2).collect();
        assert_eq!(
            reference.accepts(reference.score_amplitudes(a)),
            reference.accepts(reference.score_amplitudes(&t))
        );
    }
}

#[test]
fn pearson_batch_scores_are_unified() {
    let mut m = FeatureMatrix::new(FEATURE_DIM);
    let base: Vec<f64> = (0..FEATURE_DIM).map(|i| 1.0 + (i % 7) as f64 * 0.25).collect();
    for s in [1.0, 2.0] {
        let row: Vec<f64> = base.iter().map(|v| v * s).collect();
        m.push(&row, RowMeta { timestamp_ns: 0, rnti: 0, label: DeviceLabel::Legit, session: 0 });
    }
    let mut auth = PearsonAuthenticator::enroll_matrix(&m).unwrap();
    let scores = auth.score_batch(&m).unwrap();
    assert!(scores.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    assert_eq!(LEGIT_CLASS, 1);
}

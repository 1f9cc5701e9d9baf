use super::{make_splits, EvalError, EvalReport, ExperimentSummary, ModelKind, SplitMethod, SplitSpec, Splits};
use crate::auth::{train_with_progress, EpochRecord, PearsonAuthenticator, Scorer, SeResNet1dConfig, TrainConfig, TrainedModel};
use crate::features::FeatureMatrix;
use crate::trace_format::DeviceLabel;

#[derive(Debug, Clone)]
pub enum Authenticator {
    Pearson(PearsonAuthenticator),
    Resnet(Box<TrainedModel>),
}

impl Authenticator {
    pub fn scorer(&mut self) -> &mut dyn Scorer {
        match self {
            Authenticator::Pearson(p) => p,
            Authenticator::Resnet(m) => m.as_mut(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub splits: Splits,
    pub model: Authenticator,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub runs: Vec<SplitRun>,
    pub summary: ExperimentSummary,
}

/// Fits on the train rows (validation drives early stopping for the
/// network) and reports on the test rows.
pub fn evaluate_split(
    m: &FeatureMatrix,
    splits: &Splits,
    method: SplitMethod,
    kind: ModelKind,
    network: &SeResNet1dConfig,
    train_config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(Authenticator, EvalReport), EvalError> {
    let counts = splits.counts(m);
    for (name, c) in [("train", counts.train), ("val", counts.val), ("test", counts.test)] {
        if c.legit == 0 || c.attack == 0 {
            return Err(EvalError::MissingClass { split: name.to_string() });
        }
    }
    let train_m = m.select(&splits.train);
    let test_m = m.select(&splits.test);
    let mut model = match kind {
        ModelKind::Pearson => Authenticator::Pearson(PearsonAuthenticator::enroll_matrix(&train_m)?),
        ModelKind::Resnet => {
            let val_m = m.select(&splits.val);
            let trained = train_with_progress(&train_m, &val_m, network, train_config, |r| on_epoch(r))?;
            Authenticator::Resnet(Box::new(trained))
        }
    };
    let scores = model.scorer().score_batch(&test_m)?;
    let (mut legit, mut attack) = (Vec::new(), Vec::new());
    for (s, meta) in scores.iter().zip(&test_m.meta) {
        match meta.label {
            DeviceLabel::Legit => legit.push(*s),
            DeviceLabel::Attack => attack.push(*s),
            DeviceLabel::Unknown => {}
        }
    }
    let report = EvalReport::from_scores(kind, method, counts, &legit, &attack)?;
    Ok((model, report))
}

/// Runs every split spec with the same model and training configuration.
pub fn run_experiment(
    m: &FeatureMatrix,
    kind: ModelKind,
    specs: &[SplitSpec],
    network: &SeResNet1dConfig,
    train_config: &TrainConfig,
) -> Result<Experiment, EvalError> {
    run_experiment_with_progress(m, kind, specs, network, train_config, &mut |_, _| {})
}

pub fn run_experiment_with_progress(
    m: &FeatureMatrix,
    kind: ModelKind,
    specs: &[SplitSpec],
    network: &SeResNet1dConfig,
    train_config: &TrainConfig,
    on_epoch: &mut dyn FnMut(SplitMethod, &EpochRecord),
) -> Result<Experiment, EvalError> {
    let mut runs = Vec::new();
    for spec in specs {
        let splits = make_splits(m, spec)?;
        let mut cb = |r: &EpochRecord| on_epoch(spec.method, r);
        let (model, report) = evaluate_split(m, &splits, spec.method, kind, network, train_config, &mut cb)?;
        runs.push(SplitRun { splits, model, report });
    }
    let summary = ExperimentSummary::new(kind, runs.iter().map(|r| r.report.clone()).collect());
    Ok(Experiment { runs, summary })
}

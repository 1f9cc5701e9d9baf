//! End-to-end pipeline plumbing shared by the command line and the Python
//! bindings: configuration, per-stage runners and artifact layout.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auth::{
    load_model, read_model, save_model, AuthError, PearsonAuthenticator, SeResNet1dConfig,
    TrainConfig, TrainedModel, MODEL_MAGIC,
};
use crate::eval::{
    bench_latency, evaluate_split, history_csv, make_splits, run_experiment_with_progress, Authenticator,
    EvalError, EvalReport, ExperimentSummary, LatencyTable, ModelKind, SplitMethod, SplitSpec,
};
use crate::features::{
    extract_dataset, read_feature_file, write_feature_file, FeatureError, FeatureMatrix, FEATURE_DIM,
};
use crate::synth::{gen_dataset, DatasetConfig, Manifest, SynthError};
use crate::trace_format::{DeviceLabel, ProbeAssembler, SrsProbe, TraceReader};
use crate::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    Data { path: PathBuf, reason: String },
}

impl PipelineError {
    /// 2 for configuration errors, 3 for data errors, 4 for numeric
    /// divergence.
    pub fn exit_code(&self) -> i32 {
        let auth = |e: &AuthError| match e {
            AuthError::Diverged { .. } | AuthError::NonFiniteActivation => 4,
            AuthError::InvalidConfig { .. } => 2,
            _ => 3,
        };
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Synth(SynthError::InvalidProfile { .. } | SynthError::Config(_)) => 2,
            PipelineError::Synth(_) | PipelineError::Feature(_) => 3,
            PipelineError::Eval(EvalError::Auth(e)) | PipelineError::Auth(e) => auth(e),
            PipelineError::Eval(EvalError::InvalidSplit(_)) => 2,
            PipelineError::Eval(_) | PipelineError::Io { .. } | PipelineError::Data { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub traces_dir: PathBuf,
    pub features_file: PathBuf,
    pub model_file: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            traces_dir: "traces".into(),
            features_file: "features.srsfeat".into(),
            model_file: "model.srsmdl".into(),
            report_dir: "report".into(),
        }
    }
}

impl Paths {
    /// Resolves relative entries against `base`.
    pub fn under(&self, base: &Path) -> Paths {
        let j = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Paths {
            traces_dir: j(&self.traces_dir),
            features_file: j(&self.features_file),
            model_file: j(&self.model_file),
            report_dir: j(&self.report_dir),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub methods: Vec<SplitMethod>,
    pub fractions: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { methods: vec![SplitMethod::Chronological, SplitMethod::Random], fractions: [0.70, 0.15, 0.15] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n_probes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n_probes: 1000 }
    }
}

/// Full pipeline configuration. The top-level `seed` overrides the dataset,
/// training and random-split seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    /// Absent means the desk-scale default dataset.
    pub dataset: Option<DatasetConfig>,
    pub splits: SplitConfig,
    pub models: Vec<ModelKind>,
    pub network: SeResNet1dConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: Paths::default(),
            dataset: None,
            splits: SplitConfig::default(),
            models: vec![ModelKind::Resnet, ModelKind::Pearson],
            network: SeResNet1dConfig::default(),
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Dataset configuration with the pipeline seed applied.
    pub fn dataset_config(&self) -> DatasetConfig {
        let mut d = self.dataset.clone().unwrap_or_else(|| DatasetConfig::desk_default(self.seed));
        d.seed = self.seed;
        d
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn split_spec(&self, method: SplitMethod) -> SplitSpec {
        SplitSpec { method, fractions: self.splits.fractions, seed: self.seed }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.dataset_config().validate()?;
        self.network.validate()?;
        self.train_config().validate()?;
        if self.network.input_dim != FEATURE_DIM {
            return Err(PipelineError::Config(format!("network.input_dim must be {FEATURE_DIM}")));
        }
        if self.splits.methods.is_empty() {
            return Err(PipelineError::Config("splits.methods must not be empty".into()));
        }
        self.split_spec(SplitMethod::Chronological).validate()?;
        if self.models.is_empty() {
            return Err(PipelineError::Config("models must not be empty".into()));
        }
        if self.bench.n_probes == 0 {
            return Err(PipelineError::Config("bench.n_probes must be positive".into()));
        }
        Ok(())
    }
}

pub fn cmd_gen(cfg: &PipelineConfig, out_dir: &Path) -> Result<Manifest, PipelineError> {
    Ok(gen_dataset(&cfg.dataset_config(), out_dir)?)
}

/// Extracts a manifest directory or single trace file into `out`.
pub fn cmd_extract(input: &Path, out: &Path) -> Result<FeatureMatrix, PipelineError> {
    let m = extract_dataset(input)?;
    write_feature_file(out, &m)?;
    Ok(m)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix, PipelineError> {
    Ok(read_feature_file(path)?)
}

/// A trained network or enrolled baseline as stored on disk: network models
/// use the binary container, baselines are JSON.
pub fn save_authenticator(path: &Path, model: &mut Authenticator) -> Result<(), PipelineError> {
    match model {
        Authenticator::Resnet(m) => {
            save_model(path, m)?;
            let hist = history_path(path);
            write(&hist, history_csv(&m.history).as_bytes())
        }
        Authenticator::Pearson(p) => {
            write(path, serde_json::to_string_pretty(p).expect("baseline serializes").as_bytes())
        }
    }
}

pub fn history_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".history.csv");
    PathBuf::from(s)
}

pub fn load_authenticator(path: &Path) -> Result<Authenticator, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(MODEL_MAGIC) {
        return Ok(Authenticator::Resnet(Box::new(read_model(&bytes)?)));
    }
    serde_json::from_slice::<PearsonAuthenticator>(&bytes)
        .map(Authenticator::Pearson)
        .map_err(|e| PipelineError::Data { path: path.to_path_buf(), reason: format!("not a model file: {e}") })
}

/// Fits one model kind on the train split of `method` and saves it.
pub fn cmd_train(
    cfg: &PipelineConfig,
    features: &FeatureMatrix,
    method: SplitMethod,
    kind: ModelKind,
    model_path: &Path,
    on_epoch: &mut dyn FnMut(&crate::auth::EpochRecord),
) -> Result<(Authenticator, EvalReport), PipelineError> {
    let splits = make_splits(features, &cfg.split_spec(method))?;
    let (mut model, report) =
        evaluate_split(features, &splits, method, kind, &cfg.network, &cfg.train_config(), on_epoch)?;
    save_authenticator(model_path, &mut model)?;
    Ok((model, report))
}

/// Trains and evaluates every configured model kind under every configured
/// split, writing `<report_dir>/<model>/...`. Returns the summaries and, for
/// each kind, the model fitted on the first configured split.
pub fn cmd_eval(
    cfg: &PipelineConfig,
    features: &FeatureMatrix,
    report_dir: &Path,
    on_epoch: &mut dyn FnMut(ModelKind, SplitMethod, &crate::auth::EpochRecord),
) -> Result<Vec<(ExperimentSummary, Authenticator)>, PipelineError> {
    let specs: Vec<SplitSpec> = cfg.splits.methods.iter().map(|&m| cfg.split_spec(m)).collect();
    let mut out = Vec::new();
    for &kind in &cfg.models {
        let mut cb = |m: SplitMethod, r: &crate::auth::EpochRecord| on_epoch(kind, m, r);
        let exp =
            run_experiment_with_progress(features, kind, &specs, &cfg.network, &cfg.train_config(), &mut cb)?;
        let dir = report_dir.join(kind.name());
        exp.summary.write_dir(&dir)?;
        for run in &exp.runs {
            if let Authenticator::Resnet(m) = &run.model {
                let path = dir.join(format!("history_{}.csv", run.report.split.name()));
                write(&path, history_csv(&m.history).as_bytes())?;
            }
        }
        let first = exp.runs.into_iter().next().expect("at least one split").model;
        out.push((exp.summary, first));
    }
    Ok(out)
}

/// Scores the test split of `method` with a saved model.
pub fn cmd_eval_saved(
    cfg: &PipelineConfig,
    features: &FeatureMatrix,
    model: &mut Authenticator,
    method: SplitMethod,
) -> Result<EvalReport, PipelineError> {
    let splits = make_splits(features, &cfg.split_spec(method))?;
    let test = features.select(&splits.test);
    let scores = model.scorer().score_batch(&test)?;
    let (mut legit, mut attack) = (Vec::new(), Vec::new());
    for (s, meta) in scores.iter().zip(&test.meta) {
        match meta.label {
            DeviceLabel::Legit => legit.push(*s),
            DeviceLabel::Attack => attack.push(*s),
            DeviceLabel::Unknown => {}
        }
    }
    let kind = match model {
        Authenticator::Pearson(_) => ModelKind::Pearson,
        Authenticator::Resnet(_) => ModelKind::Resnet,
    };
    Ok(EvalReport::from_scores(kind, method, splits.counts(features), &legit, &attack)?)
}

/// Decoded probes of the first legitimate session in a trace directory.
pub fn load_legit_session(traces_dir: &Path) -> Result<Vec<SrsProbe>, PipelineError> {
    let manifest = Manifest::load(traces_dir)?;
    let session = manifest
        .sessions
        .iter()
        .find(|s| s.label == DeviceLabel::Legit)
        .ok_or_else(|| PipelineError::Data { path: traces_dir.into(), reason: "no legit session".into() })?;
    let path = manifest.trace_path(traces_dir, session);
    let file = std::fs::File::open(&path).map_err(io_err(&path))?;
    let data = |e: crate::trace_format::TraceError| PipelineError::Data { path: path.clone(), reason: e.to_string() };
    let reader = TraceReader::new(std::io::BufReader::new(file)).map_err(data)?;
    let mut asm = ProbeAssembler::new();
    let mut probes = Vec::new();
    for r in reader {
        asm.push(r.map_err(data)?, &mut probes).map_err(data)?;
    }
    asm.flush_into(&mut probes);
    Ok(probes)
}

/// Times the four per-probe stages on the first legit session, with the
/// baseline enrolled on that session's first 70 %.
pub fn cmd_bench(
    traces_dir: &Path,
    model: &mut TrainedModel,
    n_probes: usize,
) -> Result<LatencyTable, PipelineError> {
    let probes = load_legit_session(traces_dir)?;
    let n_enroll = (probes.len() * 7 / 10).max(2).min(probes.len());
    let pearson = PearsonAuthenticator::enroll(&probes[..n_enroll])?;
    Ok(bench_latency(&probes, model, &pearson, n_probes)?)
}

pub fn write_latency(dir: &Path, table: &LatencyTable) -> Result<(), PipelineError> {
    write(&dir.join("latency.json"), serde_json::to_string_pretty(table).expect("serializes").as_bytes())?;
    write(&dir.join("latency.csv"), table.to_csv().as_bytes())
}

#[derive(Debug, Clone)]
pub struct RunAll {
    pub summaries: Vec<ExperimentSummary>,
    pub latency: Option<LatencyTable>,
    pub paths: Paths,
}

/// gen → extract → train/evaluate every model under every split → save
/// the network fitted on the first split → latency bench. Everything except
/// `latency.*` is byte-identical across runs with the same seed.
pub fn cmd_run_all(
    cfg: &PipelineConfig,
    out_dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<RunAll, PipelineError> {
    cfg.validate()?;
    let paths = cfg.paths.under(out_dir);
    let manifest = cmd_gen(cfg, &paths.traces_dir)?;
    log(&format!(
        "generated {} sessions ({} legit / {} attack probes)",
        manifest.sessions.len(),
        manifest.legit_probes,
        manifest.attack_probes
    ));
    let features = cmd_extract(&paths.traces_dir, &paths.features_file)?;
    log(&format!("extracted {} feature rows", features.n_rows()));
    let mut on_epoch = |k: ModelKind, m: SplitMethod, r: &crate::auth::EpochRecord| {
        log(&format!(
            "{} {} epoch {} lr {:.2e} loss {:.4} val_acc {:.4}",
            k.name(),
            m.name(),
            r.epoch,
            r.lr,
            r.train_loss,
            r.val_accuracy
        ))
    };
    let results = cmd_eval(cfg, &features, &paths.report_dir, &mut on_epoch)?;
    let mut summaries = Vec::new();
    let mut latency = None;
    for (summary, mut model) in results {
        for r in &summary.reports {
            log(&format!("{} {}: EER {:.4} AUC {:.4}", summary.model.name(), r.split.name(), r.eer, r.auc));
        }
        if let Some(d) = summary.delta_eer {
            log(&format!("{} delta EER (chronological - random): {d:.4}", summary.model.name()));
        }
        if matches!(model, Authenticator::Resnet(_)) {
            save_authenticator(&paths.model_file, &mut model)?;
        }
        if let Authenticator::Resnet(m) = &mut model {
            let table = cmd_bench(&paths.traces_dir, m, cfg.bench.n_probes)?;
            write_latency(&paths.report_dir, &table)?;
            latency = Some(table);
        }
        summaries.push(summary);
    }
    Ok(RunAll { summaries, latency, paths })
}

pub fn load_trained(path: &Path) -> Result<TrainedModel, PipelineError> {
    Ok(load_model(path)?)
}

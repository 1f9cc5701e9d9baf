use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srspla::eval::{ModelKind, SplitMethod};
use srspla::pipeline::{self, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "srspla", version, about = "SRS physical-layer authentication pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Chrono,
    Random,
    Both,
}

impl SplitArg {
    fn methods(self) -> Vec<SplitMethod> {
        match self {
            SplitArg::Chrono => vec![SplitMethod::Chronological],
            SplitArg::Random => vec![SplitMethod::Random],
            SplitArg::Both => vec![SplitMethod::Chronological, SplitMethod::Random],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Pearson,
    Resnet,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Pearson => ModelKind::Pearson,
            ModelArg::Resnet => ModelKind::Resnet,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trace files and a manifest.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse traces and write the feature matrix.
    Extract {
        /// Manifest directory or single trace file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on the train split and save it.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum, default_value = "chrono")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "resnet")]
        model: ModelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate per split, writing reports and plot CSVs.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Same as `--split both`.
        #[arg(long, conflicts_with = "split")]
        compare_splits: bool,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Score with a saved model instead of training.
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-stage latency table.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Trace directory with a manifest.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// gen → extract → train → eval → bench from one configuration.
    RunAll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let cfg = match common.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn print_report(r: &srspla::eval::EvalReport) {
    println!(
        "{} {}: EER {:.4} (threshold {:.4}) AUC {:.4} acc@0.5 {:.4} test legit/attack {}/{}",
        r.model.name(),
        r.split.name(),
        r.eer,
        r.eer_threshold,
        r.auc,
        r.accuracy_at_half,
        r.counts.test.legit,
        r.counts.test.attack
    );
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Gen { common, out } => {
            let cfg = load_config(&common)?;
            let m = pipeline::cmd_gen(&cfg, &out)?;
            println!(
                "wrote {} sessions to {} ({} legit / {} attack probes)",
                m.sessions.len(),
                out.display(),
                m.legit_probes,
                m.attack_probes
            );
        }
        Command::Extract { input, out } => {
            let m = pipeline::cmd_extract(&input, &out)?;
            println!("{} rows x {} features -> {}", m.n_rows(), m.dim, out.display());
        }
        Command::Train { common, features, split, model, out } => {
            let cfg = load_config(&common)?;
            let method = match split {
                SplitArg::Both => {
                    return Err(PipelineError::Config("train takes a single split".into()));
                }
                s => s.methods()[0],
            };
            let m = pipeline::load_features(&features)?;
            let mut cb = |r: &srspla::auth::EpochRecord| {
                log(&format!(
                    "epoch {} lr {:.2e} loss {:.4} val_acc {:.4}",
                    r.epoch, r.lr, r.train_loss, r.val_accuracy
                ))
            };
            let (_, report) = pipeline::cmd_train(&cfg, &m, method, model.into(), &out, &mut cb)?;
            print_report(&report);
            println!("model -> {}", out.display());
        }
        Command::Eval { common, features, split, compare_splits, model, model_file, out } => {
            let mut cfg = load_config(&common)?;
            let split = if compare_splits { Some(SplitArg::Both) } else { split };
            if let Some(s) = split {
                cfg.splits.methods = s.methods();
            }
            if let Some(k) = model {
                cfg.models = vec![k.into()];
            }
            let m = pipeline::load_features(&features)?;
            match model_file {
                Some(path) => {
                    let mut auth = pipeline::load_authenticator(&path)?;
                    let mut reports = Vec::new();
                    for &method in &cfg.splits.methods {
                        let r = pipeline::cmd_eval_saved(&cfg, &m, &mut auth, method)?;
                        print_report(&r);
                        reports.push(r);
                    }
                    let kind = reports[0].model;
                    let summary = srspla::eval::ExperimentSummary::new(kind, reports);
                    summary.write_dir(&out.join(kind.name()))?;
                }
                None => {
                    let mut cb = |k: ModelKind, s: SplitMethod, r: &srspla::auth::EpochRecord| {
                        log(&format!(
                            "{} {} epoch {} loss {:.4} val_acc {:.4}",
                            k.name(),
                            s.name(),
                            r.epoch,
                            r.train_loss,
                            r.val_accuracy
                        ))
                    };
                    for (summary, _) in pipeline::cmd_eval(&cfg, &m, &out, &mut cb)? {
                        summary.reports.iter().for_each(print_report);
                        if let Some(d) = summary.delta_eer {
                            println!("{} delta EER (chronological - random): {d:.4}", summary.model.name());
                        }
                    }
                }
            }
            println!("reports -> {}", out.display());
        }
        Command::Bench { common, traces, model_file, n, out } => {
            let cfg = load_config(&common)?;
            let mut model = pipeline::load_trained(&model_file)?;
            let table = pipeline::cmd_bench(&traces, &mut model, n.unwrap_or(cfg.bench.n_probes))?;
            pipeline::write_latency(&out, &table)?;
            print_latency(&table);
        }
        Command::RunAll { common, out } => {
            let cfg = load_config(&common)?;
            let run = pipeline::cmd_run_all(&cfg, &out, &mut log)?;
            for s in &run.summaries {
                s.reports.iter().for_each(print_report);
                if let Some(d) = s.delta_eer {
                    println!("{} delta EER (chronological - random): {d:.4}", s.model.name());
                }
            }
            if let Some(t) = &run.latency {
                print_latency(t);
            }
            println!("artifacts -> {}", out.display());
        }
    }
    Ok(())
}

fn print_latency(t: &srspla::eval::LatencyTable) {
    println!("{:<14}{:>12}{:>12}", "stage", "mean_us", "max_us");
    for s in &t.stages {
        println!("{:<14}{:>12.1}{:>12.1}", s.stage, s.mean_us, s.max_us);
    }
    println!("{:<14}{:>12.1}", "total", t.total_mean_us);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}


use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use systole::classify::{ClassWeight, Task};
use systole::losses::LossKind;
use systole_cli::commands::{
    cmd_classify, cmd_gen, cmd_hrv, cmd_infer, cmd_train, ClassifyOptions, HrvOptions, InferOptions, PeakMethod,
    Protocol, TrainOptions,
};
use systole_cli::pipeline::{self, ExperimentConfig};
use systole_cli::{config, curves};
use systole::synth::CorpusConfig;

#[derive(Parser)]
#[command(name = "systole", version, about = "Peak estimation, HRV features and arrhythmia classification on synthetic pulse data")]
struct Cli {
    /// Root seed; every random stage of the command derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Train the peak estimator.
    Train(TrainArgs),
    /// Detect peaks on a clip or a corpus.
    Infer(InferArgs),
    /// HRV feature table from peak files.
    Hrv(HrvArgs),
    /// Cross-validated classification of a feature table.
    Classify(ClassifyArgs),
    /// Shift and sharpness sweeps of the four losses.
    LossCurves,
    /// End-to-end clip-length experiment.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize)]
struct CorpusFlags {
    /// Comma-separated classes (healthy, sr, af, afl).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long = "subjects")]
    n_subjects_per_class: Option<usize>,
    #[arg(long = "clips")]
    clips_per_subject: Option<usize>,
    #[arg(long = "duration")]
    duration_s: Option<f64>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long = "rate")]
    rate_hz: Option<f64>,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    corpus: CorpusFlags,
}

#[derive(Args, Serialize)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long = "batch")]
    batch_size: Option<usize>,
    #[arg(long = "loss", value_parser = parse_loss)]
    loss_kind: Option<LossKind>,
    #[arg(long = "window")]
    clip_len_samples: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus; generated in memory when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Annotated corpus used to report held-out IBI error.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long)]
    stride: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    corpus_flags: CorpusFlags,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Clip file or corpus directory.
    #[arg(long)]
    input: Option<PathBuf>,
    /// peaknet or bandpass.
    #[arg(long, value_parser = parse_method)]
    method: Option<PeakMethod>,
}

#[derive(Args)]
struct HrvArgs {
    #[arg(long)]
    peaks_dir: Option<PathBuf>,
    /// Window length in seconds; whole clips when omitted.
    #[arg(long)]
    segment: Option<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    /// af-vs-healthy, af-vs-sr or afl-vs-sr.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    folds: Option<usize>,
    /// Repeated subject hold-out instead of k-fold.
    #[arg(long)]
    holdout: bool,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    balanced: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Evaluation corpus; generated in memory when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Trained checkpoint; a model is trained when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated clip lengths in seconds.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<f64>>,
    #[arg(long)]
    folds: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    serde_json::from_value(Value::String(s.to_lowercase())).map_err(|_| format!("unknown loss '{s}'"))
}

fn parse_method(s: &str) -> Result<PeakMethod, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown method '{s}'"))
}

fn run(cli: Cli) -> Result<()> {
    let file = config::load(cli.config.as_deref())?;
    let quiet = cli.quiet || file.get("quiet").and_then(Value::as_bool).unwrap_or(false);
    systole_cli::set_quiet(quiet);
    let seed = cli.seed.or_else(|| file.get("seed").and_then(Value::as_u64));
    let out = cli
        .out
        .or_else(|| file.get("out").and_then(Value::as_str).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Gen(a) => {
            let mut flags = serde_json::to_value(&a)?;
            flags["seed"] = json!(seed);
            let cfg: CorpusConfig = config::resolve(file.get("gen"), &flags)?;
            cmd_gen(&cfg, &out)
        }
        Command::Train(a) => {
            let flags = json!({
                "corpus": a.corpus,
                "validation": a.validation,
                "window_stride": a.stride,
                "seed": seed,
                "train": a.train,
                "corpus_config": a.corpus_flags,
            });
            let opts: TrainOptions = config::resolve(file.get("train"), &flags)?;
            cmd_train(&opts, &out).map(|_| ())
        }
        Command::Infer(a) => {
            let flags = json!({ "model": a.model, "input": a.input, "method": a.method });
            let opts: InferOptions = config::resolve(file.get("infer"), &flags)?;
            cmd_infer(&opts, &out).map(|_| ())
        }
        Command::Hrv(a) => {
            let flags = json!({ "peaks_dir": a.peaks_dir, "segment_s": a.segment });
            let opts: HrvOptions = config::resolve(file.get("hrv"), &flags)?;
            cmd_hrv(&opts, &out).map(|_| ())
        }
        Command::Classify(a) => {
            let flags = json!({
                "features": a.features,
                "task": a.task,
                "folds": a.folds,
                "repeats": a.repeats,
                "protocol": a.holdout.then_some(Protocol::Holdout),
                "class_weight": a.balanced.then_some(ClassWeight::Balanced),
                "seed": seed,
            });
            let opts: ClassifyOptions = config::resolve(file.get("classify"), &flags)?;
            cmd_classify(&opts, &out).map(|_| ())
        }
        Command::LossCurves => {
            let output = curves::cmd_loss_curves(&out)?;
            let checks = &output.checks;
            systole_cli::log(&format!("curve checks: {}", if checks.all_pass() { "all pass" } else { "FAILED" }));
            anyhow::ensure!(checks.all_pass(), "loss-curve self-check failed: {checks:?}");
            Ok(())
        }
        Command::Pipeline(a) => {
            let flags = json!({
                "corpus": a.corpus,
                "model": a.model,
                "clip_lengths_s": a.lengths,
                "folds": a.folds,
                "seed": seed,
                "train": a.train,
            });
            let cfg: ExperimentConfig = config::resolve(file.get("pipeline"), &flags)?;
            let result = pipeline::run(&cfg, &systole_cli::log)?;
            pipeline::write_outputs(&result, &cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

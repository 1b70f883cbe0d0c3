//! End-to-end experiment: train (or load) the peak estimator, infer peaks on
//! every evaluation clip, cut the peak trains into windows of each clip
//! length, extract HRV features and classify each task.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use systole::classify::{cross_validate_with, repeated_holdout, CvReport, Dataset, FitOptions, HoldoutReport, Task};
use systole::hrv::{extract, table, HRVVector};
use systole::peaknet::{infer_peaks, train, train_windows, Checkpoint, EncoderParams, TrainConfig, TrainSample};
use systole::rng::{derive_seed, tag};
use systole::signals::io::ClipFile;
use systole::signals::{detect_peaks, hr_metrics, ibi_from_peaks, ibi_metrics, PeakTrain, SampledSeries};
use systole::synth::{generate_corpus, load_corpus, CorpusConfig};

pub const DEFAULT_CLIP_LENGTHS_S: [f64; 5] = [10.0, 20.0, 30.0, 60.0, 120.0];
pub const DEFAULT_WINDOW_STRIDE: usize = 256;
/// Flutter protocol: subjects per class drawn for training, and repeats.
pub const HOLDOUT_TRAIN_PER_CLASS: usize = 6;
pub const HOLDOUT_REPEATS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Evaluation corpus on disk; generated in memory from `corpus_config` when absent.
    pub corpus: Option<PathBuf>,
    pub corpus_config: CorpusConfig,
    /// Trained checkpoint; when absent a model is trained on a separate corpus.
    pub model: Option<PathBuf>,
    /// Training corpus layout; its seed is replaced by one derived from `seed`.
    pub train_corpus_config: CorpusConfig,
    pub train: TrainConfig,
    pub window_stride: usize,
    pub clip_lengths_s: Vec<f64>,
    pub folds: usize,
    pub tasks: Vec<Task>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            corpus_config: CorpusConfig::default(),
            model: None,
            train_corpus_config: CorpusConfig::default(),
            train: TrainConfig::default(),
            window_stride: DEFAULT_WINDOW_STRIDE,
            clip_lengths_s: DEFAULT_CLIP_LENGTHS_S.to_vec(),
            folds: 10,
            tasks: Task::ALL.to_vec(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_lengths_s.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            bail!("clip lengths must be positive");
        }
        if self.folds < 2 {
            bail!("need at least 2 folds");
        }
        if let Some(p) = &self.corpus {
            if !p.join("manifest.json").exists() {
                bail!("corpus {} not found (no manifest.json)", p.display());
            }
        }
        if let Some(p) = &self.model {
            if !p.exists() {
                bail!("model {} not found", p.display());
            }
        }
        Ok(())
    }

    pub fn train_seed(&self) -> u64 {
        derive_seed(self.seed, &[tag("train")])
    }

    pub fn train_corpus(&self) -> CorpusConfig {
        CorpusConfig { seed: derive_seed(self.seed, &[tag("train-corpus")]), ..self.train_corpus_config.clone() }
    }

    pub fn cv_seed(&self) -> u64 {
        derive_seed(self.seed, &[tag("cv")])
    }
}

pub fn clip_peaks(clip: &ClipFile) -> Result<PeakTrain> {
    clip.peak_train()?.context("clip carries no annotated peaks")
}

pub fn training_set(clips: &[ClipFile], len: usize, stride: usize) -> Result<Vec<TrainSample>> {
    let per_clip: Vec<Vec<TrainSample>> = clips
        .par_iter()
        .map(|c| {
            Ok(train_windows(&c.multi_series()?, &clip_peaks(c)?, c.subject_id.unwrap_or(0), len, stride)?)
        })
        .collect::<Result<_>>()?;
    Ok(per_clip.into_iter().flatten().collect())
}

pub fn infer_all(params: &EncoderParams, clips: &[ClipFile]) -> Result<Vec<PeakTrain>> {
    clips.par_iter().map(|c| Ok(infer_peaks(params, &c.multi_series()?)?)).collect()
}

/// Classic read-out: band-pass peak detection on the channel mean.
pub fn detect_all(clips: &[ClipFile]) -> Result<Vec<PeakTrain>> {
    clips.par_iter().map(|c| Ok(detect_peaks(&c.series()?)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub length_s: f64,
    pub features: Vec<HRVVector>,
    pub n_segments: usize,
    /// Segments whose peaks gave too few intervals for the feature set.
    pub n_failed: usize,
}

/// Non-overlapping windows of `length_s` from the start of each clip; None
/// when the clips are shorter than one window.
pub fn features_at_length(clips: &[ClipFile], peaks: &[PeakTrain], length_s: f64) -> Result<Option<SegmentFeatures>> {
    let mut features = Vec::new();
    let (mut n_segments, mut n_failed) = (0, 0);
    for (clip, train) in clips.iter().zip(peaks) {
        let len = (length_s * clip.rate_hz).round() as usize;
        if len == 0 || len > clip.values.len() {
            continue;
        }
        let label = clip.label.clone().unwrap_or_else(|| "unknown".into());
        for k in 0..clip.values.len() / len {
            n_segments += 1;
            let window = train.window(k * len, len);
            match ibi_from_peaks(&window).and_then(|ibi| extract(&ibi, &label, clip.subject_id.unwrap_or(0))) {
                Ok(v) => features.push(v),
                Err(_) => n_failed += 1,
            }
        }
    }
    Ok((n_segments > 0).then_some(SegmentFeatures { length_s, features, n_segments, n_failed }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Evaluation {
    KFold(CvReport),
    Holdout(HoldoutReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: Task,
    pub length_s: f64,
    pub protocol: String,
    pub n_samples: usize,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

/// k-fold CV for the AF tasks, repeated 6+6 hold-out for flutter.
pub fn evaluate_task(features: &[HRVVector], task: Task, folds: usize, seed: u64) -> Result<Evaluation> {
    let rows = task.select(features);
    let data = Dataset::from_features(&rows, task.positive_label());
    let opts = FitOptions::default();
    Ok(match task {
        Task::AflVsSr => Evaluation::Holdout(repeated_holdout(
            &data,
            HOLDOUT_TRAIN_PER_CLASS,
            HOLDOUT_TRAIN_PER_CLASS,
            HOLDOUT_REPEATS,
            seed,
            &opts,
        )?),
        _ => Evaluation::KFold(cross_validate_with(&data, folds, seed, &opts)?),
    })
}

pub fn metric_row(task: Task, length_s: f64, eval: &Evaluation) -> MetricRow {
    match eval {
        Evaluation::KFold(r) => MetricRow {
            task,
            length_s,
            protocol: format!("{}-fold", r.k),
            n_samples: r.n_samples,
            accuracy: r.pooled.accuracy,
            sensitivity: r.pooled.sensitivity,
            specificity: r.pooled.specificity,
            f1: r.pooled.f1,
            auc: r.pooled.auc,
        },
        Evaluation::Holdout(r) => MetricRow {
            task,
            length_s,
            protocol: format!("holdout-x{}", r.repeats),
            n_samples: r.runs.iter().map(|f| f.confusion.total()).sum::<usize>() / r.repeats.max(1),
            accuracy: r.mean.accuracy,
            sensitivity: r.mean.sensitivity,
            specificity: r.mean.specificity,
            f1: r.mean.f1,
            auc: r.mean.auc,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub method: String,
    pub class: String,
    pub n_clips: usize,
    /// Clips without two usable predicted intervals; left out of every column.
    pub n_failed: usize,
    pub hr_mae_bpm: Option<f64>,
    pub hr_rmse_bpm: Option<f64>,
    pub hr_pearson_r: Option<f64>,
    pub ibi_ae_ms: Option<f64>,
    pub ac_ibi: Option<f64>,
}

/// HR and IBI errors of predicted against annotated peaks, per class and pooled.
pub fn error_rows(method: &str, clips: &[ClipFile], peaks: &[PeakTrain]) -> Result<Vec<ErrorRow>> {
    struct ClipErr {
        class: String,
        hr: Option<(f64, f64)>,
        ibi: Option<(f64, f64)>,
    }
    let mut per_clip = Vec::new();
    for (clip, pred) in clips.iter().zip(peaks) {
        let truth = ibi_from_peaks(&clip_peaks(clip)?)?;
        let clip_len_s = clip.values.len() as f64 / clip.rate_hz;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (hr, ibi) = match ibi_from_peaks(pred) {
            Ok(p) if p.len() >= 2 => (
                Some((60000.0 / mean(p.intervals_ms()), 60000.0 / mean(truth.intervals_ms()))),
                ibi_metrics(&p, &truth, clip_len_s).ok().map(|m| (m.ae_ms, m.ac_ibi)),
            ),
            _ => (None, None),
        };
        per_clip.push(ClipErr { class: clip.label.clone().unwrap_or_else(|| "unknown".into()), hr, ibi });
    }
    let mut classes: Vec<String> = per_clip.iter().map(|c| c.class.clone()).collect();
    classes.sort();
    classes.dedup();
    classes.push("all".into());
    Ok(classes
        .into_iter()
        .map(|class| {
            let rows: Vec<&ClipErr> = per_clip.iter().filter(|c| class == "all" || c.class == class).collect();
            let ok: Vec<&ClipErr> = rows.iter().copied().filter(|c| c.hr.is_some() && c.ibi.is_some()).collect();
            let (pred_hr, true_hr): (Vec<f64>, Vec<f64>) = ok.iter().map(|c| c.hr.unwrap()).unzip();
            let hr = hr_metrics(&pred_hr, &true_hr).ok();
            let avg = |f: fn(&ClipErr) -> f64| (!ok.is_empty()).then(|| ok.iter().map(|c| f(c)).sum::<f64>() / ok.len() as f64);
            ErrorRow {
                method: method.to_string(),
                class,
                n_clips: rows.len(),
                n_failed: rows.len() - ok.len(),
                hr_mae_bpm: hr.map(|h| h.mae_bpm).or_else(|| {
                    systole::signals::mae_rmse(&pred_hr, &true_hr).ok().map(|m| m.0)
                }),
                hr_rmse_bpm: hr.map(|h| h.rmse_bpm).or_else(|| {
                    systole::signals::mae_rmse(&pred_hr, &true_hr).ok().map(|m| m.1)
                }),
                hr_pearson_r: hr.map(|h| h.pearson_r),
                ibi_ae_ms: avg(|c| c.ibi.unwrap().0),
                ac_ibi: avg(|c| c.ibi.unwrap().1),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthOutcome {
    pub length_s: f64,
    pub n_segments: usize,
    pub n_failed: usize,
    pub tasks: BTreeMap<String, Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub train_wall_clock_s: Option<f64>,
    pub total_wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub config_hash: String,
    pub versions: serde_json::Value,
    pub config: ExperimentConfig,
    pub train_epoch_losses: Option<Vec<f64>>,
    pub metric_table: Vec<MetricRow>,
    pub error_table: Vec<ErrorRow>,
    pub lengths: Vec<LengthOutcome>,
    /// Requested lengths longer than the evaluation clips.
    pub skipped_lengths_s: Vec<f64>,
    /// Timing only; excluded from the reproducibility contract.
    pub metadata: RunMetadata,
}

pub struct PipelineRun {
    pub report: PipelineReport,
    pub params: EncoderParams,
    pub features: Vec<SegmentFeatures>,
    pub eval_peaks: Vec<PeakTrain>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn load_eval_clips(cfg: &ExperimentConfig) -> Result<Vec<ClipFile>> {
    Ok(match &cfg.corpus {
        Some(root) => load_corpus(root)?.1.into_iter().map(|c| c.clip).collect(),
        None => generate_corpus(&cfg.corpus_config)?.1,
    })
}

pub fn run(cfg: &ExperimentConfig, log: &dyn Fn(&str)) -> Result<PipelineRun> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix_s = unix_now();
    let clips = load_eval_clips(cfg)?;
    log(&format!("evaluation corpus: {} clips", clips.len()));

    let (params, epoch_losses, train_wall) = match &cfg.model {
        Some(path) => (Checkpoint::read(path)?.params()?, None, None),
        None => {
            let train_clips = generate_corpus(&cfg.train_corpus())?.1;
            let tcfg = TrainConfig { seed: cfg.train_seed(), ..cfg.train.clone() };
            let data = training_set(&train_clips, tcfg.clip_len_samples, cfg.window_stride)?;
            log(&format!("training on {} windows, {} epochs, {} loss", data.len(), tcfg.epochs, tcfg.loss_kind));
            let (p, rec) = train(&data, &tcfg)?;
            (p, Some(rec.epoch_losses), Some(rec.wall_clock_s))
        }
    };

    let eval_peaks = infer_all(&params, &clips)?;
    let mut error_table = error_rows("peaknet", &clips, &eval_peaks)?;
    error_table.extend(error_rows("bandpass-detector", &clips, &detect_all(&clips)?)?);

    let mut lengths = Vec::new();
    let mut metric_table = Vec::new();
    let mut skipped = Vec::new();
    let mut all_features = Vec::new();
    for &length_s in &cfg.clip_lengths_s {
        let Some(seg) = features_at_length(&clips, &eval_peaks, length_s)? else {
            log(&format!("{length_s} s: longer than the clips, skipped"));
            skipped.push(length_s);
            continue;
        };
        let mut tasks = BTreeMap::new();
        for &task in &cfg.tasks {
            let eval = evaluate_task(&seg.features, task, cfg.folds, cfg.cv_seed())
                .with_context(|| format!("{task} at {length_s} s"))?;
            let row = metric_row(task, length_s, &eval);
            log(&format!("{length_s:>5} s {task:<14} accuracy {:.3}", row.accuracy));
            metric_table.push(row);
            tasks.insert(task.name().to_string(), eval);
        }
        lengths.push(LengthOutcome { length_s, n_segments: seg.n_segments, n_failed: seg.n_failed, tasks });
        all_features.push(seg);
    }

    let report = PipelineReport {
        seed: cfg.seed,
        config_hash: crate::config_hash(cfg)?,
        versions: crate::versions(),
        config: cfg.clone(),
        train_epoch_losses: epoch_losses,
        metric_table,
        error_table,
        lengths,
        skipped_lengths_s: skipped,
        metadata: RunMetadata {
            started_unix_s,
            finished_unix_s: unix_now(),
            train_wall_clock_s: train_wall,
            total_wall_clock_s: started.elapsed().as_secs_f64(),
        },
    };
    Ok(PipelineRun { report, params, features: all_features, eval_peaks })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_outputs(run: &PipelineRun, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    crate::write_json(&out_dir.join("report.json"), &run.report)?;
    if cfg.model.is_none() {
        Checkpoint::new(&run.params, cfg.train_seed(), cfg.train.loss_kind).write(&out_dir.join("model.json"))?;
    }
    let mut w = csv::Writer::from_path(out_dir.join("clip_length_metrics.csv"))?;
    w.write_record(["task", "length_s", "protocol", "n_samples", "accuracy", "sensitivity", "specificity", "f1", "auc"])?;
    for r in &run.report.metric_table {
        w.write_record([
            r.task.name().to_string(),
            r.length_s.to_string(),
            r.protocol.clone(),
            r.n_samples.to_string(),
            r.accuracy.to_string(),
            opt(r.sensitivity),
            opt(r.specificity),
            opt(r.f1),
            opt(r.auc),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out_dir.join("error_table.csv"))?;
    w.write_record(["method", "class", "n_clips", "n_failed", "hr_mae_bpm", "hr_rmse_bpm", "hr_pearson_r", "ibi_ae_ms", "ac_ibi"])?;
    for r in &run.report.error_table {
        w.write_record([
            r.method.clone(),
            r.class.clone(),
            r.n_clips.to_string(),
            r.n_failed.to_string(),
            opt(r.hr_mae_bpm),
            opt(r.hr_rmse_bpm),
            opt(r.hr_pearson_r),
            opt(r.ibi_ae_ms),
            opt(r.ac_ibi),
        ])?;
    }
    w.flush()?;
    for seg in &run.features {
        let f = std::fs::File::create(out_dir.join(format!("features_{}s.csv", seg.length_s)))?;
        table::write_csv(&seg.features, f)?;
    }
    Ok(())
}

/// Channel-mean series of a clip, for commands that need a single trace.
pub fn mean_series(clip: &ClipFile) -> Result<SampledSeries> {
    Ok(clip.series()?)
}

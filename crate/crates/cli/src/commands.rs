//! Per-command option sets and their implementations. Each option struct is
//! what a config-file section deserializes into.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use systole::classify::{
    cross_validate_with, fit_dataset, repeated_holdout, ClassWeight, Dataset, FitOptions, Task,
};
use systole::hrv::{extract, table, HRVVector};
use systole::peaknet::{evaluate_ibi, infer_peaks, train, Checkpoint, TrainConfig, ValidationStats};
use systole::rng::{derive_seed, tag};
use systole::signals::io::ClipFile;
use systole::signals::{detect_peaks, ibi_from_peaks, PeakTrain};
use systole::synth::{gen_corpus, generate_corpus, load_corpus, CorpusConfig};
use walkdir::WalkDir;

use crate::peaks_file::PeaksFile;
use crate::pipeline::{clip_peaks, training_set, Evaluation, DEFAULT_WINDOW_STRIDE};
use crate::write_json;

pub fn cmd_gen(cfg: &CorpusConfig, out: &Path) -> Result<()> {
    let m = gen_corpus(out, cfg)?;
    crate::log(&format!("wrote {} clips to {}", m.clips.len(), out.display()));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    /// Training corpus on disk; generated from `corpus_config` when absent.
    pub corpus: Option<PathBuf>,
    pub corpus_config: CorpusConfig,
    /// Optional corpus whose annotated peaks score the trained model.
    pub validation: Option<PathBuf>,
    pub train: TrainConfig,
    pub window_stride: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            corpus: None,
            corpus_config: CorpusConfig::default(),
            validation: None,
            train: TrainConfig::default(),
            window_stride: DEFAULT_WINDOW_STRIDE,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub config_hash: String,
    pub versions: serde_json::Value,
    pub options: TrainOptions,
    pub n_windows: usize,
    pub epoch_losses: Vec<f64>,
    pub validation: Option<ValidationStats>,
    /// Timing only; excluded from the reproducibility contract.
    pub wall_clock_s: f64,
}

fn corpus_clips(root: Option<&Path>, cfg: &CorpusConfig, seed: u64) -> Result<Vec<ClipFile>> {
    Ok(match root {
        Some(r) => load_corpus(r)?.1.into_iter().map(|c| c.clip).collect(),
        None => generate_corpus(&CorpusConfig { seed, ..cfg.clone() })?.1,
    })
}

pub fn cmd_train(opts: &TrainOptions, out: &Path) -> Result<TrainSummary> {
    let clips = corpus_clips(opts.corpus.as_deref(), &opts.corpus_config, derive_seed(opts.seed, &[tag("train-corpus")]))?;
    let tcfg = TrainConfig { seed: derive_seed(opts.seed, &[tag("train")]), ..opts.train.clone() };
    let data = training_set(&clips, tcfg.clip_len_samples, opts.window_stride)?;
    crate::log(&format!("training on {} windows, {} epochs, {} loss", data.len(), tcfg.epochs, tcfg.loss_kind));
    let (params, rec) = train(&data, &tcfg)?;
    let validation = match &opts.validation {
        Some(root) => {
            let (_, val) = load_corpus(root)?;
            let pairs = val
                .iter()
                .map(|c| Ok((c.clip.multi_series()?, clip_peaks(&c.clip)?)))
                .collect::<Result<Vec<_>>>()?;
            Some(evaluate_ibi(&params, &pairs)?)
        }
        None => None,
    };
    std::fs::create_dir_all(out)?;
    Checkpoint::new(&params, tcfg.seed, tcfg.loss_kind).write(&out.join("model.json"))?;
    let summary = TrainSummary {
        seed: opts.seed,
        config_hash: crate::config_hash(opts)?,
        versions: crate::versions(),
        options: opts.clone(),
        n_windows: data.len(),
        epoch_losses: rec.epoch_losses,
        validation,
        wall_clock_s: rec.wall_clock_s,
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakMethod {
    #[default]
    Peaknet,
    Bandpass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InferOptions {
    pub model: Option<PathBuf>,
    /// A clip file or a corpus directory.
    pub input: Option<PathBuf>,
    pub method: PeakMethod,
}

/// Writes one peaks file per clip, mirroring the corpus layout; returns the
/// number of clips processed.
pub fn cmd_infer(opts: &InferOptions, out: &Path) -> Result<usize> {
    let input = opts.input.as_deref().context("infer needs --input")?;
    let params = match opts.method {
        PeakMethod::Peaknet => {
            let model = opts.model.as_deref().context("peaknet inference needs --model")?;
            Some(Checkpoint::read(model)?.params()?)
        }
        PeakMethod::Bandpass => None,
    };
    let jobs: Vec<(PathBuf, ClipFile)> = if input.is_dir() {
        load_corpus(input)?
            .1
            .into_iter()
            .map(|c| (PathBuf::from(&c.entry.path), c.clip))
            .collect()
    } else {
        let name = input.file_name().context("input has no file name")?;
        vec![(PathBuf::from(name), ClipFile::read(input)?)]
    };
    let results: Vec<(PathBuf, PeaksFile)> = jobs
        .par_iter()
        .map(|(rel, clip)| {
            let train = match &params {
                Some(p) => infer_peaks(p, &clip.multi_series()?)?,
                None => detect_peaks(&clip.series()?)?,
            };
            Ok((rel.clone(), PeaksFile::from_train(&train, clip)))
        })
        .collect::<Result<_>>()?;
    for (rel, peaks) in &results {
        write_json(&out.join(rel), peaks)?;
    }
    crate::log(&format!("wrote {} peak files to {}", results.len(), out.display()));
    Ok(results.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct HrvOptions {
    /// Directory of peaks files (or annotated clip files), searched recursively.
    pub peaks_dir: Option<PathBuf>,
    /// Cut each peak train into non-overlapping windows of this length.
    pub segment_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrvSummary {
    pub n_files: usize,
    pub n_segments: usize,
    pub n_rows: usize,
    pub n_failed: usize,
}

fn peak_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy();
        if entry.file_type().is_file() && name.ends_with(".json") && name != "manifest.json" {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn segments(train: &PeakTrain, segment_s: Option<f64>) -> Result<Vec<PeakTrain>> {
    let Some(len_s) = segment_s else {
        return Ok(vec![train.clone()]);
    };
    if !(len_s > 0.0) {
        bail!("segment length must be positive");
    }
    let len = (len_s * train.rate_hz()).round() as usize;
    if len == 0 {
        return Ok(Vec::new());
    }
    Ok((0..train.clip_len() / len).map(|k| train.window(k * len, len)).collect())
}

pub fn cmd_hrv(opts: &HrvOptions, out: &Path) -> Result<HrvSummary> {
    let root = opts.peaks_dir.as_deref().context("hrv needs --peaks-dir")?;
    let files = peak_files(root)?;
    if files.is_empty() {
        bail!("no peak files under {}", root.display());
    }
    let mut rows: Vec<HRVVector> = Vec::new();
    let (mut n_segments, mut n_failed) = (0, 0);
    for path in &files {
        let pf = PeaksFile::read_any(path)?;
        let label = pf.label.clone().unwrap_or_else(|| "unknown".into());
        for seg in segments(&pf.peak_train()?, opts.segment_s)? {
            n_segments += 1;
            match ibi_from_peaks(&seg).and_then(|ibi| extract(&ibi, &label, pf.subject_id.unwrap_or(0))) {
                Ok(v) => rows.push(v),
                Err(_) => n_failed += 1,
            }
        }
    }
    std::fs::create_dir_all(out)?;
    let f = std::fs::File::create(out.join("features.csv"))?;
    table::write_csv(&rows, f)?;
    let summary = HrvSummary { n_files: files.len(), n_segments, n_rows: rows.len(), n_failed };
    write_json(&out.join("hrv_summary.json"), &summary)?;
    crate::log(&format!("{} feature rows from {} files ({} segments failed)", rows.len(), files.len(), n_failed));
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    Kfold,
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub features: Option<PathBuf>,
    pub task: Task,
    pub protocol: Protocol,
    pub folds: usize,
    /// Hold-out: training subjects drawn per class, and repeats.
    pub train_per_class: usize,
    pub repeats: usize,
    pub class_weight: ClassWeight,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            features: None,
            task: Task::AfVsSr,
            protocol: Protocol::Kfold,
            folds: 10,
            train_per_class: crate::pipeline::HOLDOUT_TRAIN_PER_CLASS,
            repeats: crate::pipeline::HOLDOUT_REPEATS,
            class_weight: ClassWeight::None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub seed: u64,
    pub config_hash: String,
    pub versions: serde_json::Value,
    pub options: ClassifyOptions,
    pub evaluation: Evaluation,
}

pub fn cmd_classify(opts: &ClassifyOptions, out: &Path) -> Result<ClassifyReport> {
    let path = opts.features.as_deref().context("classify needs --features")?;
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = table::read_csv(f)?;
    let selected = opts.task.select(&rows);
    let data = Dataset::from_features(&selected, opts.task.positive_label());
    let fit = FitOptions {
        class_weight: opts.class_weight,
        seed: derive_seed(opts.seed, &[tag("inner")]),
        ..FitOptions::default()
    };
    let cv_seed = derive_seed(opts.seed, &[tag("cv")]);
    let evaluation = match opts.protocol {
        Protocol::Kfold => Evaluation::KFold(cross_validate_with(&data, opts.folds, cv_seed, &fit)?),
        Protocol::Holdout => Evaluation::Holdout(repeated_holdout(
            &data,
            opts.train_per_class,
            opts.train_per_class,
            opts.repeats,
            cv_seed,
            &fit,
        )?),
    };
    let model = fit_dataset(&data, &fit)?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("model.json"), &model)?;
    let report = ClassifyReport {
        seed: opts.seed,
        config_hash: crate::config_hash(opts)?,
        versions: crate::versions(),
        options: opts.clone(),
        evaluation,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

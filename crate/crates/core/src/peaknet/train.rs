use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{backward, infer_peaks, toy_architecture, EncoderParams, Padding};
use crate::losses::LossKind;
use crate::rng::{derive_seed, stream, tag};
use crate::signals::{binarize, ibi_from_peaks, ibi_metrics, normalize_to_prob, MultiSeries, PeakTrain, ProbSeries};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainSample {
    /// Channel-standardized input window.
    pub input: MultiSeries,
    pub target: ProbSeries,
    pub subject_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub clip_len_samples: usize,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 4,
            loss_kind: LossKind::Ws,
            seed: 42,
            clip_len_samples: 512,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    /// 45 epochs at learning rate 1e-4.
    pub fn slow_schedule() -> Self {
        Self { epochs: 45, learning_rate: 1e-4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.clip_len_samples == 0 {
            return Err(Error::Domain("epochs, batch size and clip length must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Domain(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Mean per-sample training loss of each epoch, taken before each update.
    pub epoch_losses: Vec<f64>,
    pub validation_ibi_mae_ms: Option<f64>,
    /// Not covered by the determinism contract.
    pub wall_clock_s: f64,
}

/// Per-channel z-score over the whole clip; flat channels are only centred.
pub fn standardize_channels(clip: &MultiSeries) -> Result<MultiSeries> {
    let channels = clip
        .channels()
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            c.iter().map(|v| (v - mean) / sd).collect()
        })
        .collect();
    MultiSeries::new(channels, clip.rate_hz())
}

/// Standardize the clip, cut `len`-sample windows every `stride` samples (plus
/// one flush with the end), and pair each with its normalized peak train.
/// Windows without a peak are skipped.
pub fn train_windows(
    clip: &MultiSeries,
    peaks: &PeakTrain,
    subject_id: u64,
    len: usize,
    stride: usize,
) -> Result<Vec<TrainSample>> {
    if clip.len() < len || stride == 0 {
        return Err(Error::TooShort { needed: len, got: clip.len() });
    }
    let z = standardize_channels(clip)?;
    let last = clip.len() - len;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if *starts.last().unwrap() != last {
        starts.push(last);
    }
    let mut out = Vec::new();
    for s in starts {
        let w = peaks.window(s, len);
        if w.is_empty() {
            continue;
        }
        out.push(TrainSample {
            input: z.slice(s, len)?,
            target: normalize_to_prob(&binarize(&w)?)?,
            subject_id,
        });
    }
    Ok(out)
}

fn check_dataset(dataset: &[TrainSample], cfg: &TrainConfig) -> Result<()> {
    let first = dataset.first().ok_or_else(|| Error::InsufficientData("empty training set".into()))?;
    for s in dataset {
        if s.input.len() != cfg.clip_len_samples || s.target.len() != cfg.clip_len_samples {
            return Err(Error::Shape(format!(
                "sample length {} differs from configured clip length {}",
                s.input.len(),
                cfg.clip_len_samples
            )));
        }
        if s.input.n_channels() != first.input.n_channels() {
            return Err(Error::Shape("samples disagree on channel count".into()));
        }
    }
    Ok(())
}

/// Toy architecture with the dataset's channel count, seeded from `cfg.seed`.
pub fn train(dataset: &[TrainSample], cfg: &TrainConfig) -> Result<(EncoderParams, TrainRecord)> {
    cfg.validate()?;
    check_dataset(dataset, cfg)?;
    let mut arch = toy_architecture();
    arch[0].in_ch = dataset[0].input.n_channels();
    let init = EncoderParams::init(&arch, Padding::Zero, derive_seed(cfg.seed, &[tag("init")]))?;
    train_from(init, dataset, cfg)
}

/// Minibatch SGD with momentum (v = m v + g, θ -= lr v) starting at `params`.
/// Per-sample gradients are computed in parallel and summed in batch order.
pub fn train_from(
    mut params: EncoderParams,
    dataset: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(EncoderParams, TrainRecord)> {
    cfg.validate()?;
    check_dataset(dataset, cfg)?;
    let started = Instant::now();
    let mut velocity = params.zeros_like();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, &[tag("shuffle"), epoch as u64]));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, EncoderParams)> = batch
                .par_iter()
                .map(|&i| backward(&params, &dataset[i].input, &dataset[i].target, cfg.loss_kind))
                .collect::<Result<_>>()?;
            let mut grad = params.zeros_like();
            for (loss, g) in &results {
                loss_sum += loss;
                grad.axpy(1.0, g);
            }
            grad.scale(1.0 / batch.len() as f64);
            velocity.scale(cfg.momentum);
            velocity.axpy(1.0, &grad);
            params.axpy(-cfg.learning_rate, &velocity);
        }
        let mean = loss_sum / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::DegenerateTraining(format!("loss diverged at epoch {}", epoch + 1)));
        }
        epoch_losses.push(mean);
    }
    Ok((
        params,
        TrainRecord { epoch_losses, validation_ibi_mae_ms: None, wall_clock_s: started.elapsed().as_secs_f64() },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationStats {
    /// Mean per-clip IBI absolute error over the clips that produced one.
    pub ibi_mae_ms: Option<f64>,
    pub ac_ibi: Option<f64>,
    /// Fraction of true peaks with a predicted peak within the tolerance.
    pub peak_recall: f64,
    pub n_clips: usize,
    /// Clips whose prediction held fewer than two valid intervals.
    pub n_failed: usize,
}

/// One-to-one greedy matching of true peaks to predicted peaks within `tol` samples.
pub fn peak_recall(pred: &PeakTrain, truth: &PeakTrain, tol: usize) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let mut used = vec![false; pred.len()];
    let mut hits = 0;
    for &t in truth.indices() {
        let best = pred
            .indices()
            .iter()
            .enumerate()
            .filter(|(k, &p)| !used[*k] && p.abs_diff(t) <= tol)
            .min_by_key(|(_, &p)| p.abs_diff(t));
        if let Some((k, _)) = best {
            used[k] = true;
            hits += 1;
        }
    }
    hits as f64 / truth.len() as f64
}

/// Infer peaks on whole clips and compare the IBI curves with the truth.
pub fn evaluate_ibi(params: &EncoderParams, clips: &[(MultiSeries, PeakTrain)]) -> Result<ValidationStats> {
    let per_clip: Vec<(Option<(f64, f64)>, f64)> = clips
        .par_iter()
        .map(|(clip, truth)| {
            let pred = infer_peaks(params, clip)?;
            let recall = peak_recall(&pred, truth, 3);
            let clip_len_s = clip.len() as f64 / clip.rate_hz();
            let truth_ibi = ibi_from_peaks(truth)?;
            let metrics = ibi_from_peaks(&pred)
                .and_then(|p| ibi_metrics(&p, &truth_ibi, clip_len_s))
                .ok()
                .map(|m| (m.ae_ms, m.ac_ibi));
            Ok((metrics, recall))
        })
        .collect::<Result<_>>()?;
    let ok: Vec<(f64, f64)> = per_clip.iter().filter_map(|(m, _)| *m).collect();
    let mean = |f: fn(&(f64, f64)) -> f64| (!ok.is_empty()).then(|| ok.iter().map(f).sum::<f64>() / ok.len() as f64);
    Ok(ValidationStats {
        ibi_mae_ms: mean(|m| m.0),
        ac_ibi: mean(|m| m.1),
        peak_recall: per_clip.iter().map(|(_, r)| r).sum::<f64>() / per_clip.len().max(1) as f64,
        n_clips: clips.len(),
        n_failed: clips.len() - ok.len(),
    })
}

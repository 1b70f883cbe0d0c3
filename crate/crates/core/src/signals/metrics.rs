use serde::{Deserialize, Serialize};

use super::{interpolate_ibi, IBISeries, IBI_RESAMPLE_HZ};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrMetrics {
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub pearson_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbiMetrics {
    pub ae_ms: f64,
    /// Per-clip accuracy, clamped to [0, 1].
    pub ac_ibi: f64,
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Shape(format!(
            "need equal nonzero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean absolute error and root-mean-square error.
pub fn mae_rmse(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    let (abs, sq) = pred
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(a, s), (p, t)| (a + (p - t).abs(), s + (p - t) * (p - t)));
    Ok((abs / n, (sq / n).sqrt()))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn hr_metrics(pred_hr: &[f64], true_hr: &[f64]) -> Result<HrMetrics> {
    let (mae_bpm, rmse_bpm) = mae_rmse(pred_hr, true_hr)?;
    let pearson_r = pearson(pred_hr, true_hr)?;
    Ok(HrMetrics { mae_bpm, rmse_bpm, pearson_r })
}

/// `1 - AE / (T / (B - 1))` with `T` the clip length and `B` the number of
/// true peaks; not clamped.
pub fn ibi_accuracy_raw(ae_ms: f64, clip_len_s: f64, n_true_peaks: usize) -> Result<f64> {
    if n_true_peaks < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 true peaks, got {n_true_peaks}"
        )));
    }
    if !(clip_len_s > 0.0) {
        return Err(Error::Domain(format!("clip length must be > 0, got {clip_len_s}")));
    }
    let mean_interval_ms = clip_len_s * 1000.0 / (n_true_peaks - 1) as f64;
    Ok(1.0 - ae_ms / mean_interval_ms)
}

/// Absolute IBI error on the common 4 Hz grid of the two resampled curves,
/// and the per-clip IBI accuracy.
pub fn ibi_metrics(pred: &IBISeries, truth: &IBISeries, clip_len_s: f64) -> Result<IbiMetrics> {
    if pred.len() < 2 || truth.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 intervals in each series, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let start = pred.onsets_s()[0].max(truth.onsets_s()[0]);
    let end = pred.onsets_s()[pred.len() - 1].min(truth.onsets_s()[truth.len() - 1]);
    if end < start {
        return Err(Error::InsufficientData("IBI curves do not overlap in time".into()));
    }
    let count = ((end - start) * IBI_RESAMPLE_HZ + 1e-9).floor() as usize + 1;
    let total: f64 = (0..count)
        .map(|k| {
            let t = start + k as f64 / IBI_RESAMPLE_HZ;
            (interpolate_ibi(pred, t) - interpolate_ibi(truth, t)).abs()
        })
        .sum();
    let ae_ms = total / count as f64;
    let ac_ibi = ibi_accuracy_raw(ae_ms, clip_len_s, truth.len() + 1)?.clamp(0.0, 1.0);
    Ok(IbiMetrics { ae_ms, ac_ibi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hr_examples() {
        let m = mae_rmse(&[72.0, 80.0], &[70.0, 78.0]).unwrap();
        assert_eq!(m, (2.0, 2.0));
        let m = hr_metrics(&[60.0, 70.0, 80.0], &[62.0, 69.0, 81.0]).unwrap();
        assert!((m.mae_bpm - 4.0 / 3.0).abs() < 1e-12);
        assert!((m.rmse_bpm - 2f64.sqrt()).abs() < 1e-12);
        let same = hr_metrics(&[60.0, 70.0], &[60.0, 70.0]).unwrap();
        assert_eq!((same.mae_bpm, same.rmse_bpm, same.pearson_r), (0.0, 0.0, 1.0));
        assert!(matches!(hr_metrics(&[70.0, 70.0], &[60.0, 65.0]), Err(Error::UndefinedCorrelation)));
        assert!(hr_metrics(&[], &[]).is_err());
    }

    #[test]
    fn ibi_accuracy_examples() {
        let a = ibi_accuracy_raw(100.0, 30.0, 31).unwrap();
        assert!((a - 0.9).abs() < 1e-12);
        let raw = ibi_accuracy_raw(1100.0, 30.0, 31).unwrap();
        assert!((raw + 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_series_are_perfect() {
        let ibi = IBISeries::from_intervals(vec![800.0, 900.0, 850.0, 1000.0]).unwrap();
        let m = ibi_metrics(&ibi, &ibi, 4.0).unwrap();
        assert_eq!(m.ae_ms, 0.0);
        assert_eq!(m.ac_ibi, 1.0);
    }

    #[test]
    fn terrible_prediction_clamps_to_zero() {
        let truth = IBISeries::from_intervals(vec![1000.0; 5]).unwrap();
        let pred = IBISeries::from_intervals(vec![2900.0; 3]).unwrap();
        let m = ibi_metrics(&pred, &truth, 5.0).unwrap();
        assert!(m.ae_ms > 1000.0);
        assert_eq!(m.ac_ibi, 0.0);
    }

    proptest! {
        #[test]
        fn mae_le_rmse(pairs in proptest::collection::vec((40.0f64..180.0, 40.0f64..180.0), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (mae, rmse) = mae_rmse(&p, &t).unwrap();
            prop_assert!(mae <= rmse + 1e-12);
            prop_assert_eq!(mae == 0.0, p == t);
            prop_assert_eq!(rmse == 0.0, p == t);
        }
    }
}

use super::{IBISeries, PeakTrain, SampledSeries};
use crate::{Error, Result};

/// Physiologic validity window for a single interval.
pub const IBI_MIN_MS: f64 = 250.0;
pub const IBI_MAX_MS: f64 = 3000.0;
/// Grid rate used when an IBI curve has to be evenly spaced.
pub const IBI_RESAMPLE_HZ: f64 = 4.0;

/// Intervals between consecutive peaks; out-of-window intervals are dropped
/// together with their onsets.
pub fn ibi_from_peaks(peaks: &PeakTrain) -> Result<IBISeries> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 peaks, got {}",
            peaks.len()
        )));
    }
    let rate = peaks.rate_hz();
    let (intervals, onsets): (Vec<f64>, Vec<f64>) = peaks
        .indices()
        .windows(2)
        .map(|w| ((w[1] - w[0]) as f64 / rate * 1000.0, w[0] as f64 / rate))
        .filter(|(iv, _)| (IBI_MIN_MS..=IBI_MAX_MS).contains(iv))
        .unzip();
    IBISeries::new(intervals, onsets)
}

/// Linear interpolation of the (onset, interval) curve at `t`, clamped to the
/// end values outside the onset range.
pub fn interpolate_ibi(ibi: &IBISeries, t: f64) -> f64 {
    let on = ibi.onsets_s();
    let iv = ibi.intervals_ms();
    if t <= on[0] {
        return iv[0];
    }
    if t >= on[on.len() - 1] {
        return iv[iv.len() - 1];
    }
    let k = on.partition_point(|&o| o <= t) - 1;
    let w = (t - on[k]) / (on[k + 1] - on[k]);
    iv[k] + (iv[k + 1] - iv[k]) * w
}

/// Evenly spaced IBI curve from the first to the last onset.
pub fn resample_ibi(ibi: &IBISeries, rate_hz: f64) -> Result<SampledSeries> {
    if ibi.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 intervals to resample, got {}",
            ibi.len()
        )));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::Domain(format!("resample rate must be > 0, got {rate_hz}")));
    }
    let start = ibi.onsets_s()[0];
    let end = ibi.onsets_s()[ibi.len() - 1];
    let count = ((end - start) * rate_hz + 1e-9).floor() as usize + 1;
    let values = (0..count)
        .map(|k| interpolate_ibi(ibi, start + k as f64 / rate_hz))
        .collect();
    SampledSeries::new(values, rate_hz, start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn train(idx: &[usize]) -> PeakTrain {
        PeakTrain::new(idx.to_vec(), 30.0, 1000).unwrap()
    }

    #[test]
    fn ibi_examples() {
        assert_eq!(ibi_from_peaks(&train(&[0, 30, 60])).unwrap().intervals_ms(), &[1000.0, 1000.0]);
        assert!(ibi_from_peaks(&train(&[0, 6])).unwrap().is_empty());
        assert_eq!(ibi_from_peaks(&train(&[0, 24, 51])).unwrap().intervals_ms(), &[800.0, 900.0]);
        assert!(matches!(ibi_from_peaks(&train(&[4])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn dropped_interval_takes_its_onset() {
        let ibi = ibi_from_peaks(&train(&[0, 30, 33, 60])).unwrap();
        assert_eq!(ibi.intervals_ms(), &[1000.0, 900.0]);
        assert_eq!(ibi.onsets_s(), &[0.0, 1.1]);
    }

    #[test]
    fn resample_examples() {
        let ibi = IBISeries::new(vec![800.0, 1200.0], vec![0.0, 0.8]).unwrap();
        let r = resample_ibi(&ibi, 4.0).unwrap();
        // hand interpolation: 800 + 400 * t / 0.8
        let expected = [800.0, 925.0, 1050.0, 1175.0];
        assert_eq!(r.len(), 4);
        for (v, e) in r.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-9);
        }
        let one = IBISeries::new(vec![800.0], vec![0.0]).unwrap();
        assert!(resample_ibi(&one, 4.0).is_err());
    }

    proptest! {
        #[test]
        fn translation_invariant(gaps in proptest::collection::vec(8usize..90, 2..20), shift in 0usize..300) {
            let mut idx = vec![0usize];
            for g in gaps { idx.push(idx.last().unwrap() + g); }
            let a = ibi_from_peaks(&PeakTrain::new(idx.clone(), 30.0, 5000).unwrap()).unwrap();
            let shifted: Vec<usize> = idx.iter().map(|i| i + shift).collect();
            let b = ibi_from_peaks(&PeakTrain::new(shifted, 30.0, 5000).unwrap()).unwrap();
            prop_assert_eq!(a.intervals_ms(), b.intervals_ms());
        }

        #[test]
        fn constant_intervals_resample_flat(iv in 300.0f64..2000.0, n in 2usize..40) {
            let ibi = IBISeries::from_intervals(vec![iv; n]).unwrap();
            let r = resample_ibi(&ibi, 4.0).unwrap();
            prop_assert!(r.values().iter().all(|v| (v - iv).abs() < 1e-9));
        }
    }
}

use super::{bandpass_zero_phase, PeakTrain, SampledSeries};
use crate::{Error, Result};

/// Local-maximum detector with an adaptive prominence floor and a refractory
/// gap, run on a zero-phase band-passed copy of the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetector {
    pub band_hz: (f64, f64),
    /// Multiple of the rolling standard deviation a peak must stand out by.
    pub prominence_factor: f64,
    pub rolling_window_s: f64,
    pub refractory_s: f64,
    pub min_duration_s: f64,
}

impl Default for PeakDetector {
    fn default() -> Self {
        Self {
            band_hz: (0.6, 4.0),
            prominence_factor: 0.3,
            rolling_window_s: 3.0,
            refractory_s: 0.25,
            min_duration_s: 2.0,
        }
    }
}

/// Minimum index gap between two detected peaks at `rate_hz`.
pub fn refractory_gap(refractory_s: f64, rate_hz: f64) -> usize {
    ((refractory_s * rate_hz).ceil() as usize).max(1)
}

pub fn detect_peaks(signal: &SampledSeries) -> Result<PeakTrain> {
    PeakDetector::default().detect(signal)
}

impl PeakDetector {
    pub fn detect(&self, signal: &SampledSeries) -> Result<PeakTrain> {
        let rate = signal.rate_hz();
        let n = signal.len();
        let needed = (self.min_duration_s * rate).ceil() as usize;
        if n < needed.max(3) {
            return Err(Error::TooShort { needed: needed.max(3), got: n });
        }
        let x = signal.values();
        let (lo, hi) = x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi == lo {
            return PeakTrain::empty(rate, n);
        }

        let mean = x.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let y = bandpass_zero_phase(&centered, self.band_hz.0, self.band_hz.1, rate);

        let window = ((self.rolling_window_s * rate).round() as usize).max(2);
        let (level, spread) = rolling_moments(&y, window);

        // peaks sitting below the local level are filter ringing between beats
        let candidates: Vec<usize> = (1..n - 1)
            .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > level[i])
            .filter(|&i| {
                let prom = prominence(&y, i);
                prom > 0.0 && prom > self.prominence_factor * spread[i]
            })
            .collect();

        let gap = refractory_gap(self.refractory_s, rate);
        PeakTrain::new(enforce_refractory(&y, candidates, gap), rate, n)
    }
}

/// Centered rolling mean and population standard deviation, window truncated
/// at the edges.
fn rolling_moments(y: &[f64], window: usize) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &v) in y.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(n);
            let m = (b - a) as f64;
            let mean = (s1[b] - s1[a]) / m;
            (mean, ((s2[b] - s2[a]) / m - mean * mean).max(0.0).sqrt())
        })
        .unzip()
}

/// Height above the higher of the two bases reached before a taller sample
/// (or the signal edge) on either side.
fn prominence(y: &[f64], peak: usize) -> f64 {
    let h = y[peak];
    let mut left_min = h;
    for &v in y[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &y[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Keeps the tallest peaks first and drops anything closer than `gap`.
fn enforce_refractory(y: &[f64], mut order: Vec<usize>, gap: usize) -> Vec<usize> {
    order.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for i in order {
        if kept.iter().all(|&k| k.abs_diff(i) >= gap) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_crests() {
        let fs = 30.0;
        let x: Vec<f64> = (0..300).map(|i| (2.0 * PI * 1.2 * i as f64 / fs).sin()).collect();
        let peaks = detect_peaks(&SampledSeries::new(x, fs, 0.0).unwrap()).unwrap();
        assert_eq!(peaks.len(), 12);
        for (k, &i) in peaks.indices().iter().enumerate() {
            let crest = (0.25 + k as f64) / 1.2 * fs;
            assert!((i as f64 - crest).abs() <= 1.0, "peak {i} vs crest {crest}");
        }
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        let s = SampledSeries::new(vec![0.0; 120], 30.0, 0.0).unwrap();
        assert!(detect_peaks(&s).unwrap().is_empty());
        let s = SampledSeries::new(vec![1.0 / 3.0; 120], 30.0, 0.0).unwrap();
        assert!(detect_peaks(&s).unwrap().is_empty());
    }

    #[test]
    fn too_short_is_an_error() {
        let s = SampledSeries::new(vec![0.0, 1.0, 0.0], 30.0, 0.0).unwrap();
        assert!(matches!(detect_peaks(&s), Err(Error::TooShort { .. })));
    }

    #[test]
    fn spikes_are_recovered_exactly() {
        let n = 300;
        let truth = [20usize, 47, 71, 100, 128, 151, 183, 210, 236, 262];
        let mut x = vec![0.001; n];
        for &i in &truth {
            x[i] = 0.08;
        }
        let peaks = detect_peaks(&SampledSeries::new(x, 30.0, 0.0).unwrap()).unwrap();
        assert_eq!(peaks.indices(), &truth);
    }

    #[test]
    fn prominence_matches_hand_value() {
        let y = [0.0, 2.0, 1.0, 3.0, 0.5, 4.0, 0.0];
        assert_eq!(prominence(&y, 1), 1.0);
        assert_eq!(prominence(&y, 3), 2.5);
        assert_eq!(prominence(&y, 5), 4.0);
    }

    proptest! {
        #[test]
        fn refractory_gap_holds(seed in any::<u64>(), rate in 20.0f64..64.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = (rate * 8.0) as usize;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let peaks = detect_peaks(&SampledSeries::new(x, rate, 0.0).unwrap()).unwrap();
            let gap = refractory_gap(0.25, rate);
            for w in peaks.indices().windows(2) {
                prop_assert!(w[1] - w[0] >= gap);
            }
        }
    }
}

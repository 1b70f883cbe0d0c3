//! Series types, systolic-peak extraction and inter-beat intervals.

mod filter;
mod ibi;
pub mod io;
mod metrics;
mod peaks;

pub use filter::{bandpass_zero_phase, Biquad};
pub use ibi::{ibi_from_peaks, interpolate_ibi, resample_ibi, IBI_MAX_MS, IBI_MIN_MS, IBI_RESAMPLE_HZ};
pub use metrics::{
    hr_metrics, ibi_accuracy_raw, ibi_metrics, mae_rmse, pearson, HrMetrics, IbiMetrics,
};
pub use peaks::{detect_peaks, refractory_gap, PeakDetector};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniformly sampled real-valued series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSeries {
    values: Vec<f64>,
    rate_hz: f64,
    t0_s: f64,
}

impl SampledSeries {
    pub fn new(values: Vec<f64>, rate_hz: f64, t0_s: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidSeries(format!("rate_hz must be > 0, got {rate_hz}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidSeries("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        if !t0_s.is_finite() {
            return Err(Error::InvalidSeries("t0_s must be finite".into()));
        }
        Ok(Self { values, rate_hz, t0_s })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.rate_hz
    }
}

/// Equal-length channels sharing one sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeries {
    channels: Vec<Vec<f64>>,
    rate_hz: f64,
}

impl MultiSeries {
    pub fn new(channels: Vec<Vec<f64>>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidSeries(format!("rate_hz must be > 0, got {rate_hz}")));
        }
        let Some(first) = channels.first() else {
            return Err(Error::InvalidSeries("no channels".into()));
        };
        let len = first.len();
        if len == 0 || channels.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels must be non-empty and of equal length".into()));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite channel value".into()));
        }
        Ok(Self { channels, rate_hz })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<MultiSeries> {
        if start + len > self.len() || len == 0 {
            return Err(Error::Range(format!(
                "window {start}+{len} outside series of length {}",
                self.len()
            )));
        }
        let channels = self.channels.iter().map(|c| c[start..start + len].to_vec()).collect();
        Ok(Self { channels, rate_hz: self.rate_hz })
    }

    /// Per-sample mean over channels.
    pub fn mean_channel(&self) -> Vec<f64> {
        let k = self.channels.len() as f64;
        (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / k)
            .collect()
    }
}

/// Nonnegative series with unit total mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSeries {
    mass: Vec<f64>,
    rate_hz: f64,
}

impl ProbSeries {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(mass: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidSeries(format!("rate_hz must be > 0, got {rate_hz}")));
        }
        if mass.len() < 2 {
            return Err(Error::InvalidSeries("probability series needs at least 2 samples".into()));
        }
        if let Some(i) = mass.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidSeries(format!("mass at index {i} is negative or non-finite")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidSeries(format!("mass sums to {total}, expected 1")));
        }
        Ok(Self { mass, rate_hz })
    }

    /// Unit mass at a single index.
    pub fn delta(len: usize, index: usize, rate_hz: f64) -> Result<Self> {
        if index >= len {
            return Err(Error::Range(format!("index {index} outside length {len}")));
        }
        let mut mass = vec![0.0; len];
        mass[index] = 1.0;
        Self::new(mass, rate_hz)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn to_series(&self) -> SampledSeries {
        SampledSeries {
            values: self.mass.clone(),
            rate_hz: self.rate_hz,
            t0_s: 0.0,
        }
    }
}

/// Ordered systolic-peak sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTrain {
    indices: Vec<usize>,
    rate_hz: f64,
    clip_len: usize,
}

impl PeakTrain {
    pub fn new(indices: Vec<usize>, rate_hz: f64, clip_len: usize) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidSeries(format!("rate_hz must be > 0, got {rate_hz}")));
        }
        if let Some(&last) = indices.last() {
            if last >= clip_len {
                return Err(Error::Range(format!("peak {last} outside clip of length {clip_len}")));
            }
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries("peak indices must be strictly increasing".into()));
        }
        Ok(Self { indices, rate_hz, clip_len })
    }

    pub fn empty(rate_hz: f64, clip_len: usize) -> Result<Self> {
        Self::new(Vec::new(), rate_hz, clip_len)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn clip_len(&self) -> usize {
        self.clip_len
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Peaks falling in `[start, start + len)`, re-indexed to the window.
    pub fn window(&self, start: usize, len: usize) -> PeakTrain {
        let indices = self
            .indices
            .iter()
            .filter(|&&i| i >= start && i < start + len)
            .map(|&i| i - start)
            .collect();
        PeakTrain { indices, rate_hz: self.rate_hz, clip_len: len }
    }
}

/// Inter-beat intervals with the start time of each interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IBISeries {
    intervals_ms: Vec<f64>,
    onsets_s: Vec<f64>,
}

impl IBISeries {
    pub fn new(intervals_ms: Vec<f64>, onsets_s: Vec<f64>) -> Result<Self> {
        if intervals_ms.len() != onsets_s.len() {
            return Err(Error::Shape(format!(
                "{} intervals but {} onsets",
                intervals_ms.len(),
                onsets_s.len()
            )));
        }
        if intervals_ms.iter().chain(&onsets_s).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite interval or onset".into()));
        }
        if onsets_s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries("onsets must be strictly increasing".into()));
        }
        Ok(Self { intervals_ms, onsets_s })
    }

    /// Back-to-back intervals starting at t = 0.
    pub fn from_intervals(intervals_ms: Vec<f64>) -> Result<Self> {
        let mut t = 0.0;
        let onsets = intervals_ms
            .iter()
            .map(|iv| {
                let o = t;
                t += iv / 1000.0;
                o
            })
            .collect();
        Self::new(intervals_ms, onsets)
    }

    pub fn intervals_ms(&self) -> &[f64] {
        &self.intervals_ms
    }

    pub fn onsets_s(&self) -> &[f64] {
        &self.onsets_s
    }

    pub fn len(&self) -> usize {
        self.intervals_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals_ms.is_empty()
    }

    pub fn span_s(&self) -> f64 {
        match (self.onsets_s.first(), self.onsets_s.last(), self.intervals_ms.last()) {
            (Some(a), Some(b), Some(iv)) => b + iv / 1000.0 - a,
            _ => 0.0,
        }
    }
}

/// Places a 1 at every peak index.
pub fn binarize(peaks: &PeakTrain) -> Result<SampledSeries> {
    if peaks.clip_len() < 2 {
        return Err(Error::TooShort { needed: 2, got: peaks.clip_len() });
    }
    let mut values = vec![0.0; peaks.clip_len()];
    for &i in peaks.indices() {
        values[i] = 1.0;
    }
    SampledSeries::new(values, peaks.rate_hz(), 0.0)
}

/// Divides a nonnegative series by its total, yielding a probability series.
pub fn normalize_to_prob(binary: &SampledSeries) -> Result<ProbSeries> {
    if binary.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidSeries("cannot normalize negative values".into()));
    }
    let total: f64 = binary.values().iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mass = binary.values().iter().map(|v| v / total).collect();
    ProbSeries::new(mass, binary.rate_hz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarize_examples() {
        let p = PeakTrain::new(vec![3], 30.0, 6).unwrap();
        assert_eq!(binarize(&p).unwrap().values(), &[0., 0., 0., 1., 0., 0.]);
        let p = PeakTrain::empty(30.0, 4).unwrap();
        assert_eq!(binarize(&p).unwrap().values(), &[0., 0., 0., 0.]);
        let p = PeakTrain::new(vec![0, 5], 30.0, 6).unwrap();
        let b = binarize(&p).unwrap();
        assert_eq!(b.values(), &[1., 0., 0., 0., 0., 1.]);
        assert_eq!(b.values().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn normalize_examples() {
        let s = SampledSeries::new(vec![0., 1., 0., 1.], 30.0, 0.0).unwrap();
        assert_eq!(normalize_to_prob(&s).unwrap().mass(), &[0., 0.5, 0., 0.5]);
        let s = SampledSeries::new(vec![1., 0., 0., 0.], 30.0, 0.0).unwrap();
        assert_eq!(normalize_to_prob(&s).unwrap().mass(), &[1., 0., 0., 0.]);
        let s = SampledSeries::new(vec![0.; 4], 30.0, 0.0).unwrap();
        assert!(matches!(normalize_to_prob(&s), Err(Error::ZeroMass)));
    }

    #[test]
    fn series_validation() {
        assert!(SampledSeries::new(vec![], 30.0, 0.0).is_err());
        assert!(SampledSeries::new(vec![1.0], 0.0, 0.0).is_err());
        assert!(SampledSeries::new(vec![f64::NAN], 30.0, 0.0).is_err());
        assert!(ProbSeries::new(vec![0.5, 0.4], 30.0).is_err());
        assert!(ProbSeries::new(vec![1.0], 30.0).is_err());
        assert!(PeakTrain::new(vec![2, 2], 30.0, 5).is_err());
        assert!(PeakTrain::new(vec![5], 30.0, 5).is_err());
    }

    #[test]
    fn peak_window_reindexes() {
        let p = PeakTrain::new(vec![2, 10, 25, 31], 30.0, 40).unwrap();
        let w = p.window(10, 20);
        assert_eq!(w.indices(), &[0, 15]);
        assert_eq!(w.clip_len(), 20);
    }

    proptest! {
        #[test]
        fn binarize_normalize_round_trip(
            set in proptest::collection::btree_set(0usize..200, 1..40)
        ) {
            let idx: Vec<usize> = set.into_iter().collect();
            let p = PeakTrain::new(idx.clone(), 30.0, 200).unwrap();
            let prob = normalize_to_prob(&binarize(&p).unwrap()).unwrap();
            let expected = 1.0 / idx.len() as f64;
            for (i, &m) in prob.mass().iter().enumerate() {
                if idx.contains(&i) {
                    prop_assert_eq!(m, expected);
                } else {
                    prop_assert_eq!(m, 0.0);
                }
            }
        }
    }
}

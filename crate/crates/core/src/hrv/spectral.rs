use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::signals::{resample_ibi, IBISeries, IBI_RESAMPLE_HZ};
use crate::{Error, Result};

pub const LF_BAND_HZ: (f64, f64) = (0.04, 0.15);
pub const HF_BAND_HZ: (f64, f64) = (0.15, 0.4);
pub const WELCH_SEGMENT: usize = 64;
/// Shortest first-to-last-beat span accepted for spectral analysis.
pub const MIN_SPECTRAL_SPAN_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    /// ms^2
    pub lf_power: f64,
    /// ms^2
    pub hf_power: f64,
    /// lf / hf; meaningless when `ratio_defined` is false.
    pub lf_hf_ratio: f64,
    pub ratio_defined: bool,
}

/// One-sided Welch PSD: Hann window, `segment` samples (shortened to the
/// signal length if needed), 50% overlap, density scaling. Returns
/// (frequencies, psd).
pub fn welch_psd(x: &[f64], rate_hz: f64, segment: usize) -> (Vec<f64>, Vec<f64>) {
    let nseg = segment.min(x.len());
    let step = (nseg / 2).max(1);
    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nseg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let nbins = nseg / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let mut psd = vec![0.0; nbins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); nseg];
    let mut start = 0;
    while start + nseg <= x.len() {
        for i in 0..nseg {
            buf[i] = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (rate_hz * wss * count as f64);
    for (k, p) in psd.iter_mut().enumerate() {
        *p *= scale;
        let nyquist = nseg % 2 == 0 && k == nseg / 2;
        if k != 0 && !nyquist {
            *p *= 2.0;
        }
    }
    let freqs = (0..nbins).map(|k| k as f64 * rate_hz / nseg as f64).collect();
    (freqs, psd)
}

pub fn spectral_features(ibi: &IBISeries) -> Result<SpectralFeatures> {
    if ibi.span_s() < MIN_SPECTRAL_SPAN_S {
        return Err(Error::InsufficientData(format!(
            "spectral features need a {MIN_SPECTRAL_SPAN_S} s span, got {:.2} s",
            ibi.span_s()
        )));
    }
    let grid = resample_ibi(ibi, IBI_RESAMPLE_HZ)?;
    let mean = grid.values().iter().sum::<f64>() / grid.len() as f64;
    let detrended: Vec<f64> = grid.values().iter().map(|v| v - mean).collect();
    let (freqs, psd) = welch_psd(&detrended, IBI_RESAMPLE_HZ, WELCH_SEGMENT);
    let df = freqs.get(1).copied().unwrap_or(0.0);
    let band = |lo: f64, hi: f64, closed: bool| -> f64 {
        freqs
            .iter()
            .zip(&psd)
            .filter(|(&f, _)| f >= lo && (f < hi || (closed && f == hi)))
            .map(|(_, &p)| p * df)
            .sum()
    };
    let lf = band(LF_BAND_HZ.0, LF_BAND_HZ.1, false);
    let hf = band(HF_BAND_HZ.0, HF_BAND_HZ.1, true);
    let ratio_defined = hf > 0.0;
    Ok(SpectralFeatures {
        lf_power: lf,
        hf_power: hf,
        lf_hf_ratio: if ratio_defined { lf / hf } else { 0.0 },
        ratio_defined,
    })
}

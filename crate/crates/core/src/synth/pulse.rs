use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

use super::{gen_rr_sequence, RhythmKind, RhythmSpec};
use crate::rng::{derive_seed, stream};
use crate::signals::{MultiSeries, PeakTrain};
use crate::{Error, Result};

/// Pulsatile strength of each of the three colour-like channels.
pub const CHANNEL_WEIGHTS: [f64; 3] = [0.4, 1.0, 0.7];
/// Band in which signal and noise power are compared.
pub const SNR_BAND_HZ: (f64, f64) = (0.6, 4.0);

const RISE_S: f64 = 0.06;
const DECAY_S: f64 = 0.18;
const DIASTOLIC_GAIN: f64 = 0.4;
const DIASTOLIC_DELAY: f64 = 0.35;
const DIASTOLIC_WIDTH_S: f64 = 0.08;
const WANDER_HZ: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOptions {
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Per-channel in-band SNR; `f64::INFINITY` disables noise and wander.
    pub snr_db: f64,
    /// Multiplies every beat amplitude (subject-level skin factor).
    pub amp_scale: f64,
}

impl Default for ClipOptions {
    fn default() -> Self {
        Self { duration_s: 30.0, rate_hz: 30.0, snr_db: 0.0, amp_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub channels: MultiSeries,
    /// Noise-free pulse waveform before channel weighting.
    pub pulse: Vec<f64>,
    pub true_peaks: PeakTrain,
    /// Generating intervals between consecutive in-clip peaks.
    pub rr_ms: Vec<f64>,
    pub peak_amplitudes: Vec<f64>,
    pub kind: RhythmKind,
    pub subject_id: u64,
    pub snr_db: f64,
}

/// Single beat: exponential rise into a cusp at the systolic peak, slower
/// exponential decay, and a diastolic bump a fraction of the next RR later.
fn beat_shape(tau: f64, rr_s: f64) -> f64 {
    let systolic = if tau < 0.0 { (tau / RISE_S).exp() } else { (-tau / DECAY_S).exp() };
    let d = (tau - DIASTOLIC_DELAY * rr_s) / DIASTOLIC_WIDTH_S;
    systolic + DIASTOLIC_GAIN * (-0.5 * d * d).exp()
}

/// Mean-square power of `x` within `[lo, hi]` Hz.
pub fn band_power(x: &[f64], rate_hz: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = rate_hz / n as f64;
    buf.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = (*k).min(n - *k) as f64 * df;
            f >= lo && f <= hi
        })
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        / (n as f64 * n as f64)
}

pub fn gen_clip(spec: &RhythmSpec, duration_s: f64, snr_db: f64, seed: u64) -> Result<SynthClip> {
    gen_clip_with(spec, &ClipOptions { duration_s, snr_db, ..ClipOptions::default() }, 0, seed)
}

pub fn gen_clip_with(
    spec: &RhythmSpec,
    opts: &ClipOptions,
    subject_id: u64,
    seed: u64,
) -> Result<SynthClip> {
    spec.validate()?;
    if !(opts.rate_hz > 0.0 && opts.amp_scale > 0.0) {
        return Err(Error::Domain("rate and amplitude scale must be > 0".into()));
    }
    if opts.snr_db.is_nan() {
        return Err(Error::Domain("snr_db is NaN".into()));
    }
    let rate = opts.rate_hz;
    let n = (opts.duration_s * rate).round() as usize;
    // spare beats on both sides so the waveform is populated at the edges
    let rr = gen_rr_sequence(spec, opts.duration_s + 6.0, derive_seed(seed, &[1]))?;
    let mut rng = stream(seed, &[2]);

    let amp_dist = if spec.amp_cv > 0.0 {
        let s2 = (1.0 + spec.amp_cv * spec.amp_cv).ln();
        Some(
            LogNormal::new((spec.amp_mean).ln() - s2 / 2.0, s2.sqrt())
                .map_err(|e| Error::Domain(e.to_string()))?,
        )
    } else {
        None
    };

    let lead = rr[0] / 1000.0 * rng.random_range(0.1..0.9) + rr[1] / 1000.0;
    let mut beat_t = Vec::with_capacity(rr.len() + 1);
    let mut t = -lead;
    beat_t.push(t);
    for r in &rr {
        t += r / 1000.0;
        beat_t.push(t);
    }
    let amps: Vec<f64> = beat_t
        .iter()
        .map(|_| opts.amp_scale * amp_dist.map_or(spec.amp_mean, |d| d.sample(&mut rng)))
        .collect();

    let mut pulse = vec![0.0; n];
    for (k, (&tk, &ak)) in beat_t.iter().zip(&amps).enumerate() {
        let rr_s = rr.get(k).map_or(rr[rr.len() - 1], |v| *v) / 1000.0;
        let lo = ((tk - 0.6) * rate).floor().max(0.0) as usize;
        let hi = (((tk + 2.5) * rate).ceil().max(0.0) as usize).min(n);
        for (i, p) in pulse.iter_mut().enumerate().take(hi).skip(lo) {
            *p += ak * beat_shape(i as f64 / rate - tk, rr_s);
        }
    }

    let mut peak_idx = Vec::new();
    let mut peak_amp = Vec::new();
    let mut in_clip = Vec::new();
    for (k, &tk) in beat_t.iter().enumerate() {
        let i = (tk * rate).round();
        if i >= 0.0 && (i as usize) < n {
            peak_idx.push(i as usize);
            peak_amp.push(amps[k]);
            in_clip.push(k);
        }
    }
    let rr_ms = in_clip.windows(2).map(|w| rr[w[0]]).collect();

    let channels = if opts.snr_db.is_finite() {
        let (lo, hi) = SNR_BAND_HZ;
        let pulse_band = band_power(&pulse, rate, lo, hi);
        let band_fraction = ((hi.min(rate / 2.0) - lo) / (rate / 2.0)).max(1e-6);
        let ratio = 10f64.powf(opts.snr_db / 10.0);
        CHANNEL_WEIGHTS
            .iter()
            .enumerate()
            .map(|(c, &w)| {
                let sigma = (w * w * pulse_band / ratio / band_fraction).sqrt();
                let mut crng = stream(seed, &[3, c as u64]);
                let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
                    .map_err(|e| Error::Domain(e.to_string()))?;
                let phase = crng.random_range(0.0..std::f64::consts::TAU);
                Ok(pulse
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let t = i as f64 / rate;
                        let wander = sigma * (std::f64::consts::TAU * WANDER_HZ * t + phase).sin();
                        w * p + wander + noise.sample(&mut crng)
                    })
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
    } else {
        CHANNEL_WEIGHTS.iter().map(|&w| pulse.iter().map(|p| w * p).collect()).collect()
    };

    Ok(SynthClip {
        channels: MultiSeries::new(channels, rate)?,
        pulse,
        true_peaks: PeakTrain::new(peak_idx, rate, n)?,
        rr_ms,
        peak_amplitudes: peak_amp,
        kind: spec.kind,
        subject_id,
        snr_db: opts.snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{detect_peaks, ibi_from_peaks, SampledSeries};

    #[test]
    fn noise_free_regular_clip_is_periodic() {
        let mut spec = RhythmSpec::default_for(RhythmKind::Sr);
        spec.rr_cv = 0.0;
        spec.amp_cv = 0.0;
        spec.mean_hr_bpm = 60.0;
        let clip = gen_clip(&spec, 30.0, f64::INFINITY, 4).unwrap();
        let gaps: Vec<usize> = clip.true_peaks.indices().windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.iter().all(|&g| g == 30));
        // the cusp is the waveform maximum of every beat
        for &i in clip.true_peaks.indices() {
            if i > 0 && i + 1 < clip.pulse.len() {
                assert!(clip.pulse[i] > clip.pulse[i - 1] && clip.pulse[i] > clip.pulse[i + 1]);
            }
        }
    }

    #[test]
    fn snr_is_met_per_channel() {
        let spec = RhythmSpec::default_for(RhythmKind::Sr);
        let clip = gen_clip(&spec, 120.0, 0.0, 8).unwrap();
        for (c, &w) in CHANNEL_WEIGHTS.iter().enumerate() {
            let ch = &clip.channels.channels()[c];
            let noise: Vec<f64> = ch.iter().zip(&clip.pulse).map(|(x, p)| x - w * p).collect();
            let s = band_power(&clip.pulse, 30.0, 0.6, 4.0) * w * w;
            let nz = band_power(&noise, 30.0, 0.6, 4.0);
            let snr = 10.0 * (s / nz).log10();
            assert!(snr.abs() < 0.5, "channel {c} snr {snr}");
        }
    }

    #[test]
    fn af_amplitudes_lower_than_sr() {
        let sr = gen_clip(&RhythmSpec::default_for(RhythmKind::Sr), 30.0, 10.0, 1).unwrap();
        let af = gen_clip(&RhythmSpec::default_for(RhythmKind::Af), 30.0, 10.0, 1).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let at_peaks = |c: &SynthClip| {
            mean(&c.true_peaks.indices().iter().map(|&i| c.pulse[i]).collect::<Vec<_>>())
        };
        assert!(mean(&af.peak_amplitudes) < mean(&sr.peak_amplitudes));
        assert!(at_peaks(&af) < at_peaks(&sr));
    }

    #[test]
    fn peaks_round_trip_to_generating_rr() {
        for (kind, seed) in [(RhythmKind::Sr, 1), (RhythmKind::Af, 2), (RhythmKind::Afl, 3)] {
            let clip = gen_clip(&RhythmSpec::default_for(kind), 30.0, 0.0, seed).unwrap();
            let ibi = ibi_from_peaks(&clip.true_peaks).unwrap();
            assert_eq!(ibi.len(), clip.rr_ms.len());
            for (a, b) in ibi.intervals_ms().iter().zip(&clip.rr_ms) {
                assert!((a - b).abs() <= 1000.0 / 30.0 + 1e-9);
            }
        }
    }

    #[test]
    fn high_snr_detection() {
        let mut matched = 0;
        let mut total = 0;
        for seed in 0..6 {
            let kind = [RhythmKind::Sr, RhythmKind::Af, RhythmKind::HealthyRest][seed % 3];
            let clip = gen_clip(&RhythmSpec::default_for(kind), 30.0, 60.0, seed as u64).unwrap();
            let s = SampledSeries::new(clip.channels.mean_channel(), 30.0, 0.0).unwrap();
            let found = detect_peaks(&s).unwrap();
            for &t in clip.true_peaks.indices() {
                total += 1;
                if found.indices().iter().any(|&f| f.abs_diff(t) <= 2) {
                    matched += 1;
                }
            }
        }
        assert!(matched as f64 >= 0.99 * total as f64, "{matched}/{total}");
    }

    #[test]
    fn deterministic() {
        let spec = RhythmSpec::default_for(RhythmKind::Af);
        assert_eq!(gen_clip(&spec, 20.0, 0.0, 5).unwrap(), gen_clip(&spec, 20.0, 0.0, 5).unwrap());
    }
}

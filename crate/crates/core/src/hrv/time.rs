use serde::{Deserialize, Serialize};

use crate::signals::IBISeries;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub mean_nn_ms: f64,
    pub sdnn_ms: f64,
    pub sdsd_ms: f64,
    pub pnn50_pct: f64,
    pub pnn20_pct: f64,
    pub nn50_count: u32,
    pub nn20_count: u32,
    pub rmssd_ms: f64,
    pub median_nn_ms: f64,
    pub range_nn_ms: f64,
    pub cvsd: f64,
    pub cvnni: f64,
    pub max_hr_bpm: f64,
    pub min_hr_bpm: f64,
    pub std_hr_bpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareFeatures {
    pub sd1_ms: f64,
    pub sd2_ms: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample (n - 1) standard deviation.
fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn require_three(ibi: &IBISeries) -> Result<()> {
    if ibi.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 intervals, got {}",
            ibi.len()
        )));
    }
    Ok(())
}

pub fn time_features(ibi: &IBISeries) -> Result<TimeFeatures> {
    require_three(ibi)?;
    let nn = ibi.intervals_ms();
    let diffs: Vec<f64> = nn.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_nn = mean(nn);
    let sdnn = sample_std(nn);
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    // strict inequality: a difference of exactly x ms does not count
    let nn50 = diffs.iter().filter(|d| d.abs() > 50.0).count() as u32;
    let nn20 = diffs.iter().filter(|d| d.abs() > 20.0).count() as u32;
    let (lo, hi) = nn
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let hr: Vec<f64> = nn.iter().map(|v| 60000.0 / v).collect();
    Ok(TimeFeatures {
        mean_nn_ms: mean_nn,
        sdnn_ms: sdnn,
        sdsd_ms: sample_std(&diffs),
        pnn50_pct: nn50 as f64 / diffs.len() as f64 * 100.0,
        pnn20_pct: nn20 as f64 / diffs.len() as f64 * 100.0,
        nn50_count: nn50,
        nn20_count: nn20,
        rmssd_ms: rmssd,
        median_nn_ms: median(nn),
        range_nn_ms: hi - lo,
        cvsd: rmssd / mean_nn,
        cvnni: sdnn / mean_nn,
        max_hr_bpm: 60000.0 / lo,
        min_hr_bpm: 60000.0 / hi,
        std_hr_bpm: sample_std(&hr),
    })
}

/// SD1 = SDSD / sqrt 2 and SD2 = sqrt(2 SDNN^2 - SD1^2), clamped at zero.
pub fn poincare_features(ibi: &IBISeries) -> Result<PoincareFeatures> {
    require_three(ibi)?;
    let nn = ibi.intervals_ms();
    let diffs: Vec<f64> = nn.windows(2).map(|w| w[1] - w[0]).collect();
    let sdsd = sample_std(&diffs);
    let sdnn = sample_std(nn);
    let sd1 = sdsd / std::f64::consts::SQRT_2;
    let sd2 = (2.0 * sdnn * sdnn - sd1 * sd1).max(0.0).sqrt();
    Ok(PoincareFeatures { sd1_ms: sd1, sd2_ms: sd2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ibi(v: &[f64]) -> IBISeries {
        IBISeries::from_intervals(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_intervals() {
        let t = time_features(&ibi(&[800.0; 3])).unwrap();
        assert_eq!((t.sdnn_ms, t.rmssd_ms, t.pnn50_pct, t.mean_nn_ms), (0.0, 0.0, 0.0, 800.0));
        assert_eq!((t.max_hr_bpm, t.min_hr_bpm, t.std_hr_bpm), (75.0, 75.0, 0.0));
        let p = poincare_features(&ibi(&[800.0; 5])).unwrap();
        assert_eq!((p.sd1_ms, p.sd2_ms), (0.0, 0.0));
    }

    #[test]
    fn hand_computed_example() {
        let series = ibi(&[800.0, 850.0, 790.0, 900.0]);
        let t = time_features(&series).unwrap();
        assert_eq!(t.nn50_count, 2);
        assert_eq!(t.nn20_count, 3);
        assert!((t.pnn50_pct - 200.0 / 3.0).abs() < 1e-12);
        assert!((t.rmssd_ms - (18200.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((t.sdnn_ms - (7700.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((t.rmssd_ms - 77.89).abs() < 0.005);
        assert!((t.sdnn_ms - 50.66).abs() < 0.005);
        // diffs {50, -60, 110}: mean 100/3, squared deviations sum 44600/3
        let sdsd = (44600.0f64 / 3.0 / 2.0).sqrt();
        assert!((t.sdsd_ms - sdsd).abs() < 1e-12);
        let p = poincare_features(&series).unwrap();
        assert!((p.sd1_ms - sdsd / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exactly_fifty_does_not_count() {
        let t = time_features(&ibi(&[800.0, 850.0, 800.0])).unwrap();
        assert_eq!(t.nn50_count, 0);
        assert_eq!(t.nn20_count, 2);
    }

    #[test]
    fn too_few_intervals() {
        assert!(matches!(time_features(&ibi(&[800.0, 810.0])), Err(Error::InsufficientData(_))));
        assert!(poincare_features(&ibi(&[800.0])).is_err());
    }

    #[test]
    fn permutation_witness() {
        let a = time_features(&ibi(&[700.0, 900.0, 700.0, 900.0])).unwrap();
        let b = time_features(&ibi(&[700.0, 700.0, 900.0, 900.0])).unwrap();
        assert_eq!(a.mean_nn_ms, b.mean_nn_ms);
        assert_eq!(a.median_nn_ms, b.median_nn_ms);
        assert_eq!(a.range_nn_ms, b.range_nn_ms);
        assert!((a.sdnn_ms - b.sdnn_ms).abs() < 1e-12);
        assert!(a.rmssd_ms != b.rmssd_ms);
        assert!(a.sdsd_ms != b.sdsd_ms);
    }

    #[test]
    fn alternating_series_exceeds_asymptotic_sd1_bound() {
        let series = ibi(&[400.0, 1500.0, 400.0]);
        let t = time_features(&series).unwrap();
        let p = poincare_features(&series).unwrap();
        assert!(p.sd1_ms > 2f64.sqrt() * t.sdnn_ms);
        assert_eq!(p.sd2_ms, 0.0);
    }

    proptest! {
        #[test]
        fn homogeneity(v in proptest::collection::vec(400.0f64..1500.0, 3..30), c in 0.5f64..2.0) {
            let a = time_features(&ibi(&v)).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = time_features(&ibi(&scaled)).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
            prop_assert!(close(b.mean_nn_ms, c * a.mean_nn_ms));
            prop_assert!(close(b.sdnn_ms, c * a.sdnn_ms));
            prop_assert!(close(b.sdsd_ms, c * a.sdsd_ms));
            prop_assert!(close(b.rmssd_ms, c * a.rmssd_ms));
            prop_assert!(close(b.median_nn_ms, c * a.median_nn_ms));
            prop_assert!(close(b.range_nn_ms, c * a.range_nn_ms));
            prop_assert!(close(b.cvsd, a.cvsd));
            prop_assert!(close(b.cvnni, a.cvnni));
        }

        #[test]
        fn sd1_bounded_by_sdnn(v in proptest::collection::vec(400.0f64..1500.0, 3..30)) {
            let t = time_features(&ibi(&v)).unwrap();
            let p = poincare_features(&ibi(&v)).unwrap();
            // sample conventions: var(d) has n - 2 degrees of freedom, so the
            // asymptotic bound sd1 <= sqrt2 sdnn picks up sqrt((n-1)/(n-2))
            let n = v.len() as f64;
            let bound = 2f64.sqrt() * t.sdnn_ms * ((n - 1.0) / (n - 2.0)).sqrt();
            prop_assert!(p.sd1_ms <= bound * (1.0 + 1e-12) + 1e-9);
            prop_assert!(t.pnn50_pct >= 0.0 && t.pnn50_pct <= 100.0);
            prop_assert!(p.sd2_ms >= 0.0);
        }
    }
}

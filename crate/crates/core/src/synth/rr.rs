use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{RhythmKind, RhythmSpec};
use crate::rng::stream;
use crate::signals::{IBI_MAX_MS, IBI_MIN_MS};
use crate::{Error, Result};

/// Probability per beat that flutter conduction switches ratio.
const AFL_SWITCH_PROB: f64 = 0.12;

/// RR intervals (ms) covering at least `duration_s`.
///
/// Regular rhythms follow a stationary AR(1) process, AF draws independent
/// log-normal intervals, and flutter conducts every `afl_ratio`-th flutter
/// wave with occasional one-step ratio switches.
pub fn gen_rr_sequence(spec: &RhythmSpec, duration_s: f64, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(duration_s >= 10.0) {
        return Err(Error::Domain(format!("duration must be >= 10 s, got {duration_s}")));
    }
    let mut rng = stream(seed, &[0x5252]);
    let mean = spec.mean_rr_ms();
    let target = duration_s * 1000.0;
    let mut out = Vec::with_capacity((target / mean * 1.5) as usize + 4);
    let mut total = 0.0;
    let clip = |v: f64| v.clamp(IBI_MIN_MS, IBI_MAX_MS);

    match spec.kind {
        RhythmKind::Af => {
            let sigma2 = (1.0 + spec.rr_cv * spec.rr_cv).ln();
            let dist = LogNormal::new(mean.ln() - sigma2 / 2.0, sigma2.sqrt())
                .map_err(|e| Error::Domain(e.to_string()))?;
            while total < target {
                let rr = clip(dist.sample(&mut rng));
                total += rr;
                out.push(rr);
            }
        }
        RhythmKind::Afl => {
            let base = spec.afl_ratio as f64;
            let flutter = mean / base;
            let jitter = Normal::new(0.0, spec.rr_cv).map_err(|e| Error::Domain(e.to_string()))?;
            let mut ratio = base;
            while total < target {
                if rng.random_bool(AFL_SWITCH_PROB) {
                    ratio = if ratio == base { base + 1.0 } else { base };
                }
                let rr = clip(ratio * flutter * (1.0 + jitter.sample(&mut rng)));
                total += rr;
                out.push(rr);
            }
        }
        _ => {
            let sd = spec.rr_cv * mean;
            let phi = spec.rr_autocorr;
            let innovation = (1.0 - phi * phi).sqrt() * sd;
            let z = Normal::new(0.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
            let mut dev = sd * z.sample(&mut rng);
            while total < target {
                let rr = clip(mean + dev);
                total += rr;
                out.push(rr);
                dev = phi * dev + innovation * z.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv_and_lag1(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let cov = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1.0);
        (var.sqrt() / m, cov / var)
    }

    #[test]
    fn af_statistics() {
        let spec = RhythmSpec::default_for(RhythmKind::Af);
        let dur = 10_000.0 * spec.mean_rr_ms() / 1000.0;
        let rr = gen_rr_sequence(&spec, dur, 11).unwrap();
        assert!(rr.len() >= 9_500);
        let (cv, r1) = cv_and_lag1(&rr[..10_000.min(rr.len())]);
        assert!((cv - 0.24).abs() < 0.03, "cv {cv}");
        assert!(r1.abs() < 0.05, "lag-1 {r1}");
    }

    #[test]
    fn sr_statistics() {
        let spec = RhythmSpec::default_for(RhythmKind::Sr);
        let rr = gen_rr_sequence(&spec, 9_000.0, 3).unwrap();
        let (cv, r1) = cv_and_lag1(&rr);
        assert!((cv - 0.05).abs() < 0.01, "cv {cv}");
        assert!((r1 - 0.7).abs() < 0.05, "lag-1 {r1}");
    }

    #[test]
    fn zero_cv_is_constant() {
        let mut spec = RhythmSpec::default_for(RhythmKind::Sr);
        spec.rr_cv = 0.0;
        let rr = gen_rr_sequence(&spec, 30.0, 5).unwrap();
        assert!(rr.iter().all(|&v| v == 60000.0 / spec.mean_hr_bpm));
    }

    #[test]
    fn flutter_blocks() {
        let mut spec = RhythmSpec::default_for(RhythmKind::Afl);
        spec.mean_hr_bpm = 150.0;
        spec.afl_ratio = 2;
        let rr = gen_rr_sequence(&spec, 600.0, 9).unwrap();
        let near = |c: f64| rr.iter().filter(|&&v| (v - c).abs() < 40.0).count();
        let (at_400, at_600) = (near(400.0), near(600.0));
        assert_eq!(at_400 + at_600, rr.len());
        assert!(at_400 > at_600 && at_600 > 0);
        let switches = rr.windows(2).filter(|w| (w[0] - w[1]).abs() > 100.0).count();
        assert!(switches > 10);
    }

    #[test]
    fn bounds_and_domain() {
        let spec = RhythmSpec { rr_cv: 2.0, ..RhythmSpec::default_for(RhythmKind::Af) };
        let rr = gen_rr_sequence(&spec, 300.0, 1).unwrap();
        assert!(rr.iter().all(|v| (IBI_MIN_MS..=IBI_MAX_MS).contains(v)));
        assert!(gen_rr_sequence(&spec, 5.0, 1).is_err());
    }
}

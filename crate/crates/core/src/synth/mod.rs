//! Synthetic labelled rhythm clips with ground-truth peak times.

mod corpus;
mod pulse;
mod rr;

pub use corpus::{gen_corpus, generate as generate_corpus, load_corpus, CorpusConfig, CorpusEntry, LoadedClip, Manifest};
pub use pulse::{
    band_power, gen_clip, gen_clip_with, ClipOptions, SynthClip, CHANNEL_WEIGHTS, SNR_BAND_HZ,
};
pub use rr::gen_rr_sequence;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhythmKind {
    HealthyRest,
    HealthyExercise,
    Sr,
    Af,
    Afl,
}

impl RhythmKind {
    /// Classification label: both healthy sessions map to `healthy`.
    pub fn class_label(self) -> &'static str {
        match self {
            RhythmKind::HealthyRest | RhythmKind::HealthyExercise => "healthy",
            RhythmKind::Sr => "sr",
            RhythmKind::Af => "af",
            RhythmKind::Afl => "afl",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RhythmKind::HealthyRest => "healthy_rest",
            RhythmKind::HealthyExercise => "healthy_exercise",
            RhythmKind::Sr => "sr",
            RhythmKind::Af => "af",
            RhythmKind::Afl => "afl",
        }
    }
}

impl fmt::Display for RhythmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RhythmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy_rest" | "healthy" => Ok(RhythmKind::HealthyRest),
            "healthy_exercise" => Ok(RhythmKind::HealthyExercise),
            "sr" => Ok(RhythmKind::Sr),
            "af" => Ok(RhythmKind::Af),
            "afl" => Ok(RhythmKind::Afl),
            other => Err(Error::Domain(format!("unknown rhythm kind '{other}'"))),
        }
    }
}

/// Generative parameters for one rhythm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhythmSpec {
    pub kind: RhythmKind,
    pub mean_hr_bpm: f64,
    /// Coefficient of variation of the RR intervals.
    pub rr_cv: f64,
    /// Lag-1 autocorrelation of the RR process.
    pub rr_autocorr: f64,
    pub amp_mean: f64,
    pub amp_cv: f64,
    /// Atrial-to-ventricular conduction ratio (flutter only).
    pub afl_ratio: u32,
}

/// Session means of the recorded cohort: healthy at rest / after exercise,
/// patients before (AF) / after (SR) cardioversion.
pub const HEALTHY_REST_HR: f64 = 73.6;
pub const HEALTHY_EXERCISE_HR: f64 = 83.2;
pub const AF_HR: f64 = 78.9;
pub const SR_HR: f64 = 66.5;

impl RhythmSpec {
    pub fn default_for(kind: RhythmKind) -> Self {
        let regular = |hr| RhythmSpec {
            kind,
            mean_hr_bpm: hr,
            rr_cv: 0.05,
            rr_autocorr: 0.7,
            amp_mean: 1.0,
            amp_cv: 0.1,
            afl_ratio: 0,
        };
        match kind {
            RhythmKind::HealthyRest => regular(HEALTHY_REST_HR),
            RhythmKind::HealthyExercise => regular(HEALTHY_EXERCISE_HR),
            RhythmKind::Sr => regular(SR_HR),
            RhythmKind::Af => RhythmSpec {
                kind,
                mean_hr_bpm: AF_HR,
                rr_cv: 0.24,
                rr_autocorr: 0.0,
                amp_mean: 0.6,
                amp_cv: 0.3,
                afl_ratio: 0,
            },
            // 4:1 conduction of a 300 bpm flutter wave
            RhythmKind::Afl => RhythmSpec {
                kind,
                mean_hr_bpm: 75.0,
                rr_cv: 0.02,
                rr_autocorr: 0.0,
                amp_mean: 0.8,
                amp_cv: 0.15,
                afl_ratio: 4,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(40.0..=180.0).contains(&self.mean_hr_bpm) {
            return Err(Error::Domain(format!("mean HR {} outside [40, 180]", self.mean_hr_bpm)));
        }
        if !(self.rr_cv.is_finite() && self.rr_cv >= 0.0) {
            return Err(Error::Domain(format!("rr_cv must be >= 0, got {}", self.rr_cv)));
        }
        if !(0.0..1.0).contains(&self.rr_autocorr) {
            return Err(Error::Domain(format!("rr_autocorr {} outside [0, 1)", self.rr_autocorr)));
        }
        if !(self.amp_mean.is_finite() && self.amp_mean > 0.0) {
            return Err(Error::Domain(format!("amp_mean must be > 0, got {}", self.amp_mean)));
        }
        if !(self.amp_cv.is_finite() && self.amp_cv >= 0.0) {
            return Err(Error::Domain(format!("amp_cv must be >= 0, got {}", self.amp_cv)));
        }
        if self.kind == RhythmKind::Afl && self.afl_ratio < 1 {
            return Err(Error::Domain("flutter needs a conduction ratio >= 1".into()));
        }
        Ok(())
    }

    pub fn mean_rr_ms(&self) -> f64 {
        60000.0 / self.mean_hr_bpm
    }
}

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use systole::signals::io::ClipFile;
use systole::signals::PeakTrain;

/// Output of `infer`: detected peak indices plus the clip metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeaksFile {
    pub rate_hz: f64,
    pub n_samples: usize,
    pub peaks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_id: Option<String>,
}

impl PeaksFile {
    pub fn from_train(peaks: &PeakTrain, clip: &ClipFile) -> Self {
        Self {
            rate_hz: peaks.rate_hz(),
            n_samples: peaks.clip_len(),
            peaks: peaks.indices().to_vec(),
            label: clip.label.clone(),
            subject_id: clip.subject_id,
            clip_id: clip.clip_id.clone(),
        }
    }

    pub fn peak_train(&self) -> Result<PeakTrain> {
        Ok(PeakTrain::new(self.peaks.clone(), self.rate_hz, self.n_samples)?)
    }

    /// A peaks file, or a clip file whose annotated peaks are used instead.
    pub fn read_any(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if let Ok(p) = serde_json::from_str::<PeaksFile>(&text) {
            p.peak_train()?;
            return Ok(p);
        }
        let clip: ClipFile =
            serde_json::from_str(&text).with_context(|| format!("{} is neither a peaks nor a clip file", path.display()))?;
        let train = clip
            .peak_train()?
            .with_context(|| format!("{} carries no peaks", path.display()))?;
        Ok(Self::from_train(&train, &clip))
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gen_clip_with, ClipOptions, RhythmKind, RhythmSpec};
use crate::rng::{derive_seed, stream, tag};
use crate::signals::io::ClipFile;
use crate::{Error, Result};

/// Subject-level spread of mean heart rate (fractional sd).
const SUBJECT_HR_SD: f64 = 0.1;
/// Subject-level spread of pulse amplitude (cv).
const SUBJECT_AMP_CV: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub classes: Vec<String>,
    pub n_subjects_per_class: usize,
    pub clips_per_subject: usize,
    pub duration_s: f64,
    pub snr_db: f64,
    pub rate_hz: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            classes: ["healthy", "sr", "af", "afl"].map(String::from).to_vec(),
            n_subjects_per_class: 20,
            clips_per_subject: 4,
            duration_s: 30.0,
            snr_db: 0.0,
            rate_hz: 30.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    /// Path relative to the corpus root.
    pub path: String,
    pub label: String,
    pub kind: RhythmKind,
    pub subject_id: u64,
    pub clip_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub rate_hz: f64,
    pub duration_s: f64,
    /// Absent when the corpus is noise-free.
    pub snr_db: Option<f64>,
    pub classes: Vec<String>,
    pub clips: Vec<CorpusEntry>,
}

#[derive(Debug, Clone)]
pub struct LoadedClip {
    pub entry: CorpusEntry,
    pub clip: ClipFile,
}

/// Subject ids: healthy 1000+i, patients (shared by SR and AF) 2000+i,
/// flutter patients 3000+i.
fn subject_group(class: &str) -> Result<(u64, &'static str)> {
    match class {
        "healthy" => Ok((1000, "healthy")),
        "sr" | "af" => Ok((2000, "patient")),
        "afl" => Ok((3000, "flutter")),
        other => Err(Error::Domain(format!("unknown class '{other}'"))),
    }
}

fn clip_kind(class: &str, clip: usize) -> RhythmKind {
    match class {
        "healthy" if clip % 2 == 0 => RhythmKind::HealthyRest,
        "healthy" => RhythmKind::HealthyExercise,
        "sr" => RhythmKind::Sr,
        "af" => RhythmKind::Af,
        _ => RhythmKind::Afl,
    }
}

struct Job {
    class: String,
    subject_id: u64,
    clip: usize,
    kind: RhythmKind,
    hr_factor: f64,
    amp_scale: f64,
}

fn plan(cfg: &CorpusConfig) -> Result<Vec<Job>> {
    if cfg.n_subjects_per_class == 0 || cfg.clips_per_subject == 0 || cfg.classes.is_empty() {
        return Err(Error::Domain("corpus counts must all be >= 1".into()));
    }
    let z = Normal::new(0.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let s2 = (1.0 + SUBJECT_AMP_CV * SUBJECT_AMP_CV).ln();
    let amp = LogNormal::new(-s2 / 2.0, s2.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let mut jobs = Vec::new();
    for class in &cfg.classes {
        let (base, group) = subject_group(class)?;
        for i in 0..cfg.n_subjects_per_class {
            // drawn per subject, so a patient's SR and AF sessions share it
            let mut rng = stream(cfg.seed, &[tag(group), i as u64]);
            let hr_factor = (1.0 + SUBJECT_HR_SD * z.sample(&mut rng)).max(0.5);
            let amp_scale = amp.sample(&mut rng);
            for clip in 0..cfg.clips_per_subject {
                jobs.push(Job {
                    class: class.clone(),
                    subject_id: base + i as u64,
                    clip,
                    kind: clip_kind(class, clip),
                    hr_factor,
                    amp_scale,
                });
            }
        }
    }
    Ok(jobs)
}

fn render(cfg: &CorpusConfig, job: &Job) -> Result<(CorpusEntry, ClipFile)> {
    let mut spec = RhythmSpec::default_for(job.kind);
    spec.mean_hr_bpm = (spec.mean_hr_bpm * job.hr_factor).clamp(40.0, 180.0);
    let opts = ClipOptions {
        duration_s: cfg.duration_s,
        rate_hz: cfg.rate_hz,
        snr_db: cfg.snr_db,
        amp_scale: job.amp_scale,
    };
    let seed = derive_seed(cfg.seed, &[tag(&job.class), job.subject_id, job.clip as u64]);
    let clip = gen_clip_with(&spec, &opts, job.subject_id, seed)?;
    let clip_id = format!("c{}", job.clip);
    let entry = CorpusEntry {
        path: format!("{}/{}/{}.json", job.class, job.subject_id, clip_id),
        label: job.class.clone(),
        kind: job.kind,
        subject_id: job.subject_id,
        clip_id: clip_id.clone(),
    };
    let file = ClipFile {
        rate_hz: cfg.rate_hz,
        t0_s: 0.0,
        values: clip.channels.mean_channel(),
        peaks: Some(clip.true_peaks.indices().to_vec()),
        label: Some(job.class.clone()),
        subject_id: Some(job.subject_id),
        channels: Some(clip.channels.channels().to_vec()),
        clip_id: Some(clip_id),
        snr_db: cfg.snr_db.is_finite().then_some(cfg.snr_db),
    };
    Ok((entry, file))
}

/// Generates every clip in memory, in manifest order.
pub fn generate(cfg: &CorpusConfig) -> Result<(Manifest, Vec<ClipFile>)> {
    let jobs = plan(cfg)?;
    let rendered: Vec<(CorpusEntry, ClipFile)> =
        jobs.par_iter().map(|j| render(cfg, j)).collect::<Result<_>>()?;
    let (clips, files): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    let manifest = Manifest {
        seed: cfg.seed,
        rate_hz: cfg.rate_hz,
        duration_s: cfg.duration_s,
        snr_db: cfg.snr_db.is_finite().then_some(cfg.snr_db),
        classes: cfg.classes.clone(),
        clips,
    };
    Ok((manifest, files))
}

/// Writes `<root>/<class>/<subject_id>/<clip_id>.json` plus `manifest.json`.
pub fn gen_corpus(root: &Path, cfg: &CorpusConfig) -> Result<Manifest> {
    let (manifest, files) = generate(cfg)?;
    for (entry, file) in manifest.clips.iter().zip(&files) {
        let path = root.join(&entry.path);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        file.write(&path)?;
    }
    fs::create_dir_all(root)?;
    fs::write(root.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_corpus(root: &Path) -> Result<(Manifest, Vec<LoadedClip>)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(root.join("manifest.json"))?)?;
    let clips = manifest
        .clips
        .iter()
        .map(|e| {
            let path: PathBuf = root.join(&e.path);
            Ok(LoadedClip { entry: e.clone(), clip: ClipFile::read(&path)? })
        })
        .collect::<Result<_>>()?;
    Ok((manifest, clips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn small() -> CorpusConfig {
        CorpusConfig {
            n_subjects_per_class: 3,
            clips_per_subject: 2,
            duration_s: 12.0,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn layout_and_determinism() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = gen_corpus(a.path(), &small()).unwrap();
        gen_corpus(b.path(), &small()).unwrap();
        assert_eq!(m.clips.len(), 4 * 3 * 2);
        for e in &m.clips {
            let x = fs::read(a.path().join(&e.path)).unwrap();
            let y = fs::read(b.path().join(&e.path)).unwrap();
            assert_eq!(x, y, "{}", e.path);
            assert!(e.path.starts_with(&format!("{}/{}/", e.label, e.subject_id)));
        }
        assert_eq!(
            fs::read(a.path().join("manifest.json")).unwrap(),
            fs::read(b.path().join("manifest.json")).unwrap()
        );
        let (_, loaded) = load_corpus(a.path()).unwrap();
        assert_eq!(loaded.len(), m.clips.len());
        assert_eq!(loaded[0].clip.channels.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn subject_ids_shared_only_by_sr_and_af() {
        let (m, _) = generate(&small()).unwrap();
        let mut by_class: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
        for e in &m.clips {
            by_class.entry(e.label.as_str()).or_default().insert(e.subject_id);
        }
        assert_eq!(by_class["sr"], by_class["af"]);
        assert!(by_class["healthy"].is_disjoint(&by_class["af"]));
        assert!(by_class["healthy"].is_disjoint(&by_class["afl"]));
        assert!(by_class["afl"].is_disjoint(&by_class["sr"]));
    }

    #[test]
    fn healthy_sessions_alternate() {
        let (m, _) = generate(&small()).unwrap();
        let kinds: BTreeSet<RhythmKind> =
            m.clips.iter().filter(|e| e.label == "healthy").map(|e| e.kind).collect();
        assert!(kinds.contains(&RhythmKind::HealthyRest));
        assert!(kinds.contains(&RhythmKind::HealthyExercise));
    }

    #[test]
    fn rejects_zero_counts() {
        let cfg = CorpusConfig { clips_per_subject: 0, ..small() };
        assert!(generate(&cfg).is_err());
    }
}

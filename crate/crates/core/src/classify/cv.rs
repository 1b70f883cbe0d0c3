use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::{fit_dataset, FitOptions, SvmModel};
use super::Dataset;
use crate::hrv::HRVVector;
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted_positive: bool, actual_positive: bool) {
        match (predicted_positive, actual_positive) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(&self, auc: Option<f64>) -> Metrics {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Metrics {
            accuracy: ratio(self.tp + self.tn, self.total()).unwrap_or(0.0),
            sensitivity: ratio(self.tp, self.tp + self.fn_),
            specificity: ratio(self.tn, self.tn + self.fp),
            f1: ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_),
            auc,
        }
    }
}

/// Undefined ratios (empty class) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

/// Mann-Whitney AUC with midranks for ties; None unless both classes occur.
pub fn auc_midrank(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let r_pos: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let np = n_pos as f64;
    Some((r_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Shuffle the distinct subjects with a seeded stream and deal them round-robin
/// into `k` folds.
pub fn assign_folds(subjects: &[u64], k: usize, seed: u64) -> Result<BTreeMap<u64, usize>> {
    let mut unique: Vec<u64> = subjects.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 folds, got {k}")));
    }
    if unique.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} subjects cannot fill {k} folds",
            unique.len()
        )));
    }
    unique.shuffle(&mut stream(seed, &[crate::rng::tag("folds")]));
    Ok(unique.into_iter().enumerate().map(|(i, s)| (s, i % k)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_subjects: Vec<u64>,
    pub test_subjects: Vec<u64>,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub c: f64,
    pub gamma: f64,
    pub n_support: usize,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub model: SvmModel,
    pub report: FoldReport,
    pub scores: Vec<f64>,
    pub truth: Vec<bool>,
}

/// Fit on the rows of `train_subjects`, score every other row.
pub fn evaluate_split(
    data: &Dataset,
    train_subjects: &BTreeSet<u64>,
    fold: usize,
    opts: &FitOptions,
) -> Result<SplitResult> {
    let (train, test) = data.split_by(|s| train_subjects.contains(&s));
    let train_set: BTreeSet<u64> = train.subjects.iter().copied().collect();
    let test_set: BTreeSet<u64> = test.subjects.iter().copied().collect();
    if !train_set.is_disjoint(&test_set) {
        return Err(Error::InvalidSeries(format!("fold {fold} leaks subjects between train and test")));
    }
    let model = fit_dataset(&train, opts)?;
    let mut confusion = Confusion::default();
    let mut scores = Vec::with_capacity(test.len());
    for (x, &p) in test.x.iter().zip(&test.positive) {
        let pred = model.predict_raw(x)?;
        confusion.record(pred.positive, p);
        scores.push(pred.score);
    }
    let auc = auc_midrank(&scores, &test.positive);
    let report = FoldReport {
        fold,
        train_subjects: train_set.into_iter().collect(),
        test_subjects: test_set.into_iter().collect(),
        confusion,
        metrics: confusion.metrics(auc),
        c: model.c,
        gamma: model.gamma,
        n_support: model.support_vectors.len(),
    };
    Ok(SplitResult { model, report, scores, truth: test.positive })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub positive_label: String,
    pub negative_label: String,
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub folds: Vec<FoldReport>,
    pub pooled: Metrics,
    pub confusion: Confusion,
    pub fold_map: BTreeMap<u64, usize>,
    /// Train and test subject sets were disjoint in every fold.
    pub subject_independent: bool,
}

pub fn cross_validate(features: &[HRVVector], k: usize, seed: u64, positive_label: &str) -> Result<CvReport> {
    cross_validate_with(&Dataset::from_features(features, positive_label), k, seed, &FitOptions::default())
}

/// Subject-independent k-fold CV. Each fold's inner grid search is seeded from
/// (seed, fold); folds run in parallel and are merged in fold order.
pub fn cross_validate_with(data: &Dataset, k: usize, seed: u64, opts: &FitOptions) -> Result<CvReport> {
    let fold_map = assign_folds(&data.subjects, k, seed)?;
    let results: Vec<SplitResult> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: BTreeSet<u64> =
                fold_map.iter().filter(|(_, &g)| g != f).map(|(&s, _)| s).collect();
            let fold_opts = FitOptions { seed: derive_seed(seed, &[f as u64]), ..opts.clone() };
            evaluate_split(data, &train, f, &fold_opts)
        })
        .collect::<Result<_>>()?;
    let mut confusion = Confusion::default();
    let (mut scores, mut truth) = (Vec::new(), Vec::new());
    let mut subject_independent = true;
    for r in &results {
        confusion.merge(&r.report.confusion);
        scores.extend_from_slice(&r.scores);
        truth.extend_from_slice(&r.truth);
        let train: BTreeSet<_> = r.report.train_subjects.iter().collect();
        subject_independent &= r.report.test_subjects.iter().all(|s| !train.contains(s));
    }
    assert!(subject_independent, "subject leakage between folds");
    Ok(CvReport {
        positive_label: data.positive_label.clone(),
        negative_label: data.negative_label.clone(),
        k,
        seed,
        n_samples: data.len(),
        pooled: confusion.metrics(auc_midrank(&scores, &truth)),
        confusion,
        folds: results.into_iter().map(|r| r.report).collect(),
        fold_map,
        subject_independent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedCounts {
    pub sensitivity: usize,
    pub specificity: usize,
    pub f1: usize,
    pub auc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub positive_label: String,
    pub negative_label: String,
    pub repeats: usize,
    pub seed: u64,
    pub runs: Vec<FoldReport>,
    /// Undefined per-run values are left out of the means and counted here.
    pub mean: MeanMetrics,
    pub excluded: ExcludedCounts,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>, excluded: &mut usize) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => *excluded += 1,
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Draw `n_train_pos` positive and `n_train_neg` negative subjects for
/// training, test on all remaining subjects, `repeats` times.
pub fn repeated_holdout(
    data: &Dataset,
    n_train_pos: usize,
    n_train_neg: usize,
    repeats: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<HoldoutReport> {
    let mut pos_subjects = BTreeSet::new();
    let mut neg_subjects = BTreeSet::new();
    for (&s, &p) in data.subjects.iter().zip(&data.positive) {
        if p {
            pos_subjects.insert(s);
        } else {
            neg_subjects.insert(s);
        }
    }
    let n_all = pos_subjects.union(&neg_subjects).count();
    if pos_subjects.len() < n_train_pos || neg_subjects.len() < n_train_neg || n_all <= n_train_pos + n_train_neg {
        return Err(Error::InsufficientData(format!(
            "need {n_train_pos}/{n_train_neg} training subjects per class plus a test subject, have {}/{}",
            pos_subjects.len(),
            neg_subjects.len()
        )));
    }
    if repeats == 0 {
        return Err(Error::Domain("repeats must be > 0".into()));
    }
    let runs: Vec<FoldReport> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &[crate::rng::tag("holdout"), r as u64]);
            let mut pos: Vec<u64> = pos_subjects.iter().copied().collect();
            pos.shuffle(&mut rng);
            let mut train: BTreeSet<u64> = pos.into_iter().take(n_train_pos).collect();
            let mut neg: Vec<u64> = neg_subjects.difference(&train).copied().collect();
            neg.shuffle(&mut rng);
            train.extend(neg.into_iter().take(n_train_neg));
            let run_opts = FitOptions { seed: derive_seed(seed, &[r as u64]), ..opts.clone() };
            evaluate_split(data, &train, r, &run_opts).map(|s| s.report)
        })
        .collect::<Result<_>>()?;
    let mut excluded = ExcludedCounts::default();
    let mean = MeanMetrics {
        accuracy: runs.iter().map(|r| r.metrics.accuracy).sum::<f64>() / runs.len() as f64,
        sensitivity: mean_defined(runs.iter().map(|r| r.metrics.sensitivity), &mut excluded.sensitivity),
        specificity: mean_defined(runs.iter().map(|r| r.metrics.specificity), &mut excluded.specificity),
        f1: mean_defined(runs.iter().map(|r| r.metrics.f1), &mut excluded.f1),
        auc: mean_defined(runs.iter().map(|r| r.metrics.auc), &mut excluded.auc),
    };
    Ok(HoldoutReport {
        positive_label: data.positive_label.clone(),
        negative_label: data.negative_label.clone(),
        repeats,
        seed,
        runs,
        mean,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn metric_substitution_example() {
        let c = Confusion { tp: 67, fn_: 1, tn: 56, fp: 5 };
        let m = c.metrics(None);
        assert!((m.sensitivity.unwrap() - 67.0 / 68.0).abs() < 1e-15);
        assert!((m.specificity.unwrap() - 56.0 / 61.0).abs() < 1e-15);
        assert!((m.sensitivity.unwrap() * 100.0 - 98.53).abs() < 0.005);
        assert!((m.specificity.unwrap() * 100.0 - 91.80).abs() < 0.005);
        assert!((m.accuracy - 123.0 / 129.0).abs() < 1e-15);
        assert!((m.f1.unwrap() - 134.0 / 140.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_scores() {
        let scores = [0.1, 0.2, 0.9, 1.5];
        let truth = [false, false, true, true];
        assert_eq!(auc_midrank(&scores, &truth), Some(1.0));
        let mut c = Confusion::default();
        for (s, t) in scores.iter().zip(truth) {
            c.record(*s > 0.5, t);
        }
        let m = c.metrics(None);
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (1.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn auc_ties_take_midrank() {
        assert_eq!(auc_midrank(&[1.0, 1.0], &[true, false]), Some(0.5));
        assert_eq!(auc_midrank(&[0.0, 1.0, 1.0], &[false, true, false]), Some(0.75));
        assert_eq!(auc_midrank(&[1.0, 2.0], &[true, true]), None);
    }

    #[test]
    fn random_scores_give_chance_auc() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let truth: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let auc = auc_midrank(&scores, &truth).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "{auc}");
    }

    #[test]
    fn folds_cover_subjects_once() {
        let subjects: Vec<u64> = (0..23).flat_map(|s| [s, s, s]).collect();
        let map = assign_folds(&subjects, 10, 4).unwrap();
        assert_eq!(map.len(), 23);
        let mut sizes = [0usize; 10];
        for f in map.values() {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
        assert_eq!(map, assign_folds(&subjects, 10, 4).unwrap());
        assert!(matches!(assign_folds(&subjects, 24, 4), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn auc_is_rank_invariant(scores in proptest::collection::vec(-5.0f64..5.0, 4..40), seed in 0u64..1000) {
            let truth: Vec<bool> = (0..scores.len()).map(|i| (i as u64 + seed) % 3 == 0).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let a = auc_midrank(&scores, &truth).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
            let b = auc_midrank(&mapped, &truth).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn metric_identities(tp in 0usize..50, tn in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let c = Confusion { tp, tn, fp, fn_ };
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let m = c.metrics(None);
            let (se, sp) = (m.sensitivity.unwrap(), m.specificity.unwrap());
            prop_assert!(m.accuracy >= se.min(sp) - 1e-12 && m.accuracy <= se.max(sp) + 1e-12);
            let prev = (tp + fn_) as f64 / c.total() as f64;
            prop_assert!((m.accuracy - (prev * se + (1.0 - prev) * sp)).abs() < 1e-12);
        }
    }
}

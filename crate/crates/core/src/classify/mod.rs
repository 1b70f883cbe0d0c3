//! RBF-kernel SVM on standardized HRV features, with subject-independent
//! cross-validation and repeated hold-out evaluation.

mod cv;
mod svm;

pub use cv::{
    assign_folds, auc_midrank, cross_validate, cross_validate_with, evaluate_split, repeated_holdout,
    Confusion, CvReport, FoldReport, HoldoutReport, Metrics, SplitResult,
};
pub use svm::{
    dual_objective, fit, fit_dataset, fit_fixed, fit_with, kernel_matrix, predict, rbf, smo, ClassWeight,
    FitOptions, Prediction, SmoSolution, Standardizer, SvmModel, DEFAULT_C_GRID, DEFAULT_GAMMA_GRID,
    KKT_TOLERANCE,
};

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hrv::HRVVector;
use crate::Error;

/// Binary problems evaluated on the rhythm corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    AfVsHealthy,
    AfVsSr,
    AflVsSr,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::AfVsHealthy, Task::AfVsSr, Task::AflVsSr];

    pub fn name(self) -> &'static str {
        match self {
            Task::AfVsHealthy => "af-vs-healthy",
            Task::AfVsSr => "af-vs-sr",
            Task::AflVsSr => "afl-vs-sr",
        }
    }

    pub fn positive_label(self) -> &'static str {
        match self {
            Task::AfVsHealthy | Task::AfVsSr => "af",
            Task::AflVsSr => "afl",
        }
    }

    pub fn negative_label(self) -> &'static str {
        match self {
            Task::AfVsHealthy => "healthy",
            Task::AfVsSr | Task::AflVsSr => "sr",
        }
    }

    /// Rows belonging to either class of the task.
    pub fn select(self, features: &[HRVVector]) -> Vec<HRVVector> {
        features
            .iter()
            .filter(|f| f.label == self.positive_label() || f.label == self.negative_label())
            .cloned()
            .collect()
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown task '{s}'")))
    }
}

/// Feature rows with binary targets and subject ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub positive: Vec<bool>,
    pub subjects: Vec<u64>,
    pub positive_label: String,
    pub negative_label: String,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, positive: Vec<bool>, subjects: Vec<u64>) -> Self {
        Self { x, positive, subjects, positive_label: "pos".into(), negative_label: "neg".into() }
    }

    /// Every label other than `positive_label` is negative. The negative name is
    /// the other label when there is exactly one, else "other".
    pub fn from_features(features: &[HRVVector], positive_label: &str) -> Self {
        let others: BTreeSet<&str> = features
            .iter()
            .map(|f| f.label.as_str())
            .filter(|l| *l != positive_label)
            .collect();
        let negative_label = match others.len() {
            1 => others.into_iter().next().unwrap().to_string(),
            _ => "other".to_string(),
        };
        Self {
            x: features.iter().map(|f| f.features().to_vec()).collect(),
            positive: features.iter().map(|f| f.label == positive_label).collect(),
            subjects: features.iter().map(|f| f.subject_id).collect(),
            positive_label: positive_label.to_string(),
            negative_label,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.iter().collect::<BTreeSet<_>>().len()
    }

    /// (rows whose subject satisfies `keep`, the rest)
    pub fn split_by(&self, keep: impl Fn(u64) -> bool) -> (Dataset, Dataset) {
        let mut a = self.empty_like();
        let mut b = self.empty_like();
        for i in 0..self.len() {
            let dst = if keep(self.subjects[i]) { &mut a } else { &mut b };
            dst.x.push(self.x[i].clone());
            dst.positive.push(self.positive[i]);
            dst.subjects.push(self.subjects[i]);
        }
        (a, b)
    }

    fn empty_like(&self) -> Dataset {
        Dataset {
            x: Vec::new(),
            positive: Vec::new(),
            subjects: Vec::new(),
            positive_label: self.positive_label.clone(),
            negative_label: self.negative_label.clone(),
        }
    }
}

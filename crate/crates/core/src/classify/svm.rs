use serde::{Deserialize, Serialize};

use super::cv::assign_folds;
use super::Dataset;
use crate::{Error, Result};

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA_GRID: [f64; 3] = [1.0 / 80.0, 1.0 / 20.0, 1.0 / 5.0];
pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

/// Per-feature z-scoring with population standard deviation. Zero-variance
/// columns pass through with scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut means = vec![0.0; d];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; d];
        for row in x {
            for k in 0..d {
                scales[k] += (row[k] - means[k]).powi(2);
            }
        }
        for (s, m) in scales.iter_mut().zip(&means) {
            *s = (*s / n).sqrt();
            // spread at round-off level relative to the mean counts as constant
            if !(*s > 1e-12 * m.abs()) || *s == 0.0 {
                *s = 1.0;
            }
        }
        Self { means, scales }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(&x[i], &x[j], gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Σα − ½ Σ α_i α_j y_i y_j K_ij
pub fn dual_objective(kernel: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Sequential minimal optimisation of the C-SVC dual with second-order
/// working-set selection. `upper[i]` is the box bound of α_i, `y` is ±1.
pub fn smo(kernel: &[Vec<f64>], y: &[f64], upper: &[f64], tol: f64) -> SmoSolution {
    let n = y.len();
    let max_iter = 100_000.max(100 * n);
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut g = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];
    let at_upper = |a: f64, c: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !at_upper(alpha[t], upper[t]) } else { !at_lower(alpha[t]) };
            if in_up && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t], upper[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = kernel[i][i] + kernel[t][t] - 2.0 * kernel[i][t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -(diff * diff) / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol || j_sel.is_none() {
            converged = true;
            break;
        }
        let j = j_sel.unwrap();
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kernel[i][i] + kernel[j][j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = kernel[i][i] + kernel[j][j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free multipliers, else the middle of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if at_upper(alpha[t], upper[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    SmoSolution { alpha, bias: -rho, iterations, converged }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// C scaled by n / (2 n_class) per class.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub inner_folds: usize,
    pub seed: u64,
    pub class_weight: ClassWeight,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            c_grid: DEFAULT_C_GRID.to_vec(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            inner_folds: 3,
            seed: 0,
            class_weight: ClassWeight::None,
            tol: KKT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Standardized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// α_i y_i for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub standardizer: Standardizer,
    pub positive_label: String,
    pub negative_label: String,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
    pub positive: bool,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.standardizer.means.len() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.standardizer.means.len(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature".into()));
        }
        let z = self.standardizer.apply(x);
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, a)| a * rbf(sv, &z, self.gamma))
            .sum();
        Ok(s + self.bias)
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<Prediction> {
        let score = self.decision(x)?;
        let positive = score > 0.0;
        let label = if positive { &self.positive_label } else { &self.negative_label };
        Ok(Prediction { label: label.clone(), score, positive })
    }
}

pub fn predict(model: &SvmModel, x: &crate::hrv::HRVVector) -> Result<Prediction> {
    model.predict_raw(&x.features())
}

fn check_trainable(data: &Dataset) -> Result<()> {
    if data.x.is_empty() {
        return Err(Error::DegenerateTraining("no training samples".into()));
    }
    let n_pos = data.positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == data.x.len() {
        return Err(Error::DegenerateTraining("training data holds a single class".into()));
    }
    if data.x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite training feature".into()));
    }
    Ok(())
}

/// Train with fixed hyperparameters.
pub fn fit_fixed(data: &Dataset, c: f64, gamma: f64, opts: &FitOptions) -> Result<SvmModel> {
    check_trainable(data)?;
    if !(c > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("C and gamma must be > 0".into()));
    }
    let standardizer = Standardizer::fit(&data.x);
    let z: Vec<Vec<f64>> = data.x.iter().map(|r| standardizer.apply(r)).collect();
    let y: Vec<f64> = data.positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let n = y.len() as f64;
    let n_pos = data.positive.iter().filter(|&&p| p).count() as f64;
    let (c_pos, c_neg) = match opts.class_weight {
        ClassWeight::None => (c, c),
        ClassWeight::Balanced => (c * n / (2.0 * n_pos), c * n / (2.0 * (n - n_pos))),
    };
    let upper: Vec<f64> = y.iter().map(|&v| if v > 0.0 { c_pos } else { c_neg }).collect();
    let kernel = kernel_matrix(&z, gamma);
    let sol = smo(&kernel, &y, &upper, opts.tol);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(z[i].clone());
            dual_coefs.push(a * y[i]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        gamma,
        c,
        standardizer,
        positive_label: data.positive_label.clone(),
        negative_label: data.negative_label.clone(),
        converged: sol.converged,
    })
}

/// Pooled inner-CV accuracy for one (C, γ); None if no inner fold was trainable.
fn inner_score(data: &Dataset, c: f64, gamma: f64, opts: &FitOptions) -> Option<f64> {
    let folds = assign_folds(&data.subjects, opts.inner_folds, opts.seed).ok()?;
    let (mut correct, mut total) = (0usize, 0usize);
    for f in 0..opts.inner_folds {
        let (train, test) = data.split_by(|s| folds[&s] != f);
        let Ok(model) = fit_fixed(&train, c, gamma, opts) else { continue };
        for (x, &p) in test.x.iter().zip(&test.positive) {
            if let Ok(pred) = model.predict_raw(x) {
                total += 1;
                correct += (pred.positive == p) as usize;
            }
        }
    }
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Grid-search (C, γ) by subject-independent inner CV, then refit on all of
/// `data`. Ties keep the earlier grid point; with too few subjects for the
/// inner split the grid's middle point is used.
pub fn fit_dataset(data: &Dataset, opts: &FitOptions) -> Result<SvmModel> {
    check_trainable(data)?;
    let mut best: Option<(f64, f64, f64)> = None;
    if data.n_subjects() >= opts.inner_folds && opts.inner_folds >= 2 {
        for &c in &opts.c_grid {
            for &gamma in &opts.gamma_grid {
                if let Some(acc) = inner_score(data, c, gamma, opts) {
                    if best.is_none_or(|(b, _, _)| acc > b) {
                        best = Some((acc, c, gamma));
                    }
                }
            }
        }
    }
    let (c, gamma) = match best {
        Some((_, c, g)) => (c, g),
        None => (opts.c_grid[opts.c_grid.len() / 2], opts.gamma_grid[opts.gamma_grid.len() / 2]),
    };
    fit_fixed(data, c, gamma, opts)
}

pub fn fit(features: &[crate::hrv::HRVVector], positive_label: &str) -> Result<SvmModel> {
    fit_with(features, positive_label, &FitOptions::default())
}

pub fn fit_with(
    features: &[crate::hrv::HRVVector],
    positive_label: &str,
    opts: &FitOptions,
) -> Result<SvmModel> {
    fit_dataset(&Dataset::from_features(features, positive_label), opts)
}

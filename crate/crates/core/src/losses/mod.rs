//! Distances between a predicted peak distribution and the normalized binary
//! peak train, with analytic gradients.
//!
//! All losses take the prediction first and the target second. Gradients are
//! with respect to the prediction. [`loss_from_logits`] chains them through
//! the softmax head for training.

mod sweep;

pub use sweep::{
    effective_support, loss_vs_sharpness, loss_vs_shift, sharpness_sweep, shift_sweep,
    truncated_gaussian_peak, CurveRow, SweepGrid, SHARPNESS_GRID, SHIFT_GRID, SUPPORT_FLOOR,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::signals::{ProbSeries, SampledSeries};
use crate::{Error, Result};

/// Smoothing added to the prediction inside the KL logarithm.
pub const KL_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Sed,
    Kl,
    Js,
    Ws,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Sed, LossKind::Kl, LossKind::Js, LossKind::Ws];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Sed => "sed",
            LossKind::Kl => "kl",
            LossKind::Js => "js",
            LossKind::Ws => "ws",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sed" => Ok(LossKind::Sed),
            "kl" => Ok(LossKind::Kl),
            "js" => Ok(LossKind::Js),
            "ws" | "wasserstein" => Ok(LossKind::Ws),
            other => Err(Error::Domain(format!("unknown loss kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Loss evaluated from raw logits; `grad_logits` already includes the
/// softmax Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitLoss {
    pub value: f64,
    pub probs: Vec<f64>,
    pub grad_logits: Vec<f64>,
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Pulls a gradient with respect to softmax outputs back to the logits.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad_probs).map(|(p, g)| p * (g - dot)).collect()
}

pub fn softmax_head(logits: &SampledSeries) -> Result<ProbSeries> {
    if logits.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: logits.len() });
    }
    ProbSeries::new(softmax(logits.values()), logits.rate_hz())
}

fn check_lengths(p: &[f64], s: &[f64]) -> Result<()> {
    if p.len() != s.len() {
        return Err(Error::Shape(format!("length {} vs {}", p.len(), s.len())));
    }
    Ok(())
}

/// Squared Euclidean distance.
pub fn sed_raw(p: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    let value = p.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
    let grad = p.iter().zip(s).map(|(a, b)| 2.0 * (a - b)).collect();
    (value, grad)
}

/// `KL(s || p)` with the prediction smoothed by [`KL_EPSILON`].
pub fn kl_raw(p: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    let value = p
        .iter()
        .zip(s)
        .filter(|(_, &b)| b > 0.0)
        .map(|(a, b)| b * (b / (a + KL_EPSILON)).ln())
        .sum();
    let grad = p.iter().zip(s).map(|(a, b)| -b / (a + KL_EPSILON)).collect();
    (value, grad)
}

/// Jensen-Shannon divergence against the midpoint mixture.
pub fn js_raw(p: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(s) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            value += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            value += 0.5 * b * (b / m).ln();
        }
        // d/dp of the two halves collapses to 0.5 ln(p / m)
        grad.push(if a > 0.0 {
            0.5 * (a / m).ln()
        } else if m > 0.0 {
            0.5 * (KL_EPSILON / m).ln()
        } else {
            0.0
        });
    }
    (value.max(0.0), grad)
}

/// One-dimensional Wasserstein distance as the L1 gap between the two
/// cumulative sums. The subgradient of |.| at zero is taken as 0; the last
/// index is excluded from the gradient because both cumulative sums equal the
/// total mass there.
pub fn ws_raw(p: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    let n = p.len();
    let mut diff = Vec::with_capacity(n);
    let (mut fp, mut fs) = (0.0, 0.0);
    for (a, b) in p.iter().zip(s) {
        fp += a;
        fs += b;
        diff.push(fp - fs);
    }
    let value = diff.iter().map(|d| d.abs()).sum();
    let mut grad = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        if t + 1 < n {
            acc += sign(diff[t]);
        }
        grad[t] = acc;
    }
    (value, grad)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn raw(kind: LossKind, p: &[f64], s: &[f64]) -> (f64, Vec<f64>) {
    match kind {
        LossKind::Sed => sed_raw(p, s),
        LossKind::Kl => kl_raw(p, s),
        LossKind::Js => js_raw(p, s),
        LossKind::Ws => ws_raw(p, s),
    }
}

pub fn evaluate(kind: LossKind, p: &ProbSeries, s: &ProbSeries) -> Result<LossValue> {
    check_lengths(p.mass(), s.mass())?;
    let (value, grad) = raw(kind, p.mass(), s.mass());
    Ok(LossValue { value, grad })
}

pub fn sed(p: &ProbSeries, s: &ProbSeries) -> Result<LossValue> {
    evaluate(LossKind::Sed, p, s)
}

pub fn kl(p: &ProbSeries, s: &ProbSeries) -> Result<LossValue> {
    evaluate(LossKind::Kl, p, s)
}

pub fn js(p: &ProbSeries, s: &ProbSeries) -> Result<LossValue> {
    evaluate(LossKind::Js, p, s)
}

pub fn wasserstein(p: &ProbSeries, s: &ProbSeries) -> Result<LossValue> {
    evaluate(LossKind::Ws, p, s)
}

/// Fused softmax + loss; the gradient is with respect to the logits.
pub fn loss_from_logits(kind: LossKind, logits: &[f64], target: &[f64]) -> Result<LogitLoss> {
    check_lengths(logits, target)?;
    if logits.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: logits.len() });
    }
    let probs = softmax(logits);
    let (value, grad) = raw(kind, &probs, target);
    let grad_logits = softmax_backward(&probs, &grad);
    Ok(LogitLoss { value, probs, grad_logits })
}

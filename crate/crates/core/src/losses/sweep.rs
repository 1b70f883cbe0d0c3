//! Loss responses to peak misalignment and to peak sharpness.

use serde::{Deserialize, Serialize};

use super::{raw, LossKind};
use crate::signals::ProbSeries;
use crate::{Error, Result};

/// Sample grid a smooth peak is drawn on; coordinates are `(t - center) / rate_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub length: usize,
    pub rate_hz: f64,
}

impl SweepGrid {
    pub fn center(&self) -> usize {
        self.length / 2
    }
}

/// 1001 samples over [-2, 2].
pub const SHARPNESS_GRID: SweepGrid = SweepGrid { length: 1001, rate_hz: 250.0 };

/// 1001 samples at spacing 1/18, so a 50-sample shift moves the binary peak
/// about 8.8 standard deviations away from a sigma^2 = 0.1 smooth peak.
pub const SHIFT_GRID: SweepGrid = SweepGrid { length: 1001, rate_hz: 18.0 };

/// Mass below which a sample is treated as outside a peak's support.
pub const SUPPORT_FLOOR: f64 = 1e-14;

/// One sweep point: the swept variable and the four loss values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub sweep_var: f64,
    pub sed: f64,
    pub kl: f64,
    pub js: f64,
    pub ws: f64,
}

impl CurveRow {
    pub fn get(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Sed => self.sed,
            LossKind::Kl => self.kl,
            LossKind::Js => self.js,
            LossKind::Ws => self.ws,
        }
    }
}

/// Gaussian N(0, sigma2) sampled on the grid around `center`, truncated to
/// the series and renormalized.
pub fn truncated_gaussian_peak(
    length: usize,
    center: usize,
    sigma2: f64,
    rate_hz: f64,
) -> Result<ProbSeries> {
    if length < 2 || center >= length {
        return Err(Error::Domain(format!("center {center} invalid for length {length}")));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Domain(format!("variance must be > 0, got {sigma2}")));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::Domain(format!("rate must be > 0, got {rate_hz}")));
    }
    let weights: Vec<f64> = (0..length)
        .map(|t| {
            let x = (t as f64 - center as f64) / rate_hz;
            (-x * x / (2.0 * sigma2)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    ProbSeries::new(weights.into_iter().map(|w| w / total).collect(), rate_hz)
}

/// Indices whose mass is at least [`SUPPORT_FLOOR`].
pub fn effective_support(p: &ProbSeries) -> std::ops::RangeInclusive<usize> {
    let m = p.mass();
    let first = m.iter().position(|&v| v >= SUPPORT_FLOOR).unwrap_or(0);
    let last = m.iter().rposition(|&v| v >= SUPPORT_FLOOR).unwrap_or(0);
    first..=last
}

fn row(sweep_var: f64, p: &[f64], s: &[f64]) -> CurveRow {
    CurveRow {
        sweep_var,
        sed: raw(LossKind::Sed, p, s).0,
        kl: raw(LossKind::Kl, p, s).0,
        js: raw(LossKind::Js, p, s).0,
        ws: raw(LossKind::Ws, p, s).0,
    }
}

/// Smooth peak fixed at the grid center, binary peak moved by every shift in
/// `-max_shift..=max_shift` samples.
pub fn shift_sweep(grid: SweepGrid, max_shift: usize, sigma2: f64) -> Result<Vec<CurveRow>> {
    if (max_shift as f64) >= grid.length as f64 / 2.0 {
        return Err(Error::Range(format!(
            "max shift {max_shift} must be below half the series length {}",
            grid.length
        )));
    }
    let c = grid.center();
    let smooth = truncated_gaussian_peak(grid.length, c, sigma2, grid.rate_hz)?;
    let m = max_shift as i64;
    (-m..=m)
        .map(|dt| {
            let at = (c as i64 + dt) as usize;
            let binary = ProbSeries::delta(grid.length, at, grid.rate_hz)?;
            Ok(row(dt as f64, smooth.mass(), binary.mass()))
        })
        .collect()
}

/// Binary peak at the grid center against smooth peaks of each variance.
pub fn sharpness_sweep(grid: SweepGrid, sigma2_grid: &[f64]) -> Result<Vec<CurveRow>> {
    if let Some(bad) = sigma2_grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("variance must be > 0, got {bad}")));
    }
    let c = grid.center();
    let binary = ProbSeries::delta(grid.length, c, grid.rate_hz)?;
    sigma2_grid
        .iter()
        .map(|&s2| {
            let smooth = truncated_gaussian_peak(grid.length, c, s2, grid.rate_hz)?;
            Ok(row(s2, smooth.mass(), binary.mass()))
        })
        .collect()
}

/// Single-loss shift curve on [`SHIFT_GRID`] as `(shift, value)` pairs.
pub fn loss_vs_shift(kind: LossKind, max_shift: usize, sigma2: f64) -> Result<Vec<(i64, f64)>> {
    Ok(shift_sweep(SHIFT_GRID, max_shift, sigma2)?
        .into_iter()
        .map(|r| (r.sweep_var as i64, r.get(kind)))
        .collect())
}

/// Single-loss sharpness curve on [`SHARPNESS_GRID`] as `(sigma2, value)` pairs.
pub fn loss_vs_sharpness(kind: LossKind, sigma2_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(sharpness_sweep(SHARPNESS_GRID, sigma2_grid)?
        .into_iter()
        .map(|r| (r.sweep_var, r.get(kind)))
        .collect())
}

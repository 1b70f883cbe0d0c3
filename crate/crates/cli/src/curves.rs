//! Loss-curve sweeps written as plot-ready CSV, with shape self-checks.

use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use systole::losses::{
    effective_support, sharpness_sweep, shift_sweep, truncated_gaussian_peak, CurveRow, LossKind, SHARPNESS_GRID,
    SHIFT_GRID,
};

pub const MAX_SHIFT: usize = 50;
pub const SHIFT_SIGMA2: f64 = 0.1;
/// Variances the dominance check is stated on.
pub const CHECK_SIGMA2: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const CONSTANT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveChecks {
    pub ws_strictly_increasing: bool,
    pub kl_strictly_increasing: bool,
    /// Smallest |Δt| whose binary peak lies outside the smooth peak's support.
    pub disjoint_from: i64,
    pub sed_constant_once_disjoint: bool,
    pub js_constant_once_disjoint: bool,
    pub all_minimized_at_zero: bool,
    pub ws_symmetric: bool,
    pub ws_dominates_at_largest_variance: bool,
}

impl CurveChecks {
    pub fn all_pass(&self) -> bool {
        self.ws_strictly_increasing
            && self.kl_strictly_increasing
            && self.sed_constant_once_disjoint
            && self.js_constant_once_disjoint
            && self.all_minimized_at_zero
            && self.ws_symmetric
            && self.ws_dominates_at_largest_variance
    }
}

/// Log-spaced variances from 0.01 to 10, including the four check points.
pub fn sigma2_grid() -> Vec<f64> {
    (0..=30).map(|i| 10f64.powf(-2.0 + i as f64 / 10.0)).collect()
}

fn strictly_increasing_in_abs(rows: &[CurveRow], kind: LossKind) -> bool {
    let zero = rows.len() / 2;
    let right = rows[zero..].windows(2).all(|w| w[1].get(kind) > w[0].get(kind));
    let left = rows[..=zero].windows(2).all(|w| w[0].get(kind) > w[1].get(kind));
    right && left
}

pub fn check_curves(shift: &[CurveRow], sharp: &[CurveRow]) -> Result<CurveChecks> {
    let smooth = truncated_gaussian_peak(SHIFT_GRID.length, SHIFT_GRID.center(), SHIFT_SIGMA2, SHIFT_GRID.rate_hz)?;
    let support = effective_support(&smooth);
    let c = SHIFT_GRID.center() as i64;
    let disjoint = |dt: i64| {
        let at = (c + dt) as usize;
        !support.contains(&at)
    };
    let disjoint_from = (0..=MAX_SHIFT as i64).find(|&d| disjoint(d) && disjoint(-d)).unwrap_or(i64::MAX);
    let far = |kind: LossKind| shift[shift.len() - 1].get(kind);
    let constant = |kind: LossKind| {
        shift
            .iter()
            .filter(|r| disjoint(r.sweep_var as i64))
            .all(|r| (r.get(kind) - far(kind)).abs() <= CONSTANT_TOL)
    };
    let zero = &shift[shift.len() / 2];
    let all_minimized_at_zero = LossKind::ALL
        .iter()
        .all(|&k| shift.iter().all(|r| r.get(k) >= zero.get(k)));
    let ws_symmetric = (0..shift.len()).all(|i| (shift[i].ws - shift[shift.len() - 1 - i].ws).abs() <= 1e-9);
    let last = sharp
        .iter()
        .find(|r| (r.sweep_var - 10.0).abs() < 1e-9)
        .ok_or_else(|| anyhow::anyhow!("sharpness sweep lacks sigma^2 = 10"))?;
    Ok(CurveChecks {
        ws_strictly_increasing: strictly_increasing_in_abs(shift, LossKind::Ws),
        kl_strictly_increasing: strictly_increasing_in_abs(shift, LossKind::Kl),
        disjoint_from,
        sed_constant_once_disjoint: constant(LossKind::Sed),
        js_constant_once_disjoint: constant(LossKind::Js),
        all_minimized_at_zero,
        ws_symmetric,
        ws_dominates_at_largest_variance: last.ws >= last.sed && last.ws >= last.kl && last.ws >= last.js,
    })
}

fn write_rows(path: &Path, first: &str, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([first, "sed", "kl", "js", "ws"])?;
    for r in rows {
        w.write_record([r.sweep_var, r.sed, r.kl, r.js, r.ws].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub struct CurveOutput {
    pub shift: Vec<CurveRow>,
    pub sharpness: Vec<CurveRow>,
    pub checks: CurveChecks,
}

pub fn compute() -> Result<CurveOutput> {
    let shift = shift_sweep(SHIFT_GRID, MAX_SHIFT, SHIFT_SIGMA2)?;
    let mut grid = sigma2_grid();
    grid.extend(CHECK_SIGMA2);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let sharpness = sharpness_sweep(SHARPNESS_GRID, &grid)?;
    let checks = check_curves(&shift, &sharpness)?;
    Ok(CurveOutput { shift, sharpness, checks })
}

/// Writes `shift_sweep.csv`, `sharpness_sweep.csv` and `curve_checks.json`.
pub fn cmd_loss_curves(out_dir: &Path) -> Result<CurveOutput> {
    std::fs::create_dir_all(out_dir)?;
    let out = compute()?;
    write_rows(&out_dir.join("shift_sweep.csv"), "delta_t", &out.shift)?;
    write_rows(&out_dir.join("sharpness_sweep.csv"), "sigma2", &out.sharpness)?;
    crate::write_json(&out_dir.join("curve_checks.json"), &out.checks)?;
    Ok(out)
}

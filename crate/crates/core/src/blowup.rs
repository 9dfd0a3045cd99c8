//! Blow-up time extrapolation and blow-up set estimation.

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::solver::SimulationResult;
use crate::trace::{nearest_snapshot, Snapshot, Trace};

pub const FIT_METHOD: &str = "inverse-excess-mass-affine";

/// Fractions of the last time at which growth factors are sampled.
pub const DEFAULT_CHECKPOINTS: [f64; 5] = [0.5, 0.7, 0.85, 0.95, 1.0];
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmaxFit {
    pub t_max: f64,
    /// RMS residual of the affine fit relative to the mean fitted value.
    pub fit_residual: f64,
    pub rows_used: usize,
}

/// Least-squares line through `1/(y − 1)` (corrected mass) over the last
/// quartile of resolved rows; the root of the line estimates T_max.
pub fn estimate_tmax(trace: &Trace) -> Result<TmaxFit> {
    let resolved = trace.resolved_prefix();
    let usable = if resolved >= 10 { resolved } else { trace.len() };
    let pts: Vec<(f64, f64)> = (0..usable)
        .filter_map(|k| {
            let y = trace.corrected_mass(k);
            (y > 1.0).then(|| (trace.rows[k].t, 1.0 / (y - 1.0)))
        })
        .collect();
    if pts.len() < 10 {
        return Err(Error::Diagnostic(format!(
            "need at least 10 rows with corrected mass above 1, got {}",
            pts.len()
        )));
    }
    let tail = &pts[pts.len() - pts.len() / 4..];
    let (slope, intercept) = affine_fit(tail);
    if !(slope < 0.0) {
        return Err(Error::Diagnostic("no blow-up signature: 1/(y-1) is not decreasing".into()));
    }
    let t_max = -intercept / slope;
    let mean = tail.iter().map(|p| p.1.abs()).sum::<f64>() / tail.len() as f64;
    let rms = (tail.iter().map(|&(t, z)| (z - (intercept + slope * t)).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    Ok(TmaxFit { t_max, fit_residual: rms / mean, rows_used: tail.len() })
}

/// Ordinary least squares `z ≈ intercept + slope·t`; returns `(slope, intercept)`.
pub fn affine_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let zm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxz: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - zm)).sum();
    let slope = sxz / sxx;
    (slope, zm - slope * tm)
}

/// Upper bound `C_P |Ω| / ((y0 − 1) z0)` on the blow-up time with
/// `z0 = (1 + y0)/2`.
pub fn poincare_blowup_bound(y0: f64, c_p: f64, omega_measure: f64) -> Result<f64> {
    if !(y0 > 1.0) {
        return Err(Error::Precondition(format!("blow-up bound needs corrected mass above 1, got {y0}")));
    }
    let z0 = 0.5 * (1.0 + y0);
    Ok(c_p * omega_measure / ((y0 - 1.0) * z0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSet {
    pub checkpoint_times: Vec<f64>,
    /// `u(x, t_K)/u(x, t_1)` per interior node, in grid order.
    pub growth_factors: Vec<f64>,
    pub blowup_set_fraction: f64,
    /// `(margin, min growth over the core box at that margin)`.
    pub core_min_growth: Vec<(f64, f64)>,
}

/// Classifies interior nodes by growth between the distinct snapshots
/// nearest to `checkpoints` (fractions of the last snapshot time). A node blows up when
/// its growth ratio increases over the second half of the checkpoints and the
/// final ratio reaches `growth_threshold`.
pub fn blowup_set_estimate(
    grid: &Grid,
    snapshots: &[Snapshot],
    checkpoints: &[f64],
    growth_threshold: f64,
    core_margins: &[f64],
) -> Result<BlowupSet> {
    if checkpoints.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 checkpoints, got {}", checkpoints.len())));
    }
    let t_last = snapshots.last().map(|s| s.t).ok_or_else(|| Error::Precondition("no snapshots".into()))?;
    let mut idx: Vec<usize> = checkpoints.iter().map(|&c| nearest_snapshot(snapshots, c * t_last).expect("nonempty")).collect();
    idx.dedup();
    if idx.len() < 3 {
        return Err(Error::Precondition(format!(
            "checkpoints resolve to {} distinct snapshots; at least 3 are needed (record snapshots more often)",
            idx.len()
        )));
    }
    let picks: Vec<&Snapshot> = idx.iter().map(|&i| &snapshots[i]).collect();
    for s in &picks {
        grid.check_len(&s.values)?;
    }
    let k_count = picks.len();
    let half = k_count / 2;
    let mut growth = Vec::new();
    let mut blowing = 0usize;
    let mut interior = 0usize;
    let mut core_min: Vec<(f64, f64)> = core_margins.iter().map(|&m| (m, f64::INFINITY)).collect();
    for k in grid.interior() {
        interior += 1;
        let base = picks[0].values[k];
        let ratios: Vec<f64> = picks.iter().map(|s| s.values[k] / base).collect();
        let increasing = ratios[half..].windows(2).all(|w| w[1] >= w[0]) && ratios[k_count - 1] > ratios[k_count - 2];
        let g = ratios[k_count - 1];
        if increasing && g >= growth_threshold {
            blowing += 1;
        }
        growth.push(g);
        let dist = grid.boundary_distance(k);
        for entry in core_min.iter_mut() {
            if dist >= entry.0 - 1e-12 {
                entry.1 = entry.1.min(g);
            }
        }
    }
    Ok(BlowupSet {
        checkpoint_times: picks.iter().map(|s| s.t).collect(),
        growth_factors: growth,
        blowup_set_fraction: if interior == 0 { 0.0 } else { blowing as f64 / interior as f64 },
        core_min_growth: core_min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub t_max_estimate: f64,
    pub fit_method: &'static str,
    pub fit_residual: f64,
    pub t_last: f64,
    pub set: BlowupSet,
}

/// Full blow-up analysis of a finished run; refuses runs that did not blow up.
pub fn analyze(grid: &Grid, result: &SimulationResult, growth_threshold: f64, core_margins: &[f64]) -> Result<BlowupReport> {
    if !result.outcome.is_blowup() {
        return Err(Error::Precondition(format!(
            "blow-up analysis needs a BlowUp outcome, got {}",
            result.outcome.name()
        )));
    }
    analyze_trace(grid, &result.trace, &result.snapshots, growth_threshold, core_margins)
}

/// Blow-up analysis from a trace and its snapshots.
pub fn analyze_trace(
    grid: &Grid,
    trace: &Trace,
    snapshots: &[Snapshot],
    growth_threshold: f64,
    core_margins: &[f64],
) -> Result<BlowupReport> {
    let fit = estimate_tmax(trace)?;
    let set = blowup_set_estimate(grid, snapshots, &DEFAULT_CHECKPOINTS, growth_threshold, core_margins)?;
    Ok(BlowupReport {
        t_max_estimate: fit.t_max,
        fit_method: FIT_METHOD,
        fit_residual: fit.fit_residual,
        t_last: trace.rows.last().map(|r| r.t).unwrap_or(0.0),
        set,
    })
}

//! Front-speed measurement and refinement studies.
//!
//! The observable is the interface trajectory `xbar(t)`: we fit a
//! least-squares line on a trailing window (transients from compact initial
//! data are long, so the leading part of every run is discarded) and keep the
//! running minimum and maximum of the finite-difference slopes as numeric
//! stand-ins for `liminf` / `limsup` of the front velocity.  Refinement
//! studies halve `(dz, dt)` per level, run the rows concurrently and report a
//! Richardson-extrapolated limit next to the closed-form prediction.

use crate::core::{build_grid, CoreError, Frame, ModelParams, State};
use crate::kinetic::{self, KineticError};
use crate::pde::{self, PdeError, SchemeConfig, TrajectoryPoint};
use crate::waves::{self, WaveError};
use rayon::prelude::*;
use thiserror::Error;

/// Errors from speed measurement and refinement studies.
#[derive(Debug, Error)]
pub enum SpeedError {
    #[error("trajectory has {got} samples, need at least {need}")]
    TooFewPoints { got: usize, need: usize },
    #[error("time stamps must be strictly increasing (violated at sample {index})")]
    NonMonotoneTime { index: usize },
    #[error("window fraction must lie in (0, 1], got {0}")]
    BadWindowFraction(f64),
    #[error("fit window holds {0} samples, need at least 2")]
    WindowTooSmall(usize),
    #[error("refinement study needs at least 2 levels, got {0}")]
    BadLevels(usize),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
}

/// Trailing fraction of the time span used by default when fitting.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;
/// Leading fraction of every trajectory that is always discarded.
pub const DISCARD_FRACTION: f64 = 0.2;
/// Minimum number of samples a trajectory must carry to be fit at all.
pub const MIN_SAMPLES: usize = 20;

/// Least-squares speed fit over a trailing window of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    /// Fitted speed (slope of the regression line).
    pub slope: f64,
    /// Intercept of the regression line.
    pub intercept: f64,
    /// Time stamps of the first and last sample inside the fit window.
    pub window: (f64, f64),
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
    /// Number of samples inside the fit window.
    pub n_points: usize,
    /// Smallest finite-difference slope on the window (liminf proxy).
    pub min_slope: f64,
    /// Largest finite-difference slope on the window (limsup proxy).
    pub max_slope: f64,
}

/// Extracts `(t, xbar)` pairs from a recorded trajectory.
pub fn trajectory_pairs(trajectory: &[TrajectoryPoint]) -> Vec<(f64, f64)> {
    trajectory.iter().map(|p| (p.time, p.xbar)).collect()
}

/// Fits a least-squares line to the trailing `window_fraction` of the
/// trajectory (never closer to the start than the discard fraction) and
/// collects the extreme finite-difference slopes on that window.
pub fn estimate_speed(
    trajectory: &[(f64, f64)],
    window_fraction: f64,
) -> Result<SpeedEstimate, SpeedError> {
    if trajectory.len() < MIN_SAMPLES {
        return Err(SpeedError::TooFewPoints { got: trajectory.len(), need: MIN_SAMPLES });
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(SpeedError::BadWindowFraction(window_fraction));
    }
    for (i, pair) in trajectory.windows(2).enumerate() {
        if !(pair[1].0 > pair[0].0) {
            return Err(SpeedError::NonMonotoneTime { index: i + 1 });
        }
    }
    let t_lo = trajectory[0].0;
    let t_hi = trajectory[trajectory.len() - 1].0;
    let span = t_hi - t_lo;
    let t_start = (t_lo + DISCARD_FRACTION * span).max(t_hi - window_fraction * span);
    let window: Vec<(f64, f64)> =
        trajectory.iter().copied().filter(|&(t, _)| t >= t_start).collect();
    if window.len() < 2 {
        return Err(SpeedError::WindowTooSmall(window.len()));
    }

    let n = window.len() as f64;
    let t_mean = window.iter().map(|&(t, _)| t).sum::<f64>() / n;
    let x_mean = window.iter().map(|&(_, x)| x).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(t, x) in &window {
        cov += (t - t_mean) * (x - x_mean);
        var += (t - t_mean) * (t - t_mean);
    }
    let slope = cov / var;
    let intercept = x_mean - slope * t_mean;
    let ss: f64 = window
        .iter()
        .map(|&(t, x)| {
            let r = x - (slope * t + intercept);
            r * r
        })
        .sum();
    let rms_residual = (ss / n).sqrt();

    let mut min_slope = f64::INFINITY;
    let mut max_slope = f64::NEG_INFINITY;
    for pair in window.windows(2) {
        let s = (pair[1].1 - pair[0].1) / (pair[1].0 - pair[0].0);
        min_slope = min_slope.min(s);
        max_slope = max_slope.max(s);
    }

    Ok(SpeedEstimate {
        slope,
        intercept,
        window: (window[0].0, window[window.len() - 1].0),
        rms_residual,
        n_points: window.len(),
        min_slope,
        max_slope,
    })
}

/// Checks the two one-sided speed bounds on the trailing window: the smallest
/// finite-difference slope may not exceed `sigma_star + tol` and the largest
/// may not fall below `sigma_star - tol`.  Both hold for fronts started from
/// data dominated by the minimal-speed profile.
pub fn speed_bracket_check(
    trajectory: &[(f64, f64)],
    sigma_star: f64,
    tol: f64,
) -> Result<(bool, bool), SpeedError> {
    let est = estimate_speed(trajectory, DEFAULT_WINDOW_FRACTION)?;
    let liminf_ok = est.min_slope <= sigma_star + tol;
    let limsup_ok = est.max_slope >= sigma_star - tol;
    Ok((liminf_ok, limsup_ok))
}

/// One row of a refinement sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub chi: f64,
    /// Inverse velocity scale of the kinetic variant; `None` for parabolic rows.
    pub epsilon: Option<f64>,
    pub dz: f64,
    pub dt: f64,
    pub measured_speed: f64,
    pub predicted_speed: f64,
    /// `|measured - predicted| / predicted`.
    pub rel_error: f64,
}

/// Rows of a refinement study plus the Richardson-extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// One row per level, coarsest first.
    pub rows: Vec<SweepRow>,
    /// Richardson-extrapolated speed from the finest levels; falls back to
    /// the finest measured value when the level ratios are unusable.
    pub extrapolated_speed: Option<f64>,
    /// Observed convergence order `log2` of the level-difference ratio
    /// (needs at least 3 levels).
    pub observed_order: Option<f64>,
}

/// Geometry, horizon and scheme knobs shared by every level of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    /// Cell width of the coarsest level; halved per level.
    pub coarsest_dz: f64,
    /// Fixed time-step-to-cell-width ratio (so refinement is one-parameter).
    pub dt_over_dz: f64,
    /// Final time of every run.
    pub t_end: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Implicitness of the parabolic sub-steps (1/2 is time-centered).
    pub theta: f64,
    /// Approximate spacing of recorded trajectory samples.
    pub sample_spacing: f64,
    /// Trailing fraction of the run handed to the fit.
    pub window_fraction: f64,
}

impl StudyConfig {
    /// Defaults for a parabolic spreading run.  Fronts at or below the
    /// diffusive speed relax only algebraically (the logarithmic front delay
    /// shifts the fitted slope by about `1.5 / t`), so those runs get a much
    /// longer horizon than the biased ones.
    pub fn parabolic_defaults(p: &ModelParams) -> Result<Self, SpeedError> {
        let sigma = waves::minimal_speed(p.chi)?;
        let t_end = if p.chi > 1.0 { 80.0 } else { 200.0 };
        Ok(Self {
            coarsest_dz: 0.1,
            dt_over_dz: (0.8 / p.chi).min(0.4),
            t_end,
            z_min: -20.0,
            z_max: sigma * t_end + 40.0,
            theta: 0.5,
            sample_spacing: 1.0,
            window_fraction: DEFAULT_WINDOW_FRACTION,
        })
    }

    /// Defaults for a two-velocity kinetic spreading run.  The time step is
    /// tied to `epsilon * dz` so the transport sub-step is an exact shift.
    pub fn kinetic_defaults(p: &ModelParams) -> Result<Self, SpeedError> {
        let sigma = waves::kinetic_minimal_speed(p.chi, p.epsilon)?;
        let t_end = if p.chi > 1.0 { 40.0 } else { 120.0 };
        Ok(Self {
            coarsest_dz: 0.1,
            dt_over_dz: p.epsilon,
            t_end,
            z_min: -20.0,
            z_max: sigma * t_end + 40.0,
            theta: 0.5,
            sample_spacing: 0.5,
            window_fraction: DEFAULT_WINDOW_FRACTION,
        })
    }
}

fn study_grid(sc: &StudyConfig, dz: f64) -> Result<crate::core::Grid1D, SpeedError> {
    let n_cells = ((sc.z_max - sc.z_min) / dz).round().max(2.0) as usize;
    Ok(build_grid(sc.z_min, sc.z_max, n_cells)?)
}

/// Runs one parabolic spreading simulation at cell width `dz` and fits the
/// trailing-window speed.
pub fn measure_parabolic_speed(
    p: &ModelParams,
    sc: &StudyConfig,
    dz: f64,
) -> Result<SpeedEstimate, SpeedError> {
    let grid = study_grid(sc, dz)?;
    let dt = sc.dt_over_dz * grid.dz;
    let (rho, n) = pde::spreading_initial_data(p, grid, 1.0);
    let state = State::new(rho, n, 0.0, Frame::Static)?;
    let cfg = SchemeConfig::new(dt, sc.theta)?;
    let stride = (sc.sample_spacing / dt).round().max(1.0) as usize;
    let run = pde::run_static(state, p, &cfg, sc.t_end, stride, &[])?;
    estimate_speed(&trajectory_pairs(&run.trajectory), sc.window_fraction)
}

/// Runs one kinetic spreading simulation at cell width `dz` and fits the
/// trailing-window speed.
pub fn measure_kinetic_speed(
    p: &ModelParams,
    sc: &StudyConfig,
    dz: f64,
) -> Result<SpeedEstimate, SpeedError> {
    let grid = study_grid(sc, dz)?;
    let dt = sc.dt_over_dz * grid.dz;
    let ks = kinetic::kinetic_spreading_state(p, grid)?;
    let cfg = SchemeConfig::new(dt, sc.theta)?;
    let stride = (sc.sample_spacing / dt).round().max(1.0) as usize;
    let run = kinetic::run_kinetic(ks, p, &cfg, sc.t_end, stride)?;
    estimate_speed(&trajectory_pairs(&run.trajectory), sc.window_fraction)
}

/// Aitken extrapolation of the three finest rows (assumes halving); returns
/// `(limit, observed_order)`.  With only two rows a first-order scheme is
/// assumed; unusable difference ratios fall back to the finest measurement.
fn extrapolate(speeds: &[f64]) -> (Option<f64>, Option<f64>) {
    match speeds.len() {
        0 => (None, None),
        1 => (Some(speeds[0]), None),
        2 => {
            let (s1, s2) = (speeds[0], speeds[1]);
            (Some(s2 + (s2 - s1)), None)
        }
        _ => {
            let k = speeds.len();
            let (s1, s2, s3) = (speeds[k - 3], speeds[k - 2], speeds[k - 1]);
            let num = s2 - s1;
            let den = s3 - s2;
            if den == 0.0 {
                return (Some(s3), None);
            }
            let ratio = num / den;
            if !ratio.is_finite() || ratio <= 1.15 || ratio >= 16.0 {
                // Differences are not shrinking geometrically; the finest
                // level is the best available answer.
                return (Some(s3), None);
            }
            let order = ratio.log2();
            (Some(s3 + den / (ratio - 1.0)), Some(order))
        }
    }
}

fn assemble_sweep(
    chi: f64,
    epsilon: Option<f64>,
    predicted: f64,
    measurements: Vec<(f64, f64, f64)>,
) -> SweepResult {
    let rows: Vec<SweepRow> = measurements
        .iter()
        .map(|&(dz, dt, measured)| SweepRow {
            chi,
            epsilon,
            dz,
            dt,
            measured_speed: measured,
            predicted_speed: predicted,
            rel_error: (measured - predicted).abs() / predicted,
        })
        .collect();
    let speeds: Vec<f64> = rows.iter().map(|r| r.measured_speed).collect();
    let (extrapolated_speed, observed_order) = extrapolate(&speeds);
    SweepResult { rows, extrapolated_speed, observed_order }
}

/// Refinement study of the parabolic front speed: halves `(dz, dt)` per
/// level starting from the study's coarsest width, measures the trailing
/// speed on every level (levels run concurrently) and extrapolates.
pub fn convergence_study(p: &ModelParams, levels: usize) -> Result<SweepResult, SpeedError> {
    let sc = StudyConfig::parabolic_defaults(p)?;
    convergence_study_with(p, levels, &sc)
}

/// As [`convergence_study`] but with explicit geometry/horizon knobs.
pub fn convergence_study_with(
    p: &ModelParams,
    levels: usize,
    sc: &StudyConfig,
) -> Result<SweepResult, SpeedError> {
    if levels < 2 {
        return Err(SpeedError::BadLevels(levels));
    }
    let predicted = waves::minimal_speed(p.chi)?;
    let measurements: Vec<(f64, f64, f64)> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let dz = sc.coarsest_dz / (1u64 << k) as f64;
            let est = measure_parabolic_speed(p, sc, dz)?;
            Ok((dz, sc.dt_over_dz * dz, est.slope))
        })
        .collect::<Result<_, SpeedError>>()?;
    Ok(assemble_sweep(p.chi, None, predicted, measurements))
}

/// Refinement study of the kinetic front speed against the subsonic
/// minimal-speed formula.
pub fn kinetic_convergence_study(
    p: &ModelParams,
    levels: usize,
) -> Result<SweepResult, SpeedError> {
    let sc = StudyConfig::kinetic_defaults(p)?;
    kinetic_convergence_study_with(p, levels, &sc)
}

/// As [`kinetic_convergence_study`] but with explicit knobs.
pub fn kinetic_convergence_study_with(
    p: &ModelParams,
    levels: usize,
    sc: &StudyConfig,
) -> Result<SweepResult, SpeedError> {
    if levels < 2 {
        return Err(SpeedError::BadLevels(levels));
    }
    let predicted = waves::kinetic_minimal_speed(p.chi, p.epsilon)?;
    let measurements: Vec<(f64, f64, f64)> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let dz = sc.coarsest_dz / (1u64 << k) as f64;
            let est = measure_kinetic_speed(p, sc, dz)?;
            Ok((dz, sc.dt_over_dz * dz, est.slope))
        })
        .collect::<Result<_, SpeedError>>()?;
    Ok(assemble_sweep(p.chi, Some(p.epsilon), predicted, measurements))
}

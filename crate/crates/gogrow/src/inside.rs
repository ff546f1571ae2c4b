//! Neutral-fraction dynamics inside a traveling wave.
//!
//! A passive label `nu` carried by the population obeys
//! `d/dt nu = d2/dz2 nu + beta(z) d/dz nu` in the wave frame, with
//! `beta = sigma - chi*[z <= 0] + 2 rho'(z)/rho(z)`. The drift derives from a
//! potential `V` (`V' = beta`, `V(0) = 0`), and the weight `exp(V)` decides
//! the fate of diversity behind the front: when `exp(V)` is integrable
//! (large bias `chi > 1` at the minimal speed) every initial fraction
//! converges exponentially, at rate `gamma = min(sigma^2-4, 1/chi^2)/4`, to
//! its weighted mean — the pushed regime. Otherwise only the founders near
//! the front survive and `nu` vanishes on every interval moving with the
//! wave — the pulled regime. The symmetrized operator
//! `-d2/dz2 + beta^2/4 + beta'/2` makes the gap checkable by a direct
//! eigensolve.

use crate::core::{integrate, CoreError, Field, Grid1D};
use crate::linalg::SymTridiag;
use crate::pde::{advective_upwind, theta_diffusion, DiffusionBc, PdeError, SchemeConfig, CFL_LIMIT};
use crate::waves::{minimal_speed, Regime, WaveProfile};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InsideError {
    #[error("weight exp(V) is integrable only for chi > 1 at the minimal speed (chi = {chi}, sigma = {sigma})")]
    NotPushed { chi: f64, sigma: f64 },
    #[error("sigma = {sigma} is not the minimal speed {sigma_star}")]
    NotMinimalSpeed { sigma: f64, sigma_star: f64 },
    #[error("drift CFL violated: Courant number {courant} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },
    #[error("fraction left its initial bounds [{lo}, {hi}]: reached {value:.6e}")]
    BoundsViolated { lo: f64, hi: f64, value: f64 },
    #[error("need at least 10 samples to classify (got {0})")]
    TooFewSamples(usize),
    #[error("domain too narrow: exp(V/2) = {end_weight:.3e} at an end (must be < 1e-8)")]
    DomainTooNarrow { end_weight: f64 },
    #[error("eigenvector boundary mass {mass:.3e} exceeds 1e-6; widen the domain")]
    BoundaryContamination { mass: f64 },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

// ---------------------------------------------------------------------------
// drift
// ---------------------------------------------------------------------------

/// Drift field of the neutral-fraction equation for one wave profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub sigma: f64,
    pub chi: f64,
    pub profile: WaveProfile,
}

/// Packages the closed-form drift `beta` and potential `V` of a wave.
pub fn build_drift(wp: &WaveProfile) -> DriftSpec {
    DriftSpec { sigma: wp.sigma, chi: wp.chi, profile: *wp }
}

impl DriftSpec {
    /// `beta(z) = sigma - chi*[z <= 0] + 2 rho'(z)/rho(z)`; the profile is
    /// constant behind the interface, so `beta = sigma - chi` there.
    pub fn beta(&self, z: f64) -> f64 {
        if z <= 0.0 {
            self.sigma - self.chi
        } else {
            self.sigma + 2.0 * self.profile.derivative(z) / self.profile.value(z)
        }
    }

    /// Potential with `V' = beta` and `V(0) = 0`, in exact antiderivative
    /// form: `(sigma - chi) z` behind, `sigma z + 2 ln(rho(z)/rho(0))` ahead.
    pub fn potential(&self, z: f64) -> f64 {
        if z <= 0.0 {
            (self.sigma - self.chi) * z
        } else {
            self.sigma * z + 2.0 * (self.profile.value(z) / self.profile.a_left).ln()
        }
    }

    /// `exp(V(z))`.
    pub fn weight(&self, z: f64) -> f64 {
        self.potential(z).exp()
    }

    /// Whether `exp(V)` is integrable on the line — true exactly in the
    /// pushed regime (large bias at the minimal speed).
    pub fn integrable_weight(&self) -> bool {
        matches!(self.profile.regime, Regime::CriticalLargeBias { .. })
    }
}

// ---------------------------------------------------------------------------
// fraction evolution
// ---------------------------------------------------------------------------

/// A neutral fraction riding the wave, with its drift.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionState {
    pub nu: Field,
    pub time: f64,
    pub drift: DriftSpec,
}

impl FractionState {
    pub fn new(nu: Field, time: f64, drift: DriftSpec) -> Result<Self, InsideError> {
        nu.check_finite()?;
        Ok(Self { nu, time, drift })
    }
}

/// One step of the drift-diffusion equation: explicit upwind drift, then
/// theta-implicit diffusion. Constants are exact fixed points of both
/// sub-steps; leaving the initial bounds by more than 1e-10 is reported as a
/// scheme bug.
pub fn neutral_step(fs: &FractionState, cfg: &SchemeConfig) -> Result<FractionState, InsideError> {
    cfg.validate().map_err(InsideError::Pde)?;
    let grid = fs.nu.grid;
    let (dz, dt) = (grid.dz, cfg.dt);
    let betas: Vec<f64> = grid.centers().map(|z| fs.drift.beta(z)).collect();
    let b_max = betas.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let courant = b_max * dt / dz;
    if courant > CFL_LIMIT {
        return Err(InsideError::CflViolation { courant, limit: CFL_LIMIT });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &fs.nu.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mut vals = advective_upwind(&fs.nu.values, &betas, dt, dz);
    vals = theta_diffusion(&vals, 1.0, dt, dz, cfg.theta, DiffusionBc::ZeroFlux);
    for &v in &vals {
        if v < lo - 1e-10 || v > hi + 1e-10 {
            return Err(InsideError::BoundsViolated { lo, hi, value: v });
        }
    }
    Ok(FractionState { nu: Field::new(grid, vals), time: fs.time + dt, drift: fs.drift })
}

/// Weighted mean `<nu0> = int nu0 exp(V) / int exp(V)`; defined only when
/// the weight is integrable (pushed regime).
pub fn weighted_mean(nu0: &Field, drift: &DriftSpec) -> Result<f64, InsideError> {
    if !drift.integrable_weight() {
        return Err(InsideError::NotPushed { chi: drift.chi, sigma: drift.sigma });
    }
    let w = Field::from_fn(nu0.grid, |z| drift.weight(z));
    let num = integrate(nu0, Some(&w))?;
    let den = integrate(&Field::constant(nu0.grid, 1.0), Some(&w))?;
    Ok(num / den)
}

/// Weighted L2 distance `||nu - level||` in the `exp(V)` inner product.
pub fn weighted_distance(nu: &Field, level: f64, drift: &DriftSpec) -> Result<f64, InsideError> {
    if !drift.integrable_weight() {
        return Err(InsideError::NotPushed { chi: drift.chi, sigma: drift.sigma });
    }
    let dev = Field::new(nu.grid, nu.values.iter().map(|v| (v - level) * (v - level)).collect());
    let w = Field::from_fn(nu.grid, |z| drift.weight(z));
    Ok(integrate(&dev, Some(&w))?.max(0.0).sqrt())
}

/// Sup norm of `nu` over `[a, z_max - 10]` — the pulled-regime metric, kept
/// clear of the right boundary.
pub fn sup_tail_metric(nu: &Field, a: f64) -> f64 {
    let cutoff = nu.grid.z_max - 10.0;
    nu.grid
        .centers()
        .enumerate()
        .filter(|&(_, z)| z >= a && z <= cutoff)
        .map(|(i, _)| nu.values[i].abs())
        .fold(0.0f64, f64::max)
}

/// Spectral gap `gamma = min(sigma^2 - 4, 1/chi^2) / 4` of the pushed
/// regime; requires `chi > 1` and `sigma` equal to the minimal speed.
pub fn spectral_gap(chi: f64, sigma: f64) -> Result<f64, InsideError> {
    if !(chi > 1.0) {
        return Err(InsideError::NotPushed { chi, sigma });
    }
    let star = minimal_speed(chi).map_err(|_| InsideError::NotPushed { chi, sigma })?;
    if (sigma - star).abs() > 1e-12 * star {
        return Err(InsideError::NotMinimalSpeed { sigma, sigma_star: star });
    }
    Ok(0.25 * (sigma * sigma - 4.0).min(1.0 / (chi * chi)))
}

// ---------------------------------------------------------------------------
// discrete spectrum of the symmetrized operator
// ---------------------------------------------------------------------------

/// Validation summary of the pushed spectral picture.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gamma_formula: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Weighted mean of the canonical founder fraction `[z <= 0]`.
    pub mean_weight: f64,
    /// Cosine similarity of the bottom eigenvector to the sampled
    /// `exp(V/2)` ground state (1 means perfect alignment).
    pub cosine_half_weight: f64,
    pub eigenvalues: Vec<f64>,
}

/// Symmetric tridiagonal discretization of `-d2/dz2 + beta^2/4 + beta'/2`
/// built as the exact similarity transform of the weighted divergence form
/// `-(1/w) d/dz (w d/dz .)` with `w = exp(V)`:
///
///   diag_i = (w_{i+1/2} + w_{i-1/2}) / (w_i dz^2)
///   off_i  = -w_{i+1/2} / (dz^2 sqrt(w_i w_{i+1}))
///
/// evaluated through ratios `exp(V(face) - V(center))`, so the magnitude of
/// `V` never enters. Boundary faces carry zero flux. By construction the
/// sampled `exp(V/2)` is an exact null vector at every resolution — the
/// kink of `V` at the interface costs nothing because the potential enters
/// only through face/center differences, never through `beta'`.
pub(crate) fn assemble_symmetrized(potential: impl Fn(f64) -> f64, grid: Grid1D) -> SymTridiag {
    let n = grid.n_cells;
    let dz = grid.dz;
    let inv2 = 1.0 / (dz * dz);
    let v_center: Vec<f64> = grid.centers().map(&potential).collect();
    let v_face: Vec<f64> = (0..=n).map(|f| potential(grid.z_min + f as f64 * dz)).collect();
    let mut diag = vec![0.0; n];
    for (i, d) in diag.iter_mut().enumerate() {
        let right = if i + 1 < n { (v_face[i + 1] - v_center[i]).exp() } else { 0.0 };
        let left = if i > 0 { (v_face[i] - v_center[i]).exp() } else { 0.0 };
        *d = (right + left) * inv2;
    }
    let off: Vec<f64> = (0..n - 1)
        .map(|i| -inv2 * (v_face[i + 1] - 0.5 * (v_center[i] + v_center[i + 1])).exp())
        .collect();
    SymTridiag { diag, off }
}

/// Assembles the symmetrized operator for a pushed drift on `grid`, solves
/// for the `k` smallest eigenvalues, and validates the spectral picture:
/// `lambda0` is (numerically) the simple zero eigenvalue with eigenvector
/// proportional to `exp(V/2)`, and `lambda1` sits at or above the gap.
pub fn discrete_spectrum(
    drift: &DriftSpec,
    grid: Grid1D,
    k: usize,
) -> Result<GapReport, InsideError> {
    if !drift.integrable_weight() {
        return Err(InsideError::NotPushed { chi: drift.chi, sigma: drift.sigma });
    }
    let half_weight_lo = (0.5 * drift.potential(grid.center(0))).exp();
    let half_weight_hi = (0.5 * drift.potential(grid.center(grid.n_cells - 1))).exp();
    let end_weight = half_weight_lo.max(half_weight_hi);
    if end_weight >= 1e-8 {
        return Err(InsideError::DomainTooNarrow { end_weight });
    }
    let mat = assemble_symmetrized(|z| drift.potential(z), grid);
    let eigenvalues = mat.smallest_eigenvalues(k.max(2));
    let vec0 = mat.eigenvector(eigenvalues[0]);
    let vmax = vec0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mass = (vec0[0].abs() + vec0[vec0.len() - 1].abs()) / vmax;
    if mass > 1e-6 {
        return Err(InsideError::BoundaryContamination { mass });
    }
    // Alignment with the analytic ground state, sampled on cell centers.
    // Shift the potential by its maximum before exponentiating so huge
    // negative values cannot underflow the comparison.
    let v_peak = grid.centers().map(|z| drift.potential(z)).fold(f64::NEG_INFINITY, f64::max);
    let ground: Vec<f64> =
        grid.centers().map(|z| (0.5 * (drift.potential(z) - v_peak)).exp()).collect();
    let dot: f64 = vec0.iter().zip(&ground).map(|(a, b)| a * b).sum();
    let nv: f64 = vec0.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ng: f64 = ground.iter().map(|b| b * b).sum::<f64>().sqrt();
    let cosine_half_weight = (dot / (nv * ng)).abs();
    let founders = Field::from_fn(grid, |z| if z <= 0.0 { 1.0 } else { 0.0 });
    let mean_weight = weighted_mean(&founders, drift)?;
    let gamma_formula = spectral_gap(drift.chi, drift.sigma)?;
    Ok(GapReport {
        gamma_formula,
        lambda0: eigenvalues[0],
        lambda1: eigenvalues[1],
        mean_weight,
        cosine_half_weight,
        eigenvalues,
    })
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// Exponential convergence to the weighted mean at the given fitted rate.
    Pushed(f64),
    /// Decay to zero on front-following intervals without a rate.
    Pulled,
    Inconclusive,
}

/// Classifies a decay series `(t, metric)` against the drift's regime:
/// log-linear decay at (at least 90% of) the gap rate means pushed; decay of
/// the sup metric below 1e-2 with a non-integrable weight means pulled.
/// An identically-zero metric (constant fraction) is pushed by convention.
pub fn classify(series: &[(f64, f64)], drift: &DriftSpec) -> Result<Classification, InsideError> {
    if series.len() < 10 {
        return Err(InsideError::TooFewSamples(series.len()));
    }
    let max_metric = series.iter().fold(0.0f64, |m, &(_, v)| m.max(v));
    if max_metric <= 1e-14 {
        return Ok(Classification::Pushed(f64::INFINITY));
    }
    if drift.integrable_weight() {
        let gamma = spectral_gap(drift.chi, drift.sigma)?;
        let pts: Vec<(f64, f64)> =
            series.iter().filter(|&&(_, v)| v > 0.0).map(|&(t, v)| (t, v.ln())).collect();
        if pts.len() < 10 {
            return Ok(Classification::Inconclusive);
        }
        let (slope, r2) = fit_line(&pts);
        if r2 >= 0.98 && slope <= -0.9 * gamma {
            return Ok(Classification::Pushed(-slope));
        }
        Ok(Classification::Inconclusive)
    } else {
        let first = series.first().unwrap().1;
        let last = series.last().unwrap().1;
        if last <= 1e-2 && last <= 0.05 * first.max(1e-12) {
            Ok(Classification::Pulled)
        } else {
            Ok(Classification::Inconclusive)
        }
    }
}

/// Least-squares slope and R^2 of `y` against `x`.
fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let syy: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let cov = n * sxy - sx * sy;
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    let slope = cov / var_x;
    let r2 = if var_y <= 0.0 { 1.0 } else { (cov * cov) / (var_x * var_y) };
    (slope, r2)
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

/// A fraction run with its decay series.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionRun {
    pub final_state: FractionState,
    /// `(t, metric)` samples: weighted distance to the mean (pushed) or
    /// sup over `[-10, z_max-10]` (otherwise).
    pub series: Vec<(f64, f64)>,
    /// The weighted mean of the initial fraction, when defined.
    pub mean: Option<f64>,
}

/// Evolves a fraction to `t_end`, recording the regime-appropriate decay
/// metric every `record_stride` steps.
pub fn evolve_fraction(
    fs: FractionState,
    cfg: &SchemeConfig,
    t_end: f64,
    record_stride: usize,
) -> Result<FractionRun, InsideError> {
    cfg.validate().map_err(InsideError::Pde)?;
    let stride = record_stride.max(1);
    let n_steps = ((t_end - fs.time) / cfg.dt).round().max(1.0) as usize;
    let pushed = fs.drift.integrable_weight();
    let mean = if pushed { Some(weighted_mean(&fs.nu, &fs.drift)?) } else { None };
    let metric = |state: &FractionState| -> Result<f64, InsideError> {
        match mean {
            Some(m) => weighted_distance(&state.nu, m, &state.drift),
            None => Ok(sup_tail_metric(&state.nu, -10.0)),
        }
    };
    let mut state = fs;
    let mut series = Vec::with_capacity(n_steps / stride + 2);
    series.push((state.time, metric(&state)?));
    for k in 1..=n_steps {
        state = neutral_step(&state, cfg)?;
        if k % stride == 0 || k == n_steps {
            series.push((state.time, metric(&state)?));
        }
    }
    Ok(FractionRun { final_state: state, series, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::build_grid;
    use crate::waves::parabolic_profile;

    fn pushed_drift() -> DriftSpec {
        build_drift(&parabolic_profile(2.0, 2.5, 1.0).unwrap())
    }

    fn pulled_drift() -> DriftSpec {
        build_drift(&parabolic_profile(0.5, 2.0, 1.0).unwrap())
    }

    #[test]
    fn drift_examples() {
        let d = pushed_drift();
        assert!((d.beta(-1.0) - 0.5).abs() < 1e-14);
        assert!((d.beta(0.0) - 0.5).abs() < 1e-14);
        assert!((d.beta(1.0) + 1.5).abs() < 1e-13);
        assert!((d.beta(7.0) + 1.5).abs() < 1e-12);

        let d = pulled_drift();
        assert!((d.beta(-3.0) - 1.5).abs() < 1e-14);
        for z in [0.5, 1.0, 4.0] {
            assert!((d.beta(z) - 1.0 / (0.5 * z + 1.0)).abs() < 1e-12, "beta({z})");
        }

        let d1 = build_drift(&parabolic_profile(1.0, 2.0, 1.0).unwrap());
        assert!(d1.beta(2.0).abs() < 1e-13);
    }

    #[test]
    fn potential_is_antiderivative_of_beta() {
        let h = 1e-6;
        for d in [
            pushed_drift(),
            pulled_drift(),
            build_drift(&parabolic_profile(0.5, 2.5, 1.3).unwrap()),
            build_drift(&parabolic_profile(1.0, 2.0, 0.7).unwrap()),
        ] {
            assert_eq!(d.potential(0.0), 0.0);
            assert!(d.potential(1e-12).abs() < 1e-10, "potential jumps at 0");
            for z in [-4.0, -1.0, 0.5, 1.5, 4.0] {
                let numeric = (d.potential(z + h) - d.potential(z - h)) / (2.0 * h);
                assert!(
                    (numeric - d.beta(z)).abs() < 1e-5,
                    "V' != beta at z = {z}: {numeric} vs {}",
                    d.beta(z)
                );
            }
        }
    }

    #[test]
    fn constants_are_exact_fixed_points() {
        let g = build_grid(-30.0, 30.0, 1200).unwrap();
        let mut fs =
            FractionState::new(Field::constant(g, 0.42), 0.0, pushed_drift()).unwrap();
        let cfg = SchemeConfig::new(0.01, 1.0).unwrap();
        for _ in 0..100 {
            fs = neutral_step(&fs, &cfg).unwrap();
        }
        for &v in &fs.nu.values {
            assert!((v - 0.42).abs() < 1e-13, "constant drifted to {v}");
        }
    }

    #[test]
    fn maximum_principle_on_indicator_data() {
        let g = build_grid(-30.0, 30.0, 1200).unwrap();
        let nu0 = Field::from_fn(g, |z| if z <= 0.0 { 1.0 } else { 0.0 });
        let mut fs = FractionState::new(nu0, 0.0, pushed_drift()).unwrap();
        let cfg = SchemeConfig::new(0.01, 1.0).unwrap();
        for _ in 0..200 {
            fs = neutral_step(&fs, &cfg).unwrap(); // errors if bounds break
        }
        for &v in &fs.nu.values {
            assert!((-1e-10..=1.0 + 1e-10).contains(&v));
        }
    }

    #[test]
    fn weighted_mean_examples() {
        let g = build_grid(-40.0, 40.0, 4000).unwrap();
        let d = pushed_drift();
        let c = Field::constant(g, 0.37);
        assert!((weighted_mean(&c, &d).unwrap() - 0.37).abs() < 1e-12);
        let founders = Field::from_fn(g, |z| if z <= 0.0 { 1.0 } else { 0.0 });
        let m = weighted_mean(&founders, &d).unwrap();
        assert!((m - 0.75).abs() < 2e-3, "founder mean {m}");
        assert!(matches!(
            weighted_mean(&c, &pulled_drift()),
            Err(InsideError::NotPushed { .. })
        ));
    }

    #[test]
    fn spectral_gap_examples() {
        assert!((spectral_gap(2.0, 2.5).unwrap() - 0.0625).abs() < 1e-15);
        assert!((spectral_gap(1.5, 1.5 + 2.0 / 3.0).unwrap() - 1.0 / 9.0).abs() < 1e-14);
        assert!((spectral_gap(3.0, 10.0 / 3.0).unwrap() - 1.0 / 36.0).abs() < 1e-14);
        assert!(matches!(spectral_gap(0.5, 2.0), Err(InsideError::NotPushed { .. })));
        assert!(matches!(
            spectral_gap(2.0, 3.0),
            Err(InsideError::NotMinimalSpeed { .. })
        ));
    }

    #[test]
    fn discrete_spectrum_reproduces_gap() {
        let g = build_grid(-80.0, 80.0, 3200).unwrap();
        let d = pushed_drift();
        let report = discrete_spectrum(&d, g, 2).unwrap();
        assert!(report.lambda0.abs() < 1e-10, "lambda0 = {}", report.lambda0);
        assert!(
            report.lambda1 >= 0.95 * report.gamma_formula,
            "lambda1 = {} vs gamma {}",
            report.lambda1,
            report.gamma_formula
        );
        assert!((report.mean_weight - 0.75).abs() < 2e-3);
        assert!(
            report.cosine_half_weight >= 0.999,
            "cosine {}",
            report.cosine_half_weight
        );

        // too-narrow domain is rejected before assembly
        let narrow = build_grid(-10.0, 10.0, 200).unwrap();
        assert!(matches!(
            discrete_spectrum(&d, narrow, 2),
            Err(InsideError::DomainTooNarrow { .. })
        ));
    }

    #[test]
    fn constant_drift_spectrum_lower_bound() {
        // Constant drift c: the weighted-constant mode survives the zero-flux
        // truncation as an exact null vector, and everything else sits at or
        // above the essential floor c^2/4 of -d2 + c^2/4.
        let g = build_grid(-10.0, 10.0, 400).unwrap();
        let c = 1.2;
        let mat = assemble_symmetrized(|z| c * z, g);
        let eigs = mat.smallest_eigenvalues(3);
        assert!(eigs[0].abs() < 1e-10, "null mode {}", eigs[0]);
        for lam in &eigs[1..] {
            assert!(*lam >= c * c / 4.0 - 1e-8, "eigenvalue {lam} below potential floor");
        }
    }

    #[test]
    fn pushed_decay_inequality_holds() {
        let g = build_grid(-40.0, 40.0, 1600).unwrap();
        let d = pushed_drift();
        let gamma = spectral_gap(2.0, 2.5).unwrap();
        let cfg = SchemeConfig::new(0.02, 1.0).unwrap();
        let profiles: Vec<Field> = vec![
            Field::from_fn(g, |z| if z <= 0.0 { 1.0 } else { 0.0 }),
            Field::from_fn(g, |z| {
                if (-5.0..5.0).contains(&z) { (std::f64::consts::PI * z / 10.0).cos().powi(2) } else { 0.0 }
            }),
            Field::from_fn(g, |z| (-(z + 3.0) * (z + 3.0)).exp().min(1.0)),
            Field::from_fn(g, |z| if (-10.0..-2.0).contains(&z) { 0.8 } else { 0.1 }),
            Field::from_fn(g, |z| {
                if (-8.0..6.0).contains(&z) { 0.5 + 0.4 * (0.7 * z).sin() } else { 0.0 }
            }),
        ];
        for nu0 in profiles {
            let fs = FractionState::new(nu0, 0.0, d).unwrap();
            let run = evolve_fraction(fs, &cfg, 10.0, 25).unwrap();
            let m0 = run.series[0].1;
            for &(t, metric) in &run.series {
                let bound = 1.03 * m0 * (-gamma * t).exp();
                assert!(metric <= bound, "metric {metric} above bound {bound} at t = {t}");
            }
        }
    }

    #[test]
    fn partition_fractions_still_sum_to_one() {
        let g = build_grid(-30.0, 30.0, 1200).unwrap();
        let d = pushed_drift();
        let cfg = SchemeConfig::new(0.02, 1.0).unwrap();
        let f1 = Field::from_fn(g, |z| if z <= -2.0 { 1.0 } else { 0.0 });
        let f2 = Field::from_fn(g, |z| if (-2.0..3.0).contains(&z) { 1.0 } else { 0.0 });
        let f3 = Field::from_fn(g, |z| if z >= 3.0 { 1.0 } else { 0.0 });
        let mut parts: Vec<FractionState> = [f1, f2, f3]
            .into_iter()
            .map(|f| FractionState::new(f, 0.0, d).unwrap())
            .collect();
        for _ in 0..100 {
            for p in parts.iter_mut() {
                *p = neutral_step(p, &cfg).unwrap();
            }
        }
        for i in 0..g.n_cells {
            let s: f64 = parts.iter().map(|p| p.nu.values[i]).sum();
            assert!((s - 1.0).abs() < 1e-12, "partition sum {s} at cell {i}");
        }
    }

    #[test]
    fn pulled_fraction_vanishes_on_the_front() {
        let g = build_grid(-80.0, 40.0, 2400).unwrap();
        let d = pulled_drift();
        let nu0 = Field::from_fn(g, |z| if z <= 0.0 { 1.0 } else { 0.0 });
        let fs = FractionState::new(nu0, 0.0, d).unwrap();
        let cfg = SchemeConfig::new(0.02, 1.0).unwrap();
        let run = evolve_fraction(fs, &cfg, 30.0, 50).unwrap();
        let last = run.series.last().unwrap().1;
        assert!(last < 1e-2, "sup metric still {last} at t = 30");
        assert_eq!(classify(&run.series, &d).unwrap(), Classification::Pulled);
    }

    #[test]
    fn classify_synthetic_series() {
        let d = pushed_drift();
        let series: Vec<(f64, f64)> =
            (0..=20).map(|k| (k as f64, 0.7 * (-0.0625 * k as f64).exp())).collect();
        match classify(&series, &d).unwrap() {
            Classification::Pushed(rate) => assert!(rate >= 0.9 * 0.0625),
            other => panic!("expected pushed, got {other:?}"),
        }
        let zeros: Vec<(f64, f64)> = (0..=12).map(|k| (k as f64, 0.0)).collect();
        assert_eq!(classify(&zeros, &d).unwrap(), Classification::Pushed(f64::INFINITY));
        let short = vec![(0.0, 1.0); 5];
        assert!(matches!(classify(&short, &d), Err(InsideError::TooFewSamples(5))));
        // slow decay in a pushed drift is inconclusive
        let slow: Vec<(f64, f64)> =
            (0..=20).map(|k| (k as f64, 0.7 * (-0.01 * k as f64).exp())).collect();
        assert_eq!(classify(&slow, &d).unwrap(), Classification::Inconclusive);
    }
}

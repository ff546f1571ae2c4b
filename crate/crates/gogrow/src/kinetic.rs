//! Two-velocity kinetic variant with stiff relaxation.
//!
//! Particles move at velocities `+1/eps` (`f_plus`) and `-1/eps` (`f_minus`)
//! and relax at rate `1/eps^2` toward a local Maxwellian whose weights are
//! `(1, 1)` above the nutrient threshold and `(1 + eps*chi, 1 - eps*chi)`
//! (biased along the nutrient gradient) below it. Growth deposits new mass
//! uniformly on both velocities; the nutrient is stepped as in the parabolic
//! solver. As `eps -> 0` the front speed approaches the parabolic one; for
//! `eps >= 1` no subsonic traveling wave exists, which the characteristic
//! polynomial of the transmission matrix makes checkable.

use crate::core::{CoreError, Field, Grid1D, ModelParams};
use crate::pde::{self, PdeError, SchemeConfig, TrajectoryPoint, CFL_LIMIT};
use crate::waves::{self, WaveError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KineticError {
    #[error("epsilon must be positive (got {0})")]
    BadEpsilon(f64),
    #[error("speed {0} is sonic (equals 1/epsilon); polynomial degenerates")]
    SonicSpeed(f64),
    #[error("speed {sigma} is supersonic (sonic speed {sonic}); query undefined")]
    SupersonicQuery { sigma: f64, sonic: f64 },
    #[error("epsilon*chi = {0} must be < 1 for the biased Maxwellian")]
    MaxwellianBias(f64),
    #[error("transport CFL violated: Courant number {courant} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

// ---------------------------------------------------------------------------
// state
// ---------------------------------------------------------------------------

/// Kinetic state: the two velocity components, the nutrient, and `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub f_plus: Field,
    pub f_minus: Field,
    pub nutrient: Field,
    pub time: f64,
    pub epsilon: f64,
}

impl KineticState {
    pub fn new(
        f_plus: Field,
        f_minus: Field,
        nutrient: Field,
        time: f64,
        epsilon: f64,
    ) -> Result<Self, KineticError> {
        if f_plus.grid != f_minus.grid || f_plus.grid != nutrient.grid {
            return Err(KineticError::Core(CoreError::GridMismatch));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(KineticError::BadEpsilon(epsilon));
        }
        f_plus.check_finite()?;
        f_minus.check_finite()?;
        nutrient.check_finite()?;
        for f in [&f_plus, &f_minus] {
            if let Some(&v) = f.values.iter().find(|&&v| v < 0.0) {
                return Err(KineticError::Core(CoreError::NegativeDensity(v)));
            }
        }
        let (mut n_min, mut n_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &nutrient.values {
            n_min = n_min.min(v);
            n_max = n_max.max(v);
        }
        if n_min < 0.0 || n_max > 1.0 {
            return Err(KineticError::Core(CoreError::NutrientRange { min: n_min, max: n_max }));
        }
        Ok(Self { f_plus, f_minus, nutrient, time, epsilon })
    }

    pub fn grid(&self) -> Grid1D {
        self.f_plus.grid
    }

    /// Density `rho = (f_plus + f_minus) / 2`.
    pub fn rho(&self) -> Field {
        Field::new(
            self.grid(),
            self.f_plus
                .values
                .iter()
                .zip(&self.f_minus.values)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// characteristic polynomial of the transmission matrix ahead of the front
// ---------------------------------------------------------------------------

/// Quadratic `P(X) = a X^2 + b X + c` governing the spatial decay modes
/// ahead of the front in the frame moving at `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoly {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub eps: f64,
}

/// Roots of the quadratic as (real, imaginary) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootPair {
    Real(f64, f64),
    Complex { re: f64, im: f64 },
}

impl CharPoly {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// `b^2 - 4ac`.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    /// The same discriminant in product form,
    /// `sigma^2 (eps^-2 + 1)^2 - 4 eps^-4`, which factors the F/KPP speed.
    pub fn discriminant_closed_form(&self) -> f64 {
        let e2 = self.eps.powi(-2);
        self.sigma * self.sigma * (e2 + 1.0) * (e2 + 1.0) - 4.0 * e2 * e2
    }

    /// Numerically stable roots (conjugate pair when the discriminant is
    /// negative).
    pub fn roots(&self) -> RootPair {
        let disc = self.discriminant();
        if disc < 0.0 {
            return RootPair::Complex { re: -self.b / (2.0 * self.a), im: (-disc).sqrt() / (2.0 * self.a.abs()) };
        }
        let q = -0.5 * (self.b + self.b.signum() * disc.sqrt());
        if q == 0.0 {
            // b = 0 and disc = 0 would need c = 0; both roots vanish
            return RootPair::Real(0.0, 0.0);
        }
        RootPair::Real(q / self.a, self.c / q)
    }
}

/// Characteristic polynomial with `a = eps^-2 - sigma^2`,
/// `b = sigma (eps^-2 - 1)`, `c = eps^-2`; undefined at the sonic speed.
pub fn characteristic_polynomial(sigma: f64, eps: f64) -> Result<CharPoly, KineticError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(KineticError::BadEpsilon(eps));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(KineticError::SonicSpeed(sigma));
    }
    let sonic = 1.0 / eps;
    if (sigma - sonic).abs() <= 1e-12 * sonic.max(1.0) {
        return Err(KineticError::SonicSpeed(sigma));
    }
    let e2 = eps.powi(-2);
    Ok(CharPoly { a: e2 - sigma * sigma, b: sigma * (e2 - 1.0), c: e2, sigma, eps })
}

/// Whether a subsonic traveling wave exists at speed `sigma`: never in the
/// hyperbolic regime `eps >= 1`; otherwise exactly when
/// `g(sigma) = mu_plus(sigma) * (sigma - chi) - 1 >= 0`, `g` increasing.
pub fn subsonic_wave_exists(chi: f64, eps: f64, sigma: f64) -> Result<bool, KineticError> {
    if !(chi > 0.0) || !chi.is_finite() {
        return Err(KineticError::Wave(WaveError::ChiNotPositive));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(KineticError::BadEpsilon(eps));
    }
    let sonic = 1.0 / eps;
    if !(sigma < sonic) {
        return Err(KineticError::SupersonicQuery { sigma, sonic });
    }
    if eps >= 1.0 {
        return Ok(false);
    }
    match waves::kinetic_decay_roots(sigma, eps) {
        Ok((_, mu_plus)) => Ok(mu_plus * (sigma - chi) - 1.0 >= -1e-12),
        // below the kinetic F/KPP speed the decay modes are oscillatory
        Err(WaveError::ComplexDecay { .. }) => Ok(false),
        Err(e) => Err(KineticError::Wave(e)),
    }
}

// ---------------------------------------------------------------------------
// Maxwellian
// ---------------------------------------------------------------------------

/// Local Maxwellian weights `(m_plus, m_minus)`: unbiased `(1, 1)` above the
/// threshold, tilted by `eps*chi` along the nutrient gradient below it.
/// Always sums to 2.
pub fn maxwellian_weights(
    n: f64,
    dn: f64,
    n_th: f64,
    eps: f64,
    chi: f64,
) -> Result<(f64, f64), KineticError> {
    if !(eps * chi < 1.0) {
        return Err(KineticError::MaxwellianBias(eps * chi));
    }
    if n > n_th {
        Ok((1.0, 1.0))
    } else if dn >= 0.0 {
        Ok((1.0 + eps * chi, 1.0 - eps * chi))
    } else {
        Ok((1.0 - eps * chi, 1.0 + eps * chi))
    }
}

// ---------------------------------------------------------------------------
// time step
// ---------------------------------------------------------------------------

enum Transport {
    ExactShift(usize),
    Upwind(f64),
}

fn transport_mode(dt: f64, eps: f64, dz: f64) -> Result<Transport, KineticError> {
    let courant = dt / (eps * dz);
    let m = courant.round();
    if m >= 1.0 && (courant - m).abs() <= 1e-9 * m.max(1.0) {
        return Ok(Transport::ExactShift(m as usize));
    }
    if courant > CFL_LIMIT {
        return Err(KineticError::CflViolation { courant, limit: CFL_LIMIT });
    }
    Ok(Transport::Upwind(courant))
}

fn shift_right(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![values[0]; n];
    for i in m..n {
        out[i] = values[i - m];
    }
    out
}

fn shift_left(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![values[n - 1]; n];
    for i in 0..n.saturating_sub(m) {
        out[i] = values[i + m];
    }
    out
}

fn upwind_right(values: &[f64], c: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = values.to_vec();
    for i in 1..n {
        out[i] = values[i] + c * (values[i - 1] - values[i]);
    }
    out
}

fn upwind_left(values: &[f64], c: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = values.to_vec();
    for i in 0..n - 1 {
        out[i] = values[i] + c * (values[i + 1] - values[i]);
    }
    out
}

/// Clip tiny negative values; log anything beyond the tolerance before
/// clipping it (the step stays usable, the event is reported).
fn clip_negatives(values: &mut [f64], label: &str, time: f64) {
    for (i, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -1e-12 {
                log::warn!("{label} fell to {v:.3e} at cell {i}, t = {time}; clipped");
            }
            *v = 0.0;
        }
    }
}

/// One splitting step: transport (exact shift when `dt/(eps*dz)` is an
/// integer, first-order upwind otherwise), density-conserving relaxation
/// toward the local Maxwellian (with the damping factor chosen so the
/// shift-and-damp walk reproduces the continuum diffusivity exactly on the
/// exact-shift path, and backward Euler on the upwind path), exponential
/// growth deposited half-and-half, and the nutrient consumption/diffusion
/// update of the parabolic solver.
pub fn kinetic_step(
    ks: &KineticState,
    p: &ModelParams,
    cfg: &SchemeConfig,
) -> Result<KineticState, KineticError> {
    cfg.validate().map_err(KineticError::Pde)?;
    let grid = ks.grid();
    let (dz, dt, eps) = (grid.dz, cfg.dt, ks.epsilon);
    if !(eps * p.chi < 1.0) {
        return Err(KineticError::MaxwellianBias(eps * p.chi));
    }

    let mut fp = ks.f_plus.values.clone();
    let mut fm = ks.f_minus.values.clone();
    let mut n = ks.nutrient.values.clone();

    // (i) free transport at speeds +-1/eps
    let mode = if cfg.advection_enabled { Some(transport_mode(dt, eps, dz)?) } else { None };
    match mode {
        Some(Transport::ExactShift(m)) => {
            fp = shift_right(&fp, m);
            fm = shift_left(&fm, m);
        }
        Some(Transport::Upwind(c)) => {
            fp = upwind_right(&fp, c);
            fm = upwind_left(&fm, c);
        }
        None => {}
    }

    // (ii) relaxation toward the Maxwellian: the deviation from equilibrium
    // is damped by a factor alpha per step, which conserves the local
    // density exactly. Under exact-shift transport the pair (shift, damp)
    // is a persistent random walk with diffusivity
    // (dt/eps^2) * (1 + alpha) / (2 (1 - alpha)); backward Euler
    // (alpha = 1/(1+lambda)) inflates that to 1 + dt/(2 eps^2), which
    // visibly speeds up fronts once dz is no longer small against eps. The
    // damping below makes the walk's diffusivity exactly 1 whenever
    // dt < 2 eps^2 and falls back to full re-equilibration past that.
    let lambda = dt / (eps * eps);
    let alpha = match mode {
        Some(Transport::ExactShift(_)) => ((2.0 - lambda) / (2.0 + lambda)).max(0.0),
        _ => 1.0 / (1.0 + lambda),
    };
    let n_cells = grid.n_cells;
    for i in 0..n_cells {
        let dn = if i + 1 < n_cells {
            (n[i + 1] - n[i]) / dz
        } else {
            (n[i] - n[i - 1]) / dz
        };
        let (m_plus, m_minus) = maxwellian_weights(n[i], dn, p.n_threshold, eps, p.chi)?;
        let rho = 0.5 * (fp[i] + fm[i]);
        let (eq_plus, eq_minus) = (m_plus * rho, m_minus * rho);
        fp[i] = eq_plus + alpha * (fp[i] - eq_plus);
        fm[i] = eq_minus + alpha * (fm[i] - eq_minus);
    }

    // (iii) growth above the threshold, deposited (1/2, 1/2) in velocity
    if cfg.growth_enabled {
        let gain = dt.exp_m1();
        for i in 0..n_cells {
            if n[i] > p.n_threshold {
                let rho = 0.5 * (fp[i] + fm[i]);
                fp[i] += gain * rho;
                fm[i] += gain * rho;
            }
        }
    }

    // (iv) nutrient: exponential consumption, then pinned diffusion
    if cfg.consumption_enabled {
        for i in 0..n_cells {
            let rho = 0.5 * (fp[i] + fm[i]);
            n[i] *= (-dt * rho).exp();
        }
    }
    if cfg.nutrient_diffusion_enabled {
        let left = n[0];
        n = pde::theta_diffusion(
            &n,
            p.diffusion_n,
            dt,
            dz,
            cfg.theta,
            pde::DiffusionBc::Pinned { left, right: 1.0 },
        );
    }

    let time = ks.time + dt;
    clip_negatives(&mut fp, "f_plus", time);
    clip_negatives(&mut fm, "f_minus", time);
    for v in n.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    KineticState::new(
        Field::new(grid, fp),
        Field::new(grid, fm),
        Field::new(grid, n),
        time,
        eps,
    )
}

// ---------------------------------------------------------------------------
// builders and runner
// ---------------------------------------------------------------------------

/// Traveling-wave initial data for the kinetic solver: the closed-form
/// `(f_plus, f_minus)` profile at speed `sigma` and its calibrated nutrient.
pub fn kinetic_wave_state(
    p: &ModelParams,
    sigma: f64,
    grid: Grid1D,
) -> Result<(KineticState, waves::KineticWaveProfile, waves::NutrientProfile), KineticError> {
    let unit = waves::kinetic_profile(p.chi, p.epsilon, sigma, 1.0)?;
    let np = waves::solve_nutrient_profile_kinetic(&unit, p.diffusion_n, p.n_threshold, grid)?;
    let kwp = waves::kinetic_profile(p.chi, p.epsilon, sigma, np.a_left_calibrated)?;
    let mut fp = Vec::with_capacity(grid.n_cells);
    let mut fm = Vec::with_capacity(grid.n_cells);
    for z in grid.centers() {
        let [a, b] = kwp.pair(z);
        fp.push(a.max(0.0));
        fm.push(b.max(0.0));
    }
    let state = KineticState::new(
        Field::new(grid, fp),
        Field::new(grid, fm),
        np.samples.clone(),
        0.0,
        p.epsilon,
    )?;
    Ok((state, kwp, np))
}

/// Spreading initial data: parabolic-style density split evenly between the
/// two velocities, same tanh nutrient ramp as the parabolic runs.
pub fn kinetic_spreading_state(p: &ModelParams, grid: Grid1D) -> Result<KineticState, KineticError> {
    let (rho, n) = pde::spreading_initial_data(p, grid, 1.0);
    let half = Field::new(grid, rho.values.iter().map(|v| 0.5 * v).collect());
    KineticState::new(half.clone(), half, n, 0.0, p.epsilon)
}

/// Result of a kinetic interface-tracking run.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticRun {
    pub final_state: KineticState,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Advances a kinetic state to `t_end`, recording the nutrient-threshold
/// trajectory every `record_stride` steps.
pub fn run_kinetic(
    ks: KineticState,
    p: &ModelParams,
    cfg: &SchemeConfig,
    t_end: f64,
    record_stride: usize,
) -> Result<KineticRun, KineticError> {
    cfg.validate().map_err(KineticError::Pde)?;
    let stride = record_stride.max(1);
    let n_steps = ((t_end - ks.time) / cfg.dt).round().max(1.0) as usize;
    let mut state = ks;
    let mut trajectory = Vec::with_capacity(n_steps / stride + 2);
    trajectory.push(TrajectoryPoint {
        time: state.time,
        xbar: pde::interface_position(&state.nutrient, p.n_threshold)?,
        xdot_ode: 0.0,
        xdot_slope: 0.0,
        mass_rho: pde::discrete_mass(&state.rho()),
        dn_min: pde::monotonicity_margin(&state.nutrient),
    });
    for k in 1..=n_steps {
        let prev_nutrient = state.nutrient.clone();
        state = kinetic_step(&state, p, cfg)?;
        if k % stride == 0 || k == n_steps {
            let (xdot_ode, xdot_slope) = pde::velocity_from_nutrients(
                &prev_nutrient,
                &state.nutrient,
                cfg.dt,
                p.n_threshold,
            )?;
            trajectory.push(TrajectoryPoint {
                time: state.time,
                xbar: pde::interface_position(&state.nutrient, p.n_threshold)?,
                xdot_ode,
                xdot_slope,
                mass_rho: pde::discrete_mass(&state.rho()),
                dn_min: pde::monotonicity_margin(&state.nutrient),
            });
        }
    }
    Ok(KineticRun { final_state: state, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::build_grid;
    use crate::pde::interface_position;
    use crate::waves::kinetic_minimal_speed;

    #[test]
    fn charpoly_example_and_discriminant() {
        let p = characteristic_polynomial(1.6, 0.5).unwrap();
        assert!((p.a - 1.44).abs() < 1e-12);
        assert!((p.b - 4.8).abs() < 1e-12);
        assert!((p.c - 4.0).abs() < 1e-12);
        assert!(p.discriminant().abs() < 1e-9);
        assert!(p.discriminant_closed_form().abs() < 1e-9);
        // the two discriminant forms agree off the critical speed too
        for &(s, e) in &[(0.3, 2.0), (1.2, 0.5), (2.4, 0.3), (0.9, 0.8)] {
            let p = characteristic_polynomial(s, e).unwrap();
            assert!(
                (p.discriminant() - p.discriminant_closed_form()).abs()
                    < 1e-9 * p.discriminant().abs().max(1.0)
            );
        }
        assert!(matches!(
            characteristic_polynomial(2.0, 0.5),
            Err(KineticError::SonicSpeed(_))
        ));
    }

    #[test]
    fn hyperbolic_roots_have_positive_real_part() {
        // eps = 2: all subsonic speeds give decay modes in the wrong
        // half-plane, so no admissible wave tail exists
        let eps = 2.0;
        for k in 1..=50 {
            let sigma = 0.5 / eps * k as f64 / 50.0 * 0.98 + 0.001;
            let p = characteristic_polynomial(sigma, eps).unwrap();
            match p.roots() {
                RootPair::Real(r1, r2) => {
                    assert!(r1 > 0.0 && r2 > 0.0, "real roots {r1}, {r2} at sigma {sigma}")
                }
                RootPair::Complex { re, .. } => {
                    assert!(re > 0.0, "complex re {re} at sigma {sigma}")
                }
            }
            assert!(!subsonic_wave_exists(1.7, eps, sigma).unwrap());
        }
        let p = characteristic_polynomial(0.3, 2.0).unwrap();
        assert!(p.c > 0.0 && p.b < 0.0);
    }

    #[test]
    fn roots_limit_to_parabolic_rates() {
        let sigma = 2.5;
        let p = characteristic_polynomial(sigma, 1e-4).unwrap();
        let (mu_minus, mu_plus) = crate::waves::decay_roots(sigma).unwrap();
        match p.roots() {
            RootPair::Real(r1, r2) => {
                let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                // roots approach -mu_plus and -mu_minus
                assert!((lo + mu_plus).abs() < 1e-4, "{lo} vs {}", -mu_plus);
                assert!((hi + mu_minus).abs() < 1e-4, "{hi} vs {}", -mu_minus);
            }
            other => panic!("expected real roots, got {other:?}"),
        }
    }

    #[test]
    fn roots_match_decay_root_solver() {
        let samples = [
            (0.25, 2.2),
            (0.25, 2.5),
            (0.25, 3.5),
            (0.4, 2.2),
            (0.4, 2.4),
            (0.5, 1.7),
            (0.5, 1.9),
            (0.1, 2.1),
            (0.1, 3.0),
            (0.1, 6.0),
            (0.3, 2.0),
            (0.3, 2.8),
            (0.6, 1.5),
            (0.6, 1.6),
            (0.2, 2.0),
            (0.2, 4.0),
            (0.15, 2.05),
            (0.35, 2.3),
            (0.45, 1.9),
            (0.05, 2.01),
        ];
        for &(eps, sigma) in &samples {
            let kpp = 2.0 / (1.0 + eps * eps);
            assert!(sigma >= kpp - 1e-9, "bad sample ({eps}, {sigma})");
            let (mu_minus, mu_plus) = crate::waves::kinetic_decay_roots(sigma, eps).unwrap();
            let p = characteristic_polynomial(sigma, eps).unwrap();
            match p.roots() {
                RootPair::Real(r1, r2) => {
                    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                    assert!(
                        (lo + mu_plus).abs() < 1e-10 * mu_plus.max(1.0),
                        "({eps},{sigma}): {lo} vs {}",
                        -mu_plus
                    );
                    assert!(
                        (hi + mu_minus).abs() < 1e-10 * mu_minus.max(1.0),
                        "({eps},{sigma}): {hi} vs {}",
                        -mu_minus
                    );
                }
                other => panic!("({eps},{sigma}): expected real roots, got {other:?}"),
            }
        }
    }

    #[test]
    fn wave_existence_matches_minimal_speed() {
        assert!(!subsonic_wave_exists(2.0, 0.4, 2.0).unwrap());
        let star = kinetic_minimal_speed(2.0, 0.4).unwrap();
        assert!((star - 2.5 / 1.16).abs() < 1e-12);
        assert!(subsonic_wave_exists(2.0, 0.4, star).unwrap());
        assert!(subsonic_wave_exists(2.0, 0.4, star + 0.05).unwrap());
        assert!(subsonic_wave_exists(0.5, 0.4, 2.0 / 1.16).unwrap());
        assert!(!subsonic_wave_exists(0.5, 0.4, 2.0 / 1.16 - 1e-3).unwrap());
        assert!(matches!(
            subsonic_wave_exists(1.0, 0.5, 3.0),
            Err(KineticError::SupersonicQuery { .. })
        ));
    }

    #[test]
    fn minimal_speed_monotone_in_chi() {
        let eps = 0.4;
        let mut prev = 0.0;
        for &chi in &[1.1, 1.4, 1.8, 2.1, 2.4] {
            let s = kinetic_minimal_speed(chi, eps).unwrap();
            assert!(s >= prev, "speed dropped at chi {chi}");
            prev = s;
        }
    }

    #[test]
    fn maxwellian_examples() {
        assert_eq!(maxwellian_weights(0.9, 0.3, 0.5, 0.4, 2.0).unwrap(), (1.0, 1.0));
        let (mp, mm) = maxwellian_weights(0.3, 0.7, 0.5, 0.4, 2.0).unwrap();
        assert!((mp - 1.8).abs() < 1e-14 && (mm - 0.2).abs() < 1e-14);
        let (mp, mm) = maxwellian_weights(0.3, -0.7, 0.5, 0.4, 2.0).unwrap();
        assert!((mp - 0.2).abs() < 1e-14 && (mm - 1.8).abs() < 1e-14);
        assert!(matches!(
            maxwellian_weights(0.3, 0.7, 0.5, 0.5, 2.0),
            Err(KineticError::MaxwellianBias(_))
        ));
    }

    #[test]
    fn collision_relaxes_at_the_exact_rate() {
        // transport and growth off; uniform sub-threshold nutrient with
        // zero gradient selects the (1 + eps chi, 1 - eps chi) Maxwellian
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let p = ModelParams::new(0.5, 1.0, 0.5, 0.5).unwrap();
        let eps = 0.5;
        let fp0 = Field::new(g, vec![2.0, 0.5, 1.0, 0.0]);
        let fm0 = Field::new(g, vec![0.0, 1.5, 1.0, 2.0]);
        let n0 = Field::constant(g, 0.3);
        let mut ks = KineticState::new(fp0.clone(), fm0.clone(), n0, 0.0, eps).unwrap();
        let mut cfg = SchemeConfig::new(5e-5 * eps * eps, 1.0).unwrap();
        cfg.advection_enabled = false;
        cfg.growth_enabled = false;
        cfg.consumption_enabled = false;
        cfg.nutrient_diffusion_enabled = false;

        let residual = |s: &KineticState| -> f64 {
            let rho = s.rho();
            s.f_plus
                .values
                .iter()
                .zip(&rho.values)
                .map(|(f, r)| (f - 1.25 * r).abs())
                .fold(0.0f64, f64::max)
        };
        let r0 = residual(&ks);
        assert!(r0 > 0.5);
        let steps = (5.0 * eps * eps / cfg.dt).round() as usize;
        for _ in 0..steps {
            let rho_before: Vec<f64> = ks.rho().values.clone();
            ks = kinetic_step(&ks, &p, &cfg).unwrap();
            for (a, b) in ks.rho().values.iter().zip(&rho_before) {
                assert!((a - b).abs() <= 1e-13, "collision changed rho: {a} vs {b}");
            }
        }
        let decay = residual(&ks) / r0;
        assert!(decay <= (-5.0f64).exp() + 1e-6, "residual ratio {decay}");
        assert!(decay > 0.5 * (-5.0f64).exp(), "implausibly fast decay {decay}");
    }

    #[test]
    fn transport_conserves_compact_mass() {
        let g = build_grid(-10.0, 10.0, 400).unwrap();
        let p = ModelParams::new(0.5, 1.0, 0.5, 0.25).unwrap();
        let eps = 0.25;
        let bump = Field::from_fn(g, |z| (-(z * z)).exp());
        let n0 = Field::from_fn(g, |z| 0.5 * (1.0 + 0.9 * (0.3 * z).tanh()));
        for dt in [eps * g.dz, 0.4 * eps * g.dz] {
            let mut ks =
                KineticState::new(bump.clone(), bump.clone(), n0.clone(), 0.0, eps).unwrap();
            let mut cfg = SchemeConfig::new(dt, 1.0).unwrap();
            cfg.growth_enabled = false;
            cfg.consumption_enabled = false;
            cfg.nutrient_diffusion_enabled = false;
            let mass = |s: &KineticState| {
                g.dz * s
                    .f_plus
                    .values
                    .iter()
                    .chain(&s.f_minus.values)
                    .sum::<f64>()
            };
            let mut prev = mass(&ks);
            for _ in 0..40 {
                ks = kinetic_step(&ks, &p, &cfg).unwrap();
                let m = mass(&ks);
                assert!((m - prev).abs() <= 1e-10 * prev.max(1.0), "mass {m} vs {prev}");
                prev = m;
            }
        }
    }

    #[test]
    fn kinetic_wave_deviation_is_first_order_in_dz() {
        // The profile has an interior layer of width ~1/mu_plus at the
        // threshold, so on affordable grids the splitting error shows up as
        // an O(dz) deformation of that layer rather than a pure translation.
        // Check the deviation from the closed-form profile (recentered at
        // the measured interface) halves with dz and sits under an explicit
        // first-order envelope.
        let p = ModelParams::new(2.0, 1.0, 0.5, 0.4).unwrap();
        let sigma = kinetic_minimal_speed(2.0, 0.4).unwrap();
        let t_end = 1.0;
        let mut gaps = Vec::new();
        for n_cells in [1600usize, 3200] {
            // long right tail: the slow mode needs ~50 length units to clear
            // the far-field residual tolerance of the nutrient solve
            let g = build_grid(-25.0, 55.0, n_cells).unwrap();
            let (ks0, kwp, _) = kinetic_wave_state(&p, sigma, g).unwrap();
            // exact-shift transport: dt = eps*dz removes transport error
            let cfg = SchemeConfig::new(0.4 * g.dz, 0.5).unwrap();
            let steps = (t_end / cfg.dt).round() as usize;
            let mut ks = ks0;
            for _ in 0..steps {
                ks = kinetic_step(&ks, &p, &cfg).unwrap();
            }
            let xbar = interface_position(&ks.nutrient, p.n_threshold).unwrap();
            let mut gap: f64 = 0.0;
            for (i, z) in g.centers().enumerate() {
                if !(-15.0..15.0).contains(&z) {
                    continue;
                }
                let [fp, fm] = kwp.pair(z - xbar);
                gap = gap.max((ks.f_plus.values[i] - fp).abs());
                gap = gap.max((ks.f_minus.values[i] - fm).abs());
            }
            assert!(
                gap < 40.0 * g.dz * t_end,
                "kinetic wave drift {gap} at dz = {}",
                g.dz
            );
            gaps.push(gap);
        }
        assert!(
            gaps[1] < 0.72 * gaps[0],
            "layer deviation not first order: {gaps:?}"
        );
    }

    #[test]
    fn moderate_eps_front_speed_near_prediction() {
        let p = ModelParams::new(0.5, 1.0, 0.5, 0.25).unwrap();
        let star = kinetic_minimal_speed(0.5, 0.25).unwrap();
        let g = build_grid(-15.0, 75.0, 900).unwrap();
        let ks = kinetic_spreading_state(&p, g).unwrap();
        let cfg = SchemeConfig::new(0.25 * g.dz, 1.0).unwrap();
        let run = run_kinetic(ks, &p, &cfg, 30.0, 40).unwrap();
        // trailing-window average slope
        let pts: Vec<_> = run
            .trajectory
            .iter()
            .filter(|r| r.time >= 15.0)
            .collect();
        let slope = (pts.last().unwrap().xbar - pts[0].xbar)
            / (pts.last().unwrap().time - pts[0].time);
        assert!(
            (slope - star).abs() < 0.05 * star,
            "kinetic front speed {slope} vs {star}"
        );
    }

    #[test]
    fn state_validation() {
        let g = build_grid(0.0, 1.0, 4).unwrap();
        let f = Field::constant(g, 1.0);
        let n = Field::constant(g, 0.5);
        assert!(KineticState::new(f.clone(), f.clone(), n.clone(), 0.0, 0.25).is_ok());
        let neg = Field::new(g, vec![1.0, -0.1, 1.0, 1.0]);
        assert!(matches!(
            KineticState::new(neg, f.clone(), n.clone(), 0.0, 0.25),
            Err(KineticError::Core(CoreError::NegativeDensity(_)))
        ));
        assert!(matches!(
            KineticState::new(f.clone(), f.clone(), n, 0.0, -1.0),
            Err(KineticError::BadEpsilon(_))
        ));
    }
}

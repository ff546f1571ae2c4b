//! Grids, fields, model parameters and quadrature shared by every solver.
//!
//! All solvers work on uniform cell-centered grids: cell `i` covers
//! `[z_min + i*dz, z_min + (i+1)*dz]` and carries the value at its center.
//! Quadrature is the cell-centered composite rule (midpoint per cell), which
//! is second order on smooth integrands and exact for constants.

use thiserror::Error;

/// Rates are normalised: cells divide at unit rate and consume nutrient at
/// unit rate; `chi`, `diffusion_n`, `n_threshold` and `epsilon` are the free
/// parameters.
pub const GROWTH_RATE: f64 = 1.0;
/// See [`GROWTH_RATE`].
pub const CONSUMPTION_RATE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("chi must be positive")]
    InvalidChi,
    #[error("diffusion_n must be positive")]
    InvalidDiffusion,
    #[error("n_threshold must lie strictly between 0 and 1")]
    InvalidThreshold,
    #[error("epsilon must be positive")]
    InvalidEpsilon,
    #[error("grid bounds must be finite with z_min < z_max (got [{z_min}, {z_max}])")]
    InvalidBounds { z_min: f64, z_max: f64 },
    #[error("grid needs at least 2 cells (got {0})")]
    TooFewCells(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value at cell {index} ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("rho must be nonnegative (min {0})")]
    NegativeDensity(f64),
    #[error("nutrient must lie in [0, 1] (range [{min}, {max}])")]
    NutrientRange { min: f64, max: f64 },
}

/// Model parameters of the coupled cell/nutrient system.
///
/// `chi` is the advection bias of migrating cells, `diffusion_n` the
/// nutrient diffusivity, `n_threshold` the go/grow switch level and
/// `epsilon` the inverse velocity scale of the kinetic variant (ignored by
/// the parabolic solvers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub diffusion_n: f64,
    pub n_threshold: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(chi: f64, diffusion_n: f64, n_threshold: f64, epsilon: f64) -> Result<Self, CoreError> {
        if !(chi > 0.0) || !chi.is_finite() {
            return Err(CoreError::InvalidChi);
        }
        if !(diffusion_n > 0.0) || !diffusion_n.is_finite() {
            return Err(CoreError::InvalidDiffusion);
        }
        if !(n_threshold > 0.0 && n_threshold < 1.0) {
            return Err(CoreError::InvalidThreshold);
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(CoreError::InvalidEpsilon);
        }
        Ok(Self { chi, diffusion_n, n_threshold, epsilon })
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { chi: 2.0, diffusion_n: 1.0, n_threshold: 0.5, epsilon: 0.25 }
    }
}

/// Uniform cell-centered 1-d grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub z_min: f64,
    pub z_max: f64,
    pub n_cells: usize,
    pub dz: f64,
}

/// Builds a uniform cell-centered grid on `[z_min, z_max]` with `n_cells` cells.
pub fn build_grid(z_min: f64, z_max: f64, n_cells: usize) -> Result<Grid1D, CoreError> {
    if !z_min.is_finite() || !z_max.is_finite() || !(z_min < z_max) {
        return Err(CoreError::InvalidBounds { z_min, z_max });
    }
    if n_cells < 2 {
        return Err(CoreError::TooFewCells(n_cells));
    }
    let dz = (z_max - z_min) / n_cells as f64;
    Ok(Grid1D { z_min, z_max, n_cells, dz })
}

impl Grid1D {
    /// Center of cell `i`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.z_min + (i as f64 + 0.5) * self.dz
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }

    /// Index of the cell containing `z`, clamped to the grid.
    pub fn cell_of(&self, z: f64) -> usize {
        let i = ((z - self.z_min) / self.dz).floor();
        (i.max(0.0) as usize).min(self.n_cells - 1)
    }
}

/// Scalar field sampled at the cell centers of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl Field {
    /// Panics if `values.len() != grid.n_cells` (programming error).
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_cells, "field length must match grid");
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.centers().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n_cells] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First cell with a non-finite value, if any.
    pub fn check_finite(&self) -> Result<(), CoreError> {
        for (index, &value) in self.values.iter().enumerate() {
            if !value.is_finite() {
                return Err(CoreError::NonFinite { index, value });
            }
        }
        Ok(())
    }

    /// Linear interpolation between cell centers; clamps outside the center range.
    pub fn interp(&self, z: f64) -> f64 {
        let g = &self.grid;
        let s = (z - g.center(0)) / g.dz;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = g.n_cells - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Which frame the parabolic solver is stepping in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    /// Lab frame; the interface is located by root-finding on the nutrient.
    Static,
    /// Co-moving frame translating at `xdot`; the interface is pinned at
    /// `z = 0` and `xbar` accumulates the frame displacement.
    Moving { xbar: f64, xdot: f64 },
}

/// Full parabolic solver state: cell density, nutrient, time and frame.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: Field,
    pub nutrient: Field,
    pub time: f64,
    pub frame: Frame,
}

impl State {
    /// Validates shared grid, finiteness, `rho >= 0` and `nutrient in [0, 1]`.
    pub fn new(rho: Field, nutrient: Field, time: f64, frame: Frame) -> Result<Self, CoreError> {
        if rho.grid != nutrient.grid {
            return Err(CoreError::GridMismatch);
        }
        rho.check_finite()?;
        nutrient.check_finite()?;
        let rho_min = rho.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if rho_min < 0.0 {
            return Err(CoreError::NegativeDensity(rho_min));
        }
        let n_min = nutrient.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let n_max = nutrient.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if n_min < 0.0 || n_max > 1.0 {
            return Err(CoreError::NutrientRange { min: n_min, max: n_max });
        }
        Ok(Self { rho, nutrient, time, frame })
    }

    pub fn grid(&self) -> Grid1D {
        self.rho.grid
    }
}

/// Cell-centered quadrature of `f` (optionally against `weight` on the same
/// grid): `dz * sum_i f_i * w_i`. Second order on smooth integrands.
pub fn integrate(f: &Field, weight: Option<&Field>) -> Result<f64, CoreError> {
    f.check_finite()?;
    let mut acc = 0.0;
    match weight {
        None => {
            for &v in &f.values {
                acc += v;
            }
        }
        Some(w) => {
            if w.grid != f.grid {
                return Err(CoreError::GridMismatch);
            }
            w.check_finite()?;
            for (&v, &wv) in f.values.iter().zip(&w.values) {
                acc += v * wv;
            }
        }
    }
    Ok(acc * f.grid.dz)
}

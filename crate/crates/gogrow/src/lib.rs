//! Numerical laboratory for a one-dimensional "go or grow" cell/nutrient system.
//!
//! Cells of density `rho` either divide (where nutrient `n` is abundant,
//! `n > n_threshold`) or migrate up the nutrient gradient with bias `chi`
//! (where nutrient is scarce). The nutrient diffuses and is consumed. The
//! interface `xbar(t)`, where `n` crosses the threshold, separates the two
//! behaviours and the whole structure invades as a front.
//!
//! The crate provides:
//! - [`core`]: grids, fields, model parameters and quadrature,
//! - [`waves`]: closed-form travelling-wave profiles, minimal speeds and
//!   decay roots for the parabolic and kinetic models, plus the nutrient
//!   profile solver,
//! - [`pde`]: a finite-volume solver for the parabolic system in static and
//!   moving frames with explicit interface tracking,
//! - [`inside`]: neutral-fraction dynamics inside a travelling front, the
//!   weighted evolution operator, its spectral gap and a tridiagonal
//!   eigensolver-based validation, and pushed/pulled classification,
//! - [`kinetic`]: a two-velocity kinetic solver and the algebra deciding
//!   existence of subsonic kinetic waves,
//! - [`speedlab`]: front-speed estimation, bracket checks and grid
//!   convergence studies,
//! - [`scenario`]: config parsing and the batch scenario runner behind the
//!   `gogrow` binary.

pub mod core;
pub mod inside;
pub mod kinetic;
mod linalg;
pub mod pde;
pub mod scenario;
pub mod speedlab;
pub mod waves;

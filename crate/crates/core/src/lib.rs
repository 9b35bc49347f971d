//! Canvas-noise laboratory for the linearized Cahn–Hilliard–Cook equation
//!
//! ```text
//! u_t + u_xxxx + μ u_xx = ∂ₓẆ   on (0,T] × (0,1),   u = u_xx = 0 on the boundary,   u(0) = 0.
//! ```
//!
//! The white noise is replaced by a finite-dimensional *canvas* noise built from
//! `N × M` Gaussian increments against the cosine modes. The crate provides
//!
//! - [`spectral`]: eigenpairs, semigroup, elliptic/biharmonic solution operators and
//!   second moments of the mild solution;
//! - [`noise`]: sampling and algebra of the canvas increments;
//! - [`oracle`]: exact spectral solutions of the canvas problem and its IMEX
//!   time discretization, together with exact mean-square errors;
//! - [`fem`]: C¹ spline finite elements, banded factorizations and the IMEX,
//!   modified-IMEX and backward Euler steppers;
//! - [`harness`]: convergence studies, Monte Carlo with common random numbers and
//!   log–log rate fits.

pub mod error;
pub mod fem;
pub mod harness;
pub mod noise;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use fem::{BandedSymMatrix, FemField, Forms, SplineSpace};
pub use harness::{ErrorTable, StudyConfig};
pub use noise::{NoiseGrid, NoiseMatrix};
pub use spectral::{Model, ModeRates, SpectralField};

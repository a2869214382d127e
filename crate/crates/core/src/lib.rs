//! Riemannian geometry of compound Gaussian parameters, with recursive
//! estimation and GLRT change detection on multivariate time series.
//!
//! Data at each time `t` are `n` pixels `x_i ~ CN(0, τ_i Σ)` with `|Σ| = 1`.
//! The parameter `θ = (Σ, τ)` lives on `SH⁺⁺_p × R⁺⁺ⁿ`, which this crate equips
//! with the Fisher information metric ([`manifold`]). On top of it sit the
//! estimators ([`estimators`]), the change detector ([`detector`]) and the
//! Monte Carlo tooling ([`simulation`]). [`io`] holds the text file formats
//! shared with the command-line tool.

pub mod detector;
pub mod error;
pub mod estimators;
pub mod hermitian;
pub mod io;
pub mod manifold;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{DataBatch, FixedPointOptions, RecursiveState};
pub use hermitian::{HermitianMatrix, HpdMatrix};
pub use manifold::{CgPoint, CgTangent, TextureVector, UnitDetHpd};

//! Radial spectral solver for the fourth-order focusing nonlinear
//! Schrodinger equation
//!
//! ```text
//! i u_t = Delta^2 u - mu Delta u - |u|^{2 sigma} u
//! ```
//!
//! with localized virial diagnostics, ground states, cutoff construction and
//! blowup detection.

pub mod bessel;
pub mod cutoffs;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod groundstate;
pub mod harness;
pub mod params;
mod poly;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, Norms};
pub use grid::{make_grid, RadialGrid};
pub use params::{make_params, Criticality, Params};
pub use spectral::{newton_potential_oracle, Symbol, TransformPlan};

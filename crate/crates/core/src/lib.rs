//! Line-length design and analysis for multiline TRL calibration kits.
//!
//! The crate is organised the way a kit design proceeds:
//!
//! - [`medium`]: relative effective permittivity models and the propagation
//!   constant γ(f).
//! - [`eigenmetrics`]: the multiline weighting matrix, the calibration
//!   eigenvalue λ, the normalized eigenvalue κ and the effective phase φ.
//! - [`trl_classic`]: two-line TRL band arithmetic.
//! - [`line_count`]: recommended number of lines for a frequency range.
//! - [`rulers`]: sparse-ruler (perfect, Golomb, Wichmann) designs.
//! - [`optimizer`]: constrained differential-evolution length optimisation.
//! - [`mc_sensitivity`]: synthetic-measurement Monte Carlo of the error terms.
//!
//! All lengths are in meters and all frequencies in hertz.

pub mod eigenmetrics;
pub mod error;
pub mod line_count;
pub mod mc_sensitivity;
pub mod medium;
pub mod optimizer;
pub mod rulers;
pub mod trl_classic;

mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use eigenmetrics::{LineSet, PhaseCurve, Scaling, WeightingMatrix};
pub use medium::{DispersionModel, FrequencyGrid, Permittivity, C0};

//! Guaranteed two-sided a posteriori error bounds for evolutionary
//! reaction-diffusion problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`] holds the continuous problem, exact-solution presets,
//!   embedding constants and the weighted error norms.
//! * [`discretization`] provides meshes, quadrature, closed-form time moments,
//!   the implicit FEM solver and true-error evaluation.
//! * [`flux`] reconstructs admissible fluxes from the discrete solution.
//! * [`majorant`] and [`minorant`] evaluate the upper and lower bounds.
//! * [`indicators`] turns the flux residual into element-wise indicators and
//!   measures marking quality.
//! * [`harness`] runs configured experiments and writes CSV/JSON tables.

pub mod discretization;
pub mod error;
pub mod flux;
pub mod harness;
pub mod indicators;
pub mod linalg;
pub mod majorant;
pub mod minorant;
pub mod problem;

pub use error::{Error, Result};

//! Simulation and verification toolkit for the passive-scalar shear model
//!
//!   df/dt + i U(y) f = nu d²f/dy²   on the 2π-periodic circle,
//!
//! which is the single-x-mode reduction of scalar transport by a shear flow.
//! The crate provides:
//!
//! * spectral profiles `U` with critical-point analysis ([`shear`]),
//! * the rate weights `B`, the ramp `phi` and the exponential weight `W`
//!   ([`weights`]),
//! * an exact-subflow Strang splitting solver ([`solver`]),
//! * the weighted energy functional, its per-term dissipation ledger and the
//!   Gronwall audit ([`functional`]),
//! * decay-rate fitting, streamline rate maps and the discrete spectral-gap
//!   constant ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod functional;
pub mod grid;
pub mod io;
pub mod shear;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use grid::Grid;
pub use shear::{ProfileKind, ShearProfile};
pub use solver::{InitialData, ScalarField, SolveConfig, Trajectory};
pub use weights::WeightSet;

pub use num_complex::Complex64;

/// Circle length; every grid and profile lives on [0, 2π).
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

//! Rapid repeated interaction (collision model) dynamics.
//!
//! A system repeatedly couples to fresh ancillae for a short time `dt`,
//! giving a discrete update channel `φ(dt)`. This crate builds that
//! channel, its unique Markovian interpolation `L_dt = log(φ(dt))/dt`
//! with series coefficients `L₀, L₁, …`, and detects at which order in
//! `dt` the dynamics can purify the system (moves the maximally mixed
//! state).
//!
//! Units: ħ = 1 throughout; Hamiltonians are angular frequencies.

pub mod bombardment;
pub mod channels;
pub mod cli;
pub mod error;
pub mod fit;
pub mod interpolation;
pub mod lindblad;
pub mod models;
pub mod operator;
pub mod tolerance;

pub use error::{Error, Result};
pub use operator::{ComplexMatrix, DensityMatrix};
pub use tolerance::Tolerances;

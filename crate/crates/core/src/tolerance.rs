//! Numerical tolerances shared across the crate.

use serde::{Deserialize, Serialize};

/// Absolute tolerances on unit-normalised inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub log: f64,
    pub exp: f64,
    /// Angular distance (radians) from the negative real axis below which
    /// the principal logarithm is refused.
    pub branch: f64,
    pub lin: f64,
    pub prob: f64,
    pub matching: f64,
    pub unital: f64,
    pub bound: f64,
    /// Relative threshold for purification-order detection.
    pub order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        DEFAULT
    }
}

pub const DEFAULT: Tolerances = Tolerances {
    herm: 1e-10,
    trace: 1e-10,
    psd: 1e-9,
    log: 1e-11,
    exp: 1e-11,
    branch: 1e-6,
    lin: 1e-12,
    prob: 1e-12,
    matching: 1e-12,
    unital: 1e-10,
    bound: 1e-10,
    order: 1e-8,
};

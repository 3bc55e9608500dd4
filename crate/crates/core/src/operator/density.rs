use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{c64, hermitian_eigenvalues, hermiticity_defect, identity, ComplexMatrix};
use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr(#[serde(with = "super::serde_matrix")] ComplexMatrix);

impl TryFrom<DensityRepr> for DensityMatrix {
    type Error = Error;
    fn try_from(r: DensityRepr) -> Result<Self> {
        DensityMatrix::new(r.0)
    }
}

impl From<DensityMatrix> for DensityRepr {
    fn from(d: DensityMatrix) -> Self {
        DensityRepr(d.matrix)
    }
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !super::all_finite(&matrix) {
            return Err(Error::InvalidDensityMatrix("non-finite entries".into()));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > tol.herm {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (defect {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - c64(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {:.12} + {:.3e}i is not 1",
                tr.re, tr.im
            )));
        }
        let min_ev = hermitian_eigenvalues(&matrix)[0];
        if min_ev < -tol.psd {
            return Err(Error::InvalidDensityMatrix(format!(
                "minimum eigenvalue {min_ev:e} is negative"
            )));
        }
        Ok(Self { matrix })
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity(d) * c64(1.0 / d as f64, 0.0),
        }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalised) non-zero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let v = v / c64(n, 0.0);
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    /// Fock state |k⟩ on `levels` levels.
    pub fn basis_state(levels: usize, k: usize) -> Result<Self> {
        if k >= levels {
            return Err(Error::InvalidDensityMatrix(format!(
                "basis index {k} out of range for {levels} levels"
            )));
        }
        Ok(Self {
            matrix: super::matrix_unit(levels, k, k),
        })
    }

    /// Qubit state with the given Bloch vector (|a| ≤ 1).
    pub fn from_bloch(a: [f64; 3]) -> Result<Self> {
        let m = (identity(2)
            + super::pauli_x() * c64(a[0], 0.0)
            + super::pauli_y() * c64(a[1], 0.0)
            + super::pauli_z() * c64(a[2], 0.0))
            * c64(0.5, 0.0);
        Self::new(m)
    }

    /// Thermal-like geometric populations p_k ∝ rᵏ on `levels` levels,
    /// renormalised after truncation.
    pub fn geometric(levels: usize, ratio: f64) -> Result<Self> {
        if levels == 0 || !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidDensityMatrix(
                "geometric ratio must be in [0, 1)".into(),
            ));
        }
        let weights: Vec<f64> = (0..levels).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = weights.iter().sum();
        let diag = DVector::from_iterator(levels, weights.iter().map(|w| c64(w / total, 0.0)));
        Ok(Self {
            matrix: ComplexMatrix::from_diagonal(&diag),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        super::purity(&self.matrix)
    }

    /// Bloch vector ⟨σ⟩ of a qubit state.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let e = |s: ComplexMatrix| (s * &self.matrix).trace().re;
        Some([
            e(super::pauli_x()),
            e(super::pauli_y()),
            e(super::pauli_z()),
        ])
    }

    /// Total population on the top `count` basis levels.
    pub fn top_level_weight(&self, count: usize) -> f64 {
        let d = self.dim();
        (d.saturating_sub(count)..d)
            .map(|k| self.matrix[(k, k)].re)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_states() {
        let not_herm = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c64(0.5, 0.0), c64(0.1, 0.0), c64(0.0, 0.0), c64(0.5, 0.0)],
        );
        assert!(DensityMatrix::new(not_herm).is_err());
        assert!(DensityMatrix::new(identity(2)).is_err());
        let negative = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c64(1.2, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-0.2, 0.0)],
        );
        assert!(DensityMatrix::new(negative).is_err());
    }

    #[test]
    fn bloch_round_trip() {
        let rho = DensityMatrix::from_bloch([0.3, -0.2, 0.5]).unwrap();
        let a = rho.bloch_vector().unwrap();
        assert!(
            (a[0] - 0.3).abs() < 1e-15 && (a[1] + 0.2).abs() < 1e-15 && (a[2] - 0.5).abs() < 1e-15
        );
        assert!(DensityMatrix::from_bloch([0.0, 0.0, 1.5]).is_err());
    }

    #[test]
    fn maximally_mixed_has_minimum_purity() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert!((rho.purity() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn serde_validates() {
        let ok = serde_json::to_string(&DensityMatrix::maximally_mixed(2)).unwrap();
        let back: DensityMatrix = serde_json::from_str(&ok).unwrap();
        assert_eq!(back, DensityMatrix::maximally_mixed(2));
        let bad = "[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]";
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
    }
}

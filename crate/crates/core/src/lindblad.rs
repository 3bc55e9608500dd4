//! Lindblad (GKS) form of trace-annihilating, Hermiticity-preserving
//! generators, the identity defect `L[I]`, and purity rates.
//!
//! Decomposition expands the generator in the basis `{I/√d} ∪ {F_a}` of
//! normalised generalised Gell-Mann matrices; the traceless block of the
//! coefficient matrix is the GKS matrix, whose eigenvectors give the modes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channels::Superoperator;
use crate::error::{Error, Result};
use crate::operator::{self, c64, gell_mann_basis, identity, kron, ComplexMatrix, DensityMatrix};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladMode {
    pub gamma: f64,
    #[serde(rename = "F", with = "operator::serde_matrix")]
    pub f: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladDecomposition {
    pub dim: usize,
    #[serde(rename = "H_eff", with = "operator::serde_matrix")]
    pub h_eff: ComplexMatrix,
    /// Modes in order of decreasing rate.
    pub modes: Vec<LindbladMode>,
}

impl LindbladDecomposition {
    /// Generator with Hamiltonian `h` and the given `(Γ, F)` pairs; the
    /// operators are used as given (no orthonormalisation).
    pub fn from_parts(h: ComplexMatrix, modes: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        let dim = h.nrows();
        if h.ncols() != dim || modes.iter().any(|(_, f)| f.shape() != (dim, dim)) {
            return Err(Error::mismatch(
                "LindbladDecomposition::from_parts",
                "operators differ in shape",
            ));
        }
        Ok(Self {
            dim,
            h_eff: h,
            modes: modes
                .into_iter()
                .map(|(gamma, f)| LindbladMode { gamma, f })
                .collect(),
        })
    }

    /// `−i[H,·] + Σ Γ (F · F† − ½{F†F, ·})`.
    pub fn reassemble(&self) -> Superoperator {
        let d = self.dim;
        let eye = identity(d);
        let mut gen = Superoperator::hamiltonian_generator(&self.h_eff).expect("square");
        for m in &self.modes {
            let fdf = m.f.adjoint() * &m.f;
            let jump = Superoperator::sandwich(&m.f, &m.f.adjoint()).expect("square");
            let anti = Superoperator::sandwich(&fdf, &eye)
                .and_then(|a| a.add(&Superoperator::sandwich(&eye, &fdf)?))
                .expect("square");
            let dissipator = jump.sub(&anti.scaled(c64(0.5, 0.0))).expect("same dim");
            gen = gen
                .add(&dissipator.scaled(c64(m.gamma, 0.0)))
                .expect("same dim");
        }
        gen
    }

    pub fn min_rate(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.gamma)
            .fold(f64::INFINITY, f64::min)
    }
}

/// GKS decomposition with default tolerances.
pub fn decompose(l: &Superoperator) -> Result<LindbladDecomposition> {
    decompose_with(l, &Tolerances::default())
}

pub fn decompose_with(l: &Superoperator, tol: &Tolerances) -> Result<LindbladDecomposition> {
    let d = l.dim();
    let scale = l.norm().max(1.0);
    let trace_defect = l.trace_annihilation_defect();
    if trace_defect > tol.trace * scale {
        return Err(Error::NotAGenerator(format!(
            "does not annihilate trace (defect {trace_defect:e})"
        )));
    }
    let choi = l.choi().matrix;
    let herm_defect = operator::hermiticity_defect(&choi);
    if herm_defect > tol.herm * scale {
        return Err(Error::NotAGenerator(format!(
            "does not preserve Hermiticity (defect {herm_defect:e})"
        )));
    }

    let mut basis = vec![identity(d) * c64(1.0 / (d as f64).sqrt(), 0.0)];
    basis.extend(gell_mann_basis(d));
    let n = basis.len();
    // χ_ab = ⟨conj(F_b) ⊗ F_a, L⟩ so that L = Σ χ_ab F_a · F_b†
    let chi = ComplexMatrix::from_fn(n, n, |a, b| {
        let elem = kron(&basis[b].conjugate(), &basis[a]).expect("d² ≤ D_MAX");
        elem.zip_fold(l.rep(), c64(0.0, 0.0), |acc, e, x| acc + e.conj() * x)
    });

    let mut f = identity(d) * (chi[(0, 0)] / (2.0 * d as f64));
    for (a, fa) in basis.iter().enumerate().skip(1) {
        f += fa * (chi[(a, 0)] / (d as f64).sqrt());
    }
    let h = (&f - f.adjoint()) * c64(0.0, 0.5);
    let tr = h.trace() / d as f64;
    let h_eff = h - identity(d) * tr;

    let gks = chi.view((1, 1), (n - 1, n - 1)).into_owned();
    let gks = (&gks + gks.adjoint()) * c64(0.5, 0.0);
    let eig = gks.symmetric_eigen();
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let modes = order
        .into_iter()
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let f = basis[1..]
                .iter()
                .zip(v.iter())
                .fold(ComplexMatrix::zeros(d, d), |acc, (fa, c)| acc + fa * *c);
            LindbladMode {
                gamma: eig.eigenvalues[k],
                f,
            }
        })
        .collect();
    Ok(LindbladDecomposition {
        dim: d,
        h_eff,
        modes,
    })
}

/// `L[I] = Σ Γ [F, F†]`.
pub fn identity_defect(decomp: &LindbladDecomposition) -> ComplexMatrix {
    decomp
        .modes
        .iter()
        .fold(ComplexMatrix::zeros(decomp.dim, decomp.dim), |acc, m| {
            let fd = m.f.adjoint();
            acc + (&m.f * &fd - &fd * &m.f) * c64(m.gamma, 0.0)
        })
}

/// `dP/dt = 2 Re Tr(L[ρ] ρ)`.
pub fn purity_rate(l: &Superoperator, rho: &DensityMatrix) -> Result<f64> {
    let lr = l.apply(rho.matrix())?;
    Ok(2.0 * (lr * rho.matrix()).trace().re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityBound {
    /// The purity rate.
    pub lhs: f64,
    /// `Tr(L[I] ρ²)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `dP/dt ≤ Tr(L[I] ρ²)`, which holds for generators with
/// non-negative rates; refuses generators with rates below `−τ_psd`.
pub fn purity_bound_check(l: &Superoperator, rho: &DensityMatrix) -> Result<PurityBound> {
    purity_bound_check_with(l, rho, &Tolerances::default())
}

pub fn purity_bound_check_with(
    l: &Superoperator,
    rho: &DensityMatrix,
    tol: &Tolerances,
) -> Result<PurityBound> {
    let decomp = decompose_with(l, tol)?;
    let min_rate = decomp.min_rate();
    if min_rate < -tol.psd {
        return Err(Error::NegativeRates { min_rate });
    }
    let lhs = purity_rate(l, rho)?;
    let r2 = rho.matrix() * rho.matrix();
    let rhs = (l.apply_identity() * r2).trace().re;
    Ok(PurityBound {
        lhs,
        rhs,
        holds: lhs <= rhs + tol.bound,
    })
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random GKSL generator with `n_modes` jump operators and rates in
/// `[0, 1)`. Unital generators use Hermitian (hence normal) jump
/// operators, so `L[I] = 0`.
pub fn random_lindbladian<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n_modes: usize,
    unital: bool,
) -> LindbladDecomposition {
    let g = gaussian_matrix(rng, d);
    let h = (&g + g.adjoint()) * c64(0.5, 0.0);
    let modes = (0..n_modes)
        .map(|_| {
            let a = gaussian_matrix(rng, d);
            let f = if unital {
                (&a + a.adjoint()) * c64(0.5, 0.0)
            } else {
                a
            };
            (rng.random_range(0.0..1.0), f)
        })
        .collect();
    LindbladDecomposition::from_parts(h, modes).expect("shapes agree")
}

//! Dense complex-matrix primitives.
//!
//! Everything downstream works with [`ComplexMatrix`] (a dense
//! `DMatrix<Complex64>`). Joint system–ancilla operators use the ordering
//! `system ⊗ ancilla`, so the joint index is `i_s * dim_a + i_a`.
//!
//! Vectorisation is column-stacking throughout: `vec(X)[i + j*d] = X[i, j]`,
//! so the map `X ↦ A X B` has matrix `Bᵀ ⊗ A`.

mod density;
mod matfun;
pub mod serde_matrix;

pub use density::DensityMatrix;
pub use matfun::{matexp, matlog_principal, matlog_principal_with};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Largest Hilbert-space dimension any single operator may reach.
pub const D_MAX: usize = 4096;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major entries.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| c64(rows[i][j], 0.0))
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// σ₊ = |↑⟩⟨↓| with |↑⟩ the first basis vector.
pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub fn sigma_minus() -> ComplexMatrix {
    sigma_plus().adjoint()
}

/// Truncated annihilation operator on `n` Fock levels.
pub fn annihilation(n: usize) -> ComplexMatrix {
    let mut a = zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = c64((k as f64).sqrt(), 0.0);
    }
    a
}

/// `|i⟩⟨j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut e = zeros(d, d);
    e[(i, j)] = ONE;
    e
}

fn check_square(op: &'static str, m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            op,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Kronecker product with the default dimension cap [`D_MAX`].
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_limit(a, b, D_MAX)
}

pub fn kron_with_limit(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    max_dim: usize,
) -> Result<ComplexMatrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r <= max_dim && c <= max_dim => (r, c),
        (r, c) => {
            return Err(Error::DimensionOverflow {
                dim: r.unwrap_or(usize::MAX).max(c.unwrap_or(usize::MAX)),
                max: max_dim,
            })
        }
    };
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = ComplexMatrix::zeros(rows, cols);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc))
                .zip_apply(b, |o, bv| *o = aij * bv);
        }
    }
    Ok(out)
}

/// Traces out the second (ancilla) factor of a `(dim_s·dim_a)`-dimensional
/// operator.
pub fn partial_trace_ancilla(
    m: &ComplexMatrix,
    dim_s: usize,
    dim_a: usize,
) -> Result<ComplexMatrix> {
    let n = dim_s * dim_a;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::mismatch(
            "partial_trace_ancilla",
            format!(
                "expected {n}x{n} for dims ({dim_s}, {dim_a}), got {}x{}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    Ok(ComplexMatrix::from_fn(dim_s, dim_s, |i, j| {
        (0..dim_a).map(|k| m[(i * dim_a + k, j * dim_a + k)]).sum()
    }))
}

/// Traces out the first (system) factor.
pub fn partial_trace_system(
    m: &ComplexMatrix,
    dim_s: usize,
    dim_a: usize,
) -> Result<ComplexMatrix> {
    let n = dim_s * dim_a;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::mismatch(
            "partial_trace_system",
            format!(
                "expected {n}x{n} for dims ({dim_s}, {dim_a}), got {}x{}",
                m.nrows(),
                m.ncols()
            ),
        ));
    }
    Ok(ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
        (0..dim_s).map(|k| m[(k * dim_a + i, k * dim_a + j)]).sum()
    }))
}

fn check_same_square(op: &'static str, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    check_square(op, a)?;
    if a.shape() != b.shape() {
        return Err(Error::mismatch(
            op,
            format!("{}x{} vs {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_square("commutator", a, b)?;
    Ok(a * b - b * a)
}

/// `{a, b} = ab + ba`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_square("anticommutator", a, b)?;
    Ok(a * b + b * a)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.trace()
}

/// Frobenius norm.
pub fn fro(m: &ComplexMatrix) -> f64 {
    m.norm()
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermiticity_defect(m) <= tol * m.norm().max(1.0)
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn ensure_finite(m: ComplexMatrix, op: &'static str) -> Result<ComplexMatrix> {
    if all_finite(&m) {
        Ok(m)
    } else {
        Err(Error::NonFinite(op))
    }
}

/// Column-stacking vectorisation: `vec(X)[i + j*d] = X[i, j]`.
pub fn vectorize(m: &ComplexMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for a `d×d` operator.
pub fn unvectorize(v: &[Complex64], d: usize) -> ComplexMatrix {
    debug_assert_eq!(v.len(), d * d);
    ComplexMatrix::from_column_slice(d, d, v)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Trace distance ½‖a − b‖₁ between Hermitian matrices.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// Tr(ρ²) for a matrix with unit trace.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Tr(ρ²) − 1/d evaluated as ‖ρ − I/d‖²_F plus the trace-defect correction,
/// which keeps full relative precision for states close to I/d.
pub fn purity_excess(rho: &ComplexMatrix) -> f64 {
    let d = rho.nrows() as f64;
    let shifted = rho - identity(rho.nrows()) * c64(1.0 / d, 0.0);
    shifted.norm_squared() + 2.0 / d * (rho.trace().re - 1.0)
}

/// Generalised Gell-Mann basis: `d² − 1` traceless Hermitian matrices,
/// orthonormal under `Tr(A† B)`, ordered diagonal, symmetric, antisymmetric.
pub fn gell_mann_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d - 1);
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c64(norm, 0.0);
        }
        m[(l, l)] = c64(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            let mut m = zeros(d, d);
            m[(j, k)] = c64(r, 0.0);
            m[(k, j)] = c64(r, 0.0);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = zeros(d, d);
            m[(j, k)] = c64(0.0, -r);
            m[(k, j)] = c64(0.0, r);
            out.push(m);
        }
    }
    out
}

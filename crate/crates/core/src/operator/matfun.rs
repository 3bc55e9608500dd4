//! Matrix exponential and principal matrix logarithm.
//!
//! The logarithm uses a blocked Schur–Parlett scheme: complex Schur form,
//! eigenvalues grouped into clusters, the Schur form reordered so each
//! cluster is a contiguous diagonal block, each block handled by square
//! roots plus a short log(I+Y) series, and the off-diagonal blocks filled
//! in by the Parlett (Sylvester) recurrence. Every eigenvalue is inspected
//! before anything is computed, which is where branch-cut and singularity
//! detection happens.

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use super::{c64, check_square, ensure_finite, identity, ComplexMatrix, ZERO};
use crate::error::{Error, Result};
use crate::tolerance::DEFAULT;

/// Eigenvalues closer than this share a Schur–Parlett block.
const CLUSTER_DELTA: f64 = 0.1;
/// Square roots are taken until ‖T − I‖_F drops below this.
const SERIES_RADIUS: f64 = 0.25;
const MAX_SQRTS: usize = 64;
const MAX_SERIES_TERMS: usize = 400;

/// `exp(m)` by Padé scaling and squaring.
pub fn matexp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = check_square("matexp", m)?;
    if n == 0 {
        return Ok(m.clone());
    }
    if m.iter().all(|z| *z == ZERO) {
        return Ok(identity(n));
    }
    if !super::all_finite(m) {
        return Err(Error::NonFinite("matexp input"));
    }
    ensure_finite(m.exp(), "matexp")
}

/// Principal logarithm with the default branch-cut tolerance.
pub fn matlog_principal(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matlog_principal_with(m, DEFAULT.branch)
}

/// Principal logarithm (`log(I) = 0`). Fails with
/// [`Error::BranchCutViolation`] if an eigenvalue's argument is within
/// `branch_tol` of ±π, and with [`Error::SingularInput`] for (numerically)
/// singular input.
pub fn matlog_principal_with(m: &ComplexMatrix, branch_tol: f64) -> Result<ComplexMatrix> {
    let n = check_square("matlog_principal", m)?;
    if n == 0 {
        return Ok(m.clone());
    }
    if !super::all_finite(m) {
        return Err(Error::NonFinite("matlog_principal input"));
    }
    let scale = m.norm();
    if scale == 0.0 {
        return Err(Error::SingularInput { min_modulus: 0.0 });
    }

    let schur =
        Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(4)).ok_or(Error::NoConvergence)?;
    let (mut q, mut t) = schur.unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = ZERO;
        }
    }

    let diag: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let min_modulus = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_modulus <= (n as f64) * f64::EPSILON * scale {
        return Err(Error::SingularInput { min_modulus });
    }
    if let Some(bad) = diag
        .iter()
        .find(|z| std::f64::consts::PI - z.arg().abs() <= branch_tol)
    {
        return Err(Error::BranchCutViolation {
            eigenvalue: *bad,
            dt: None,
        });
    }

    let rank = cluster_ranks(&diag);
    let blocks = reorder_schur(&mut t, &mut q, rank);
    let f = block_parlett_log(&t, &blocks);
    ensure_finite(&q * f * q.adjoint(), "matlog_principal")
}

/// Assigns each eigenvalue the rank of its cluster (by first appearance).
/// Eigenvalues on opposite sides of the negative real axis never share a
/// cluster, so each block's logarithm stays on the principal branch.
fn cluster_ranks(eigs: &[Complex64]) -> Vec<usize> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let across_cut =
        |a: Complex64, b: Complex64| a.re < 0.0 && b.re < 0.0 && (a.im < 0.0) != (b.im < 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if (eigs[i] - eigs[j]).norm() <= CLUSTER_DELTA && !across_cut(eigs[i], eigs[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            match order.iter().position(|&r| r == root) {
                Some(k) => k,
                None => {
                    order.push(root);
                    order.len() - 1
                }
            }
        })
        .collect()
}

/// Bubble-sorts the Schur form by cluster rank using unitary swaps of
/// adjacent diagonal entries. Returns the `(start, len)` of each block.
fn reorder_schur(
    t: &mut ComplexMatrix,
    q: &mut ComplexMatrix,
    mut rank: Vec<usize>,
) -> Vec<(usize, usize)> {
    let n = rank.len();
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if rank[k] > rank[k + 1] {
                swap_adjacent(t, q, k);
                rank.swap(k, k + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || rank[k] != rank[start] {
            blocks.push((start, k - start));
            start = k;
        }
    }
    blocks
}

/// Exchanges diagonal entries `k` and `k+1` of the upper-triangular `t`,
/// updating `q` so that `q t q†` is unchanged.
fn swap_adjacent(t: &mut ComplexMatrix, q: &mut ComplexMatrix, k: usize) {
    let n = t.nrows();
    let (a, b, c) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
    // First column of the rotation is the eigenvector of the 2x2 block for c.
    let (v1, v2) = (b, c - a);
    let norm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    let (g00, g10) = (v1 / norm, v2 / norm);
    let (g01, g11) = (-g10.conj(), g00.conj());

    for j in 0..n {
        let (rk, rk1) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = g00.conj() * rk + g10.conj() * rk1;
        t[(k + 1, j)] = g01.conj() * rk + g11.conj() * rk1;
    }
    for i in 0..n {
        let (ck, ck1) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = ck * g00 + ck1 * g10;
        t[(i, k + 1)] = ck * g01 + ck1 * g11;
        let (qk, qk1) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = qk * g00 + qk1 * g10;
        q[(i, k + 1)] = qk * g01 + qk1 * g11;
    }
    t[(k, k)] = c;
    t[(k + 1, k + 1)] = a;
    t[(k + 1, k)] = ZERO;
}

fn block_parlett_log(t: &ComplexMatrix, blocks: &[(usize, usize)]) -> ComplexMatrix {
    let n = t.nrows();
    let mut f = ComplexMatrix::zeros(n, n);
    let sub = |m: &ComplexMatrix, (r0, rl): (usize, usize), (c0, cl): (usize, usize)| {
        m.view((r0, c0), (rl, cl)).into_owned()
    };

    for &blk in blocks {
        let tb = sub(t, blk, blk);
        f.view_mut((blk.0, blk.0), (blk.1, blk.1))
            .copy_from(&log_atomic(&tb));
    }
    for j in 0..blocks.len() {
        for i in (0..j).rev() {
            let (bi, bj) = (blocks[i], blocks[j]);
            let tij = sub(t, bi, bj);
            let mut rhs = sub(&f, bi, bi) * &tij - &tij * sub(&f, bj, bj);
            for &bk in &blocks[i + 1..j] {
                rhs += sub(&f, bi, bk) * sub(t, bk, bj) - sub(t, bi, bk) * sub(&f, bk, bj);
            }
            let x = solve_triangular_sylvester(&sub(t, bi, bi), &sub(t, bj, bj), &rhs);
            f.view_mut((bi.0, bj.0), (bi.1, bj.1)).copy_from(&x);
        }
    }
    f
}

/// Solves `a x − x b = c` for upper-triangular `a`, `b` with disjoint spectra.
fn solve_triangular_sylvester(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
) -> ComplexMatrix {
    let (p, r) = (a.nrows(), b.nrows());
    let mut x = ComplexMatrix::zeros(p, r);
    for col in 0..r {
        let beta = b[(col, col)];
        let mut rhs: Vec<Complex64> = (0..p)
            .map(|i| c[(i, col)] + (0..col).map(|l| x[(i, l)] * b[(l, col)]).sum::<Complex64>())
            .collect();
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for m in i + 1..p {
                acc -= a[(i, m)] * x[(m, col)];
            }
            x[(i, col)] = acc / (a[(i, i)] - beta);
            rhs[i] = acc;
        }
    }
    x
}

/// Principal square root of an upper-triangular matrix.
fn sqrt_upper(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.nrows();
    let mut r = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let s: Complex64 = (i + 1..j).map(|k| r[(i, k)] * r[(k, j)]).sum();
            r[(i, j)] = (t[(i, j)] - s) / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Logarithm of one clustered upper-triangular block.
fn log_atomic(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.nrows();
    if n == 1 {
        return ComplexMatrix::from_element(1, 1, t[(0, 0)].ln());
    }
    let eye = identity(n);
    let mut x = t.clone();
    let mut roots = 0;
    while (&x - &eye).norm() > SERIES_RADIUS && roots < MAX_SQRTS {
        x = sqrt_upper(&x);
        roots += 1;
    }
    let y = x - &eye;
    let mut power = y.clone();
    let mut sum = y.clone();
    for p in 2..MAX_SERIES_TERMS {
        power = &power * &y;
        let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
        let term = &power * c64(sign / p as f64, 0.0);
        let small = term.norm() <= f64::EPSILON * 0.25 * sum.norm().max(f64::MIN_POSITIVE);
        sum += term;
        if small || power.norm() == 0.0 {
            break;
        }
    }
    sum * c64((1u64 << roots) as f64, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{from_real_rows, pauli_x, I};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, s: f64) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c64(rng.random_range(-s..s), rng.random_range(-s..s))
        })
    }

    fn taylor_exp(m: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let n = m.nrows();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..terms {
            term = &term * m * c64(1.0 / k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_basics() {
        assert_eq!(matexp(&ComplexMatrix::zeros(3, 3)).unwrap(), identity(3));
        let d =
            ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c64(0.3, 0.0), c64(-1.2, 0.0)]));
        let e = matexp(&d).unwrap();
        assert!((e[(0, 0)].re - 0.3f64.exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re - (-1.2f64).exp()).abs() < 1e-15);
        assert!(e[(0, 1)].norm() < 1e-16);
    }

    #[test]
    fn exp_matches_taylor_oracle() {
        // exp(−iπσx) = −I
        let m = pauli_x() * (-I * std::f64::consts::PI);
        let e = matexp(&m).unwrap();
        assert!((&e - taylor_exp(&m, 60)).norm() < 1e-12);
        assert!((&e + identity(2)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let m = random_matrix(&mut rng, 4, 0.7);
            assert!((matexp(&m).unwrap() - taylor_exp(&m, 60)).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_rejects_nonsquare() {
        assert!(matexp(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(
            matlog_principal(&identity(4)).unwrap(),
            ComplexMatrix::zeros(4, 4)
        );
    }

    #[test]
    fn log_of_diagonal() {
        let e1 = std::f64::consts::E;
        let m = from_real_rows(&[&[e1, 0.0], &[0.0, e1 * e1]]);
        let l = matlog_principal(&m).unwrap();
        assert!((l - from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]])).norm() < 1e-14);
    }

    #[test]
    fn log_of_jordan_block() {
        let m = from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let l = matlog_principal(&m).unwrap();
        assert!((l - from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])).norm() < 1e-14);
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2usize, 3, 5, 8, 16] {
            for _ in 0..4 {
                let mut x = random_matrix(&mut rng, n, 1.0);
                // Frobenius norm bounds the spectral radius
                let s = x.norm();
                x *= c64(0.9 / s, 0.0);
                let back = matlog_principal(&matexp(&x).unwrap()).unwrap();
                assert!((&back - &x).norm() < 1e-11 * x.norm().max(1.0), "n={n}");
            }
        }
    }

    #[test]
    fn exp_log_round_trip_with_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spectrum = [1.0, 1.01, 1.02, 3.0, 3.05, 0.0, 0.0];
        let mut d = ComplexMatrix::zeros(7, 7);
        for (k, &v) in spectrum.iter().enumerate() {
            d[(k, k)] = c64(v, 0.0);
        }
        d[(5, 5)] = c64(0.2, 2.0);
        d[(6, 6)] = c64(-0.5, 0.3);
        let s = random_matrix(&mut rng, 7, 1.0) + identity(7) * c64(2.0, 0.0);
        let s_inv = s.clone().try_inverse().unwrap();
        let a = &s * d * &s_inv;
        let l = matlog_principal(&a).unwrap();
        let back = matexp(&l).unwrap();
        assert!((&back - &a).norm() < 1e-11 * a.norm());
        // principal branch: eigenvalue imaginary parts within (−π, π)
        let ev = Schur::new(l).eigenvalues().unwrap();
        assert!(ev.iter().all(|z| z.im.abs() < std::f64::consts::PI));
    }

    #[test]
    fn branch_cut_detected() {
        let m = from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            matlog_principal(&m),
            Err(Error::BranchCutViolation { .. })
        ));
        let theta = std::f64::consts::PI - 1e-8;
        let rot = matexp(&(pauli_x() * (-I * theta))).unwrap();
        assert!(matches!(
            matlog_principal(&rot),
            Err(Error::BranchCutViolation { .. })
        ));
        let theta = std::f64::consts::PI - 1e-3;
        let rot = matexp(&(pauli_x() * (-I * theta))).unwrap();
        let l = matlog_principal(&rot).unwrap();
        assert!((l - pauli_x() * (-I * theta)).norm() < 1e-10);
    }

    #[test]
    fn singular_detected() {
        let m = from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            matlog_principal(&m),
            Err(Error::SingularInput { .. })
        ));
        assert!(matches!(
            matlog_principal(&ComplexMatrix::zeros(2, 2)),
            Err(Error::SingularInput { .. })
        ));
    }

    #[test]
    fn log_tends_to_zero_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_matrix(&mut rng, 4, 1.0);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let m = identity(4) + &g * c64(eps, 0.0);
            let n = matlog_principal(&m).unwrap().norm();
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn schur_swap_preserves_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 6, 1.0);
        let (mut q, mut t) = Schur::new(a.clone()).unpack();
        for j in 0..6 {
            for i in j + 1..6 {
                t[(i, j)] = ZERO;
            }
        }
        let before: Vec<Complex64> = (0..6).map(|i| t[(i, i)]).collect();
        swap_adjacent(&mut t, &mut q, 2);
        assert!((&q * &t * q.adjoint() - &a).norm() < 1e-12);
        assert_eq!(t[(2, 2)], before[3]);
        assert_eq!(t[(3, 3)], before[2]);
    }
}

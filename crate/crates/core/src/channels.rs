//! Superoperators: linear maps on `d×d` operators stored as `d²×d²`
//! matrices in the column-stacking convention.
//!
//! Composition order is fixed as "first applied, then second":
//! [`compose`]`(first, second)` is the map `X ↦ second(first(X))`, i.e. the
//! matrix product `second · first`.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::{
    self, c64, identity, kron, matrix_unit, partial_trace_ancilla, unvectorize, vectorize,
    ComplexMatrix,
};
use crate::tolerance::Tolerances;

/// Structural properties established by [`Superoperator::verify_cptp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindFlags {
    pub trace_preserving: bool,
    pub hermiticity_preserving: bool,
    pub completely_positive: bool,
    pub unital: bool,
    pub min_choi_eigenvalue: f64,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub unital_residual: f64,
    /// Tolerances the flags were computed with.
    pub tolerances: Tolerances,
}

impl KindFlags {
    pub fn is_cptp(&self) -> bool {
        self.trace_preserving && self.completely_positive
    }
}

#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    rep: ComplexMatrix,
    flags: OnceLock<KindFlags>,
}

impl PartialEq for Superoperator {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.rep == other.rep
    }
}

impl Serialize for Superoperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Superoperator", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("rep", &operator::serde_matrix::to_rows(&self.rep))?;
        st.serialize_field("flags", &self.flags.get())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Superoperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            #[serde(with = "operator::serde_matrix")]
            rep: ComplexMatrix,
        }
        let r = Repr::deserialize(d)?;
        Superoperator::new(r.dim, r.rep).map_err(serde::de::Error::custom)
    }
}

impl Superoperator {
    pub fn new(dim: usize, rep: ComplexMatrix) -> Result<Self> {
        let n = dim * dim;
        if dim == 0 || rep.nrows() != n || rep.ncols() != n {
            return Err(Error::mismatch(
                "Superoperator::new",
                format!(
                    "dim {dim} needs a {n}x{n} matrix, got {}x{}",
                    rep.nrows(),
                    rep.ncols()
                ),
            ));
        }
        Ok(Self::from_parts(dim, rep))
    }

    pub(crate) fn from_parts(dim: usize, rep: ComplexMatrix) -> Self {
        Self {
            dim,
            rep,
            flags: OnceLock::new(),
        }
    }

    /// The identity map 𝟙.
    pub fn identity(dim: usize) -> Self {
        Self::from_parts(dim, identity(dim * dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_parts(dim, ComplexMatrix::zeros(dim * dim, dim * dim))
    }

    /// Builds the map column by column from its action on matrix units.
    pub fn from_fn(
        dim: usize,
        f: impl Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
    ) -> Result<Self> {
        let n = dim * dim;
        let mut rep = ComplexMatrix::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let image = f(&matrix_unit(dim, i, j))?;
                if image.shape() != (dim, dim) {
                    return Err(Error::mismatch(
                        "Superoperator::from_fn",
                        "image has wrong shape",
                    ));
                }
                rep.set_column(i + j * dim, &vectorize(&image));
            }
        }
        Ok(Self::from_parts(dim, rep))
    }

    /// `X ↦ A X B`, matrix `Bᵀ ⊗ A`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        let d = a.nrows();
        if a.shape() != (d, d) || b.shape() != (d, d) {
            return Err(Error::mismatch(
                "Superoperator::sandwich",
                "operands must be equal square",
            ));
        }
        Ok(Self::from_parts(d, kron(&b.transpose(), a)?))
    }

    /// Unitary conjugation `X ↦ U X U†`.
    pub fn conjugation(u: &ComplexMatrix) -> Result<Self> {
        Self::sandwich(u, &u.adjoint())
    }

    /// `X ↦ [H, X]`.
    pub fn commutator_with(h: &ComplexMatrix) -> Result<Self> {
        let d = h.nrows();
        let eye = identity(d);
        Ok(Self::from_parts(
            d,
            kron(&eye, h)? - kron(&h.transpose(), &eye)?,
        ))
    }

    /// Hamiltonian generator `X ↦ −i[H, X]` (ħ = 1).
    pub fn hamiltonian_generator(h: &ComplexMatrix) -> Result<Self> {
        Ok(Self::commutator_with(h)?.scaled(c64(0.0, -1.0)))
    }

    /// Transposition `X ↦ Xᵀ`, positive but not completely positive.
    pub fn transpose_map(dim: usize) -> Self {
        Self::from_fn(dim, |x| Ok(x.transpose())).expect("shape is fixed")
    }

    /// `X ↦ Σ K X K†`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or(Error::EmptyInput("Kraus operator list"))?;
        let d = first.nrows();
        let mut rep = ComplexMatrix::zeros(d * d, d * d);
        for k in kraus {
            if k.shape() != (d, d) {
                return Err(Error::mismatch(
                    "Superoperator::from_kraus",
                    "Kraus operators differ in shape",
                ));
            }
            rep += kron(&k.conjugate(), k)?;
        }
        Ok(Self::from_parts(d, rep))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rep(&self) -> &ComplexMatrix {
        &self.rep
    }

    pub fn into_rep(self) -> ComplexMatrix {
        self.rep
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.dim, self.dim) {
            return Err(Error::mismatch(
                "Superoperator::apply",
                format!(
                    "map acts on {0}x{0}, got {1}x{2}",
                    self.dim,
                    x.nrows(),
                    x.ncols()
                ),
            ));
        }
        let v = &self.rep * vectorize(x);
        Ok(unvectorize(v.as_slice(), self.dim))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::from_parts(self.dim, &self.rep * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim("Superoperator::add", self, other)?;
        Ok(Self::from_parts(self.dim, &self.rep + &other.rep))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim("Superoperator::sub", self, other)?;
        Ok(Self::from_parts(self.dim, &self.rep - &other.rep))
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Self) -> Result<Self> {
        compose(first, self)
    }

    /// n-fold composition.
    pub fn power(&self, n: u32) -> Self {
        let mut out = identity(self.dim * self.dim);
        let mut base = self.rep.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        Self::from_parts(self.dim, out)
    }

    /// Frobenius norm of the matrix representation.
    pub fn norm(&self) -> f64 {
        self.rep.norm()
    }

    /// Operator (spectral) norm of the matrix representation.
    pub fn operator_norm(&self) -> f64 {
        operator::spectral_norm(&self.rep)
    }

    /// Image of the identity operator.
    pub fn apply_identity(&self) -> ComplexMatrix {
        self.apply(&identity(self.dim)).expect("dimension matches")
    }

    /// ‖Σ_i ⟨i| L(X) |i⟩‖ over the matrix-unit basis, i.e. the norm of the
    /// row vector `vec(I)† · rep`; zero iff the map annihilates trace.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| {
                (0..d)
                    .map(|i| self.rep[(i + i * d, col)])
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `true` iff ‖φ(I) − I‖_F ≤ tol; the residual is returned either way.
    pub fn is_unital(&self, tol: f64) -> (bool, f64) {
        let r = (self.apply_identity() - identity(self.dim)).norm();
        (r <= tol, r)
    }

    pub fn choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let n = d * d;
        let m = ComplexMatrix::from_fn(n, n, |r, c| {
            let (i, a) = (r / d, r % d);
            let (j, b) = (c / d, c % d);
            self.rep[(a + b * d, i + j * d)]
        });
        ChoiMatrix { dim: d, matrix: m }
    }

    /// Structural flags with default tolerances, computed once and cached.
    pub fn verify_cptp(&self) -> KindFlags {
        *self
            .flags
            .get_or_init(|| self.compute_flags(&Tolerances::default()))
    }

    /// Structural flags with explicit tolerances. Cached only when the
    /// tolerances match those of an existing cache entry.
    pub fn verify_cptp_with(&self, tol: &Tolerances) -> KindFlags {
        match self.flags.get() {
            Some(f) if f.tolerances == *tol => *f,
            Some(_) => self.compute_flags(tol),
            None => *self.flags.get_or_init(|| self.compute_flags(tol)),
        }
    }

    /// Cached flags, if already computed.
    pub fn cached_flags(&self) -> Option<&KindFlags> {
        self.flags.get()
    }

    fn compute_flags(&self, tol: &Tolerances) -> KindFlags {
        let choi = self.choi();
        let herm_defect = operator::hermiticity_defect(&choi.matrix);
        let min_ev = choi.min_eigenvalue();
        let trace_defect = (choi.output_trace() - identity(self.dim)).norm();
        let (unital, unital_residual) = self.is_unital(tol.unital);
        let hermiticity_preserving = herm_defect <= tol.herm * choi.matrix.norm().max(1.0);
        KindFlags {
            trace_preserving: trace_defect <= tol.trace,
            hermiticity_preserving,
            completely_positive: hermiticity_preserving && min_ev >= -tol.psd,
            unital,
            min_choi_eigenvalue: min_ev,
            trace_defect,
            hermiticity_defect: herm_defect,
            unital_residual,
            tolerances: *tol,
        }
    }

    /// Kraus operators from the Choi eigendecomposition; eigenvalues at or
    /// below `tol.psd` are dropped. Fails if the map is not completely positive.
    pub fn kraus_operators(&self, tol: &Tolerances) -> Result<Vec<ComplexMatrix>> {
        let flags = self.verify_cptp_with(tol);
        if !flags.completely_positive {
            return Err(Error::Unsupported(format!(
                "map is not completely positive (min Choi eigenvalue {:e})",
                flags.min_choi_eigenvalue
            )));
        }
        let d = self.dim;
        let c = self.choi().matrix;
        let h = (&c + c.adjoint()) * c64(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let cutoff = tol.psd.max(f64::EPSILON * c.norm());
        let mut out = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= cutoff {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            let s = lambda.sqrt();
            out.push(ComplexMatrix::from_fn(d, d, |a, i| v[i * d + a] * s));
        }
        Ok(out)
    }
}

fn same_dim(op: &'static str, a: &Superoperator, b: &Superoperator) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::mismatch(op, format!("dims {} vs {}", a.dim, b.dim)));
    }
    Ok(())
}

/// The map `X ↦ second(first(X))`.
pub fn compose(
    first_applied: &Superoperator,
    second_applied: &Superoperator,
) -> Result<Superoperator> {
    same_dim("compose", first_applied, second_applied)?;
    Ok(Superoperator::from_parts(
        first_applied.dim,
        &second_applied.rep * &first_applied.rep,
    ))
}

fn check_weights(weights: &[f64], count: usize, tol: f64) -> Result<()> {
    if count == 0 {
        return Err(Error::EmptyInput(
            "convex combination needs at least one map",
        ));
    }
    if weights.len() != count {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {count} maps",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights(format!(
            "weight {w} is negative or non-finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// `Σ p_k ψ_k`. Cached CPTP flags carry over when every member is CPTP.
pub fn convex_combine(weights: &[f64], maps: &[Superoperator]) -> Result<Superoperator> {
    check_weights(weights, maps.len(), Tolerances::default().prob)?;
    let dim = maps[0].dim;
    let mut rep = ComplexMatrix::zeros(dim * dim, dim * dim);
    for (w, m) in weights.iter().zip(maps) {
        same_dim("convex_combine", &maps[0], m)?;
        rep += &m.rep * c64(*w, 0.0);
    }
    Ok(Superoperator::from_parts(dim, rep))
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ φ(|i⟩⟨j|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiMatrix {
    pub dim: usize,
    #[serde(with = "operator::serde_matrix")]
    pub matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        operator::hermitian_eigenvalues(&self.matrix)[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Trace over the output factor; equals I for trace-preserving maps.
    pub fn output_trace(&self) -> ComplexMatrix {
        partial_trace_ancilla(&self.matrix, self.dim, self.dim).expect("Choi matrix is d²×d²")
    }

    /// Rebuilds the map from its Choi matrix.
    pub fn to_superoperator(&self) -> Superoperator {
        let d = self.dim;
        let n = d * d;
        let rep = ComplexMatrix::from_fn(n, n, |row, col| {
            let (a, b) = (row % d, row / d);
            let (i, j) = (col % d, col / d);
            self.matrix[(i * d + a, j * d + b)]
        });
        Superoperator::from_parts(d, rep)
    }
}

/// Power-series expansion `φ(dt) = 𝟙 + Σ_{k=1..K} dtᵏ φ_k` of an update map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSeries {
    pub dim: usize,
    /// `[φ₁, …, φ_K]`.
    pub terms: Vec<Superoperator>,
}

impl UpdateSeries {
    pub fn new(terms: Vec<Superoperator>) -> Result<Self> {
        let dim = terms.first().ok_or(Error::EmptyInput("update series"))?.dim;
        if terms.iter().any(|t| t.dim != dim) {
            return Err(Error::mismatch(
                "UpdateSeries::new",
                "coefficients differ in dimension",
            ));
        }
        Ok(Self { dim, terms })
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    /// Truncated map `𝟙 + Σ dtᵏ φ_k`.
    pub fn evaluate(&self, dt: f64) -> Superoperator {
        let mut rep = identity(self.dim * self.dim);
        let mut p = 1.0;
        for t in &self.terms {
            p *= dt;
            rep += &t.rep * c64(p, 0.0);
        }
        Superoperator::from_parts(self.dim, rep)
    }

    /// Series of `second ∘ first`, truncated at the smaller order.
    pub fn compose(first: &Self, second: &Self) -> Result<Self> {
        if first.dim != second.dim {
            return Err(Error::mismatch("UpdateSeries::compose", "dimension"));
        }
        let k_max = first.order().min(second.order());
        let n = first.dim * first.dim;
        let terms = (1..=k_max)
            .map(|k| {
                let mut rep = &first.terms[k - 1].rep + &second.terms[k - 1].rep;
                for i in 1..k {
                    rep += &second.terms[k - i - 1].rep * &first.terms[i - 1].rep;
                }
                debug_assert_eq!(rep.nrows(), n);
                Superoperator::from_parts(first.dim, rep)
            })
            .collect();
        Self::new(terms)
    }

    /// Series of `Σ p_k ψ_k`, truncated at the smallest member order.
    pub fn convex_combine(weights: &[f64], members: &[Self]) -> Result<Self> {
        check_weights(weights, members.len(), Tolerances::default().prob)?;
        let dim = members[0].dim;
        if members.iter().any(|m| m.dim != dim) {
            return Err(Error::mismatch("UpdateSeries::convex_combine", "dimension"));
        }
        let k_max = members.iter().map(Self::order).min().unwrap_or(0);
        let terms = (0..k_max)
            .map(|k| {
                let mut rep = ComplexMatrix::zeros(dim * dim, dim * dim);
                for (w, m) in weights.iter().zip(members) {
                    rep += &m.terms[k].rep * c64(*w, 0.0);
                }
                Superoperator::from_parts(dim, rep)
            })
            .collect();
        Self::new(terms)
    }
}

/// Unitary used by tests and presets: `exp(−i t H)`.
pub fn unitary_propagator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    operator::matexp(&(h * c64(0.0, -t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli_x, pauli_y, pauli_z, DensityMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Random CPTP map from Kraus operators `K_k = A_k S^{-1/2}`.
    fn random_channel(rng: &mut ChaCha8Rng, d: usize, nk: usize) -> Superoperator {
        let raw: Vec<ComplexMatrix> = (0..nk).map(|_| random_matrix(rng, d)).collect();
        let s: ComplexMatrix = raw.iter().map(|a| a.adjoint() * a).sum();
        let eig = s.symmetric_eigen();
        let inv_sqrt = &eig.eigenvectors
            * ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|l| c64(1.0 / l.sqrt(), 0.0)))
            * eig.eigenvectors.adjoint();
        let kraus: Vec<ComplexMatrix> = raw.iter().map(|a| a * &inv_sqrt).collect();
        Superoperator::from_kraus(&kraus).unwrap()
    }

    #[test]
    fn identity_map_applies_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 3);
        assert_eq!(Superoperator::identity(3).apply(&x).unwrap(), x);
    }

    #[test]
    fn pauli_conjugation() {
        let s = Superoperator::conjugation(&pauli_x()).unwrap();
        let out = s.apply(&pauli_z()).unwrap();
        assert!((out + pauli_z()).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_wrong_shape() {
        assert!(Superoperator::identity(2).apply(&identity(3)).is_err());
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_channel(&mut rng, 3, 2);
        for _ in 0..5 {
            let (x, y) = (random_matrix(&mut rng, 3), random_matrix(&mut rng, 3));
            let a = c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let lhs = s.apply(&(&x * a + &y)).unwrap();
            let rhs = s.apply(&x).unwrap() * a + s.apply(&y).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12);
        }
    }

    #[test]
    fn compose_order_and_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_channel(&mut rng, 2, 2);
        let b = random_channel(&mut rng, 2, 3);
        let x = random_matrix(&mut rng, 2);
        let ab = compose(&a, &b).unwrap();
        let direct = b.apply(&a.apply(&x).unwrap()).unwrap();
        assert!((ab.apply(&x).unwrap() - direct).norm() < 1e-13);
        assert_eq!(compose(&Superoperator::identity(2), &a).unwrap(), a);

        let u = unitary_propagator(&pauli_y(), 0.37).unwrap();
        let fwd = Superoperator::conjugation(&u).unwrap();
        let back = Superoperator::conjugation(&u.adjoint()).unwrap();
        let id = compose(&fwd, &back).unwrap();
        assert!((id.rep() - identity(4)).norm() < 1e-14);
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b, c) = (
            random_channel(&mut rng, 2, 2),
            random_channel(&mut rng, 2, 2),
            random_channel(&mut rng, 2, 2),
        );
        let l = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let r = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        assert!((l.rep() - r.rep()).norm() < 1e-12);
    }

    #[test]
    fn convex_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_channel(&mut rng, 2, 2);
        assert_eq!(convex_combine(&[1.0], std::slice::from_ref(&s)).unwrap(), s);
        let id = Superoperator::identity(2);
        let mix = convex_combine(&[0.5, 0.5], &[id.clone(), id.clone()]).unwrap();
        assert_eq!(mix, id);
        let t = random_channel(&mut rng, 2, 3);
        let m = convex_combine(&[0.3, 0.7], &[s, t]).unwrap();
        assert!(m.verify_cptp().is_cptp());

        assert!(matches!(
            convex_combine(&[0.5, 0.6], &[id.clone(), id.clone()]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            convex_combine(&[-0.5, 1.5], &[id.clone(), id.clone()]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            convex_combine(&[], &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn unitary_conjugation_flags() {
        let u = unitary_propagator(&(pauli_x() + pauli_z() * c64(0.3, 0.0)), 0.8).unwrap();
        let s = Superoperator::conjugation(&u).unwrap();
        let f = s.verify_cptp();
        assert!(
            f.trace_preserving && f.completely_positive && f.hermiticity_preserving && f.unital
        );
        let (unital, residual) = s.is_unital(1e-12);
        assert!(unital && residual < 1e-14);
        assert!(s.cached_flags().is_some());
    }

    #[test]
    fn transpose_is_not_cp() {
        let f = Superoperator::transpose_map(2).verify_cptp();
        assert!(!f.completely_positive);
        assert!(f.trace_preserving && f.hermiticity_preserving);
        assert!((f.min_choi_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_psd_iff_cp_on_kraus_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tol = Tolerances::default();
        for _ in 0..20 {
            let d = rng.random_range(2..4);
            let nk = rng.random_range(1..4);
            let s = random_channel(&mut rng, d, nk);
            let choi = s.choi();
            assert!(choi.is_psd(tol.psd));
            assert!(s.verify_cptp().is_cptp());
            // push the smallest Choi eigenvalue to −2τ_psd
            let h = (&choi.matrix + choi.matrix.adjoint()) * c64(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let (k, &lmin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let v = eig.eigenvectors.column(k).into_owned();
            let shift = -2.0 * tol.psd - lmin;
            let perturbed = &choi.matrix + &v * v.adjoint() * c64(shift, 0.0);
            let bad = ChoiMatrix {
                dim: d,
                matrix: perturbed,
            };
            assert!(!bad.is_psd(tol.psd));
            assert!(!bad.to_superoperator().verify_cptp().completely_positive);
        }
    }

    #[test]
    fn choi_round_trip_and_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_channel(&mut rng, 3, 2);
        assert!((s.choi().to_superoperator().rep() - s.rep()).norm() < 1e-14);
        let kraus = s.kraus_operators(&Tolerances::default()).unwrap();
        assert!(kraus.len() <= 9);
        let rebuilt = Superoperator::from_kraus(&kraus).unwrap();
        assert!((rebuilt.rep() - s.rep()).norm() < 1e-12);
        assert!(Superoperator::transpose_map(2)
            .kraus_operators(&Tolerances::default())
            .is_err());
    }

    #[test]
    fn cptp_maps_send_states_to_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let s = random_channel(&mut rng, 3, 2);
            let psi: Vec<Complex64> = (0..3)
                .map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let rho = DensityMatrix::pure(&psi).unwrap();
            let out = s.apply(rho.matrix()).unwrap();
            assert!(DensityMatrix::new(out).is_ok());
        }
    }

    #[test]
    fn generator_annihilates_trace() {
        let h = pauli_x() + pauli_z();
        let l = Superoperator::hamiltonian_generator(&h).unwrap();
        assert!(l.trace_annihilation_defect() < 1e-15);
        assert!(Superoperator::identity(2).trace_annihilation_defect() > 1.0);
    }

    #[test]
    fn serde_shape() {
        let s = Superoperator::identity(2);
        s.verify_cptp();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["rep"].as_array().unwrap().len(), 4);
        assert_eq!(v["flags"]["unital"], true);
        let back: Superoperator = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn series_composition_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mk = |rng: &mut ChaCha8Rng| {
            UpdateSeries::new(
                (0..3)
                    .map(|_| Superoperator::new(2, random_matrix(rng, 4)).unwrap())
                    .collect(),
            )
            .unwrap()
        };
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        let ab = UpdateSeries::compose(&a, &b).unwrap();
        // truncated product differs from the true product at O(dt⁴)
        let mut prev = f64::INFINITY;
        for dt in [1e-1, 1e-2] {
            let exact = compose(&a.evaluate(dt), &b.evaluate(dt)).unwrap();
            let err = (exact.rep() - ab.evaluate(dt).rep()).norm();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-6);
        let mix = UpdateSeries::convex_combine(&[0.25, 0.75], &[a.clone(), b.clone()]).unwrap();
        let direct = convex_combine(&[0.25, 0.75], &[a.evaluate(0.1), b.evaluate(0.1)]).unwrap();
        assert!((mix.evaluate(0.1).rep() - direct.rep()).norm() < 1e-14);
    }
}

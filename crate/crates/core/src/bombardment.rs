//! Ancillary bombardment: the system meets a fresh ancilla in state `ρ_A`
//! for a time `dt` under `H = H_S ⊗ 1 + 1 ⊗ H_A + Σ_j Q_j ⊗ R_j`, after
//! which the ancilla is discarded.
//!
//! Besides the exact update map and its series coefficients, this module
//! provides the closed forms for the leading terms of the Liouvillian
//! series and their action on the identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Superoperator, UpdateSeries};
use crate::error::{Error, Result};
use crate::interpolation::{
    purification_order, unital_residual_sweep, LiouvillianSeries, PurificationReport,
};
use crate::operator::{
    self, c64, commutator, gell_mann_basis, identity, is_hermitian, kron, kron_with_limit, matexp,
    matrix_unit, partial_trace_ancilla, partial_trace_system, ComplexMatrix, DensityMatrix, D_MAX,
};
use crate::tolerance::Tolerances;

/// Highest φ-series order [`phi_series`] will build.
pub const PHI_SERIES_MAX: usize = 6;

/// One product term `Q ⊗ R` of the interaction Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    #[serde(with = "operator::serde_matrix")]
    pub q: ComplexMatrix,
    #[serde(with = "operator::serde_matrix")]
    pub r: ComplexMatrix,
}

impl InteractionTerm {
    pub fn new(q: ComplexMatrix, r: ComplexMatrix) -> Self {
        Self { q, r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr")]
pub struct BombardmentSpec {
    pub dim_s: usize,
    pub dim_a: usize,
    #[serde(with = "operator::serde_matrix")]
    pub h_s: ComplexMatrix,
    #[serde(with = "operator::serde_matrix")]
    pub h_a: ComplexMatrix,
    pub interaction: Vec<InteractionTerm>,
    pub rho_a: DensityMatrix,
    pub dt: f64,
}

#[derive(Deserialize)]
struct SpecRepr {
    #[serde(with = "operator::serde_matrix")]
    h_s: ComplexMatrix,
    #[serde(with = "operator::serde_matrix")]
    h_a: ComplexMatrix,
    #[serde(default)]
    interaction: Vec<InteractionTerm>,
    rho_a: DensityMatrix,
    dt: f64,
}

impl TryFrom<SpecRepr> for BombardmentSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        BombardmentSpec::new(r.h_s, r.h_a, r.interaction, r.rho_a, r.dt)
    }
}

fn check_hermitian(name: &str, m: &ComplexMatrix, tol: f64) -> Result<()> {
    if is_hermitian(m, tol) {
        Ok(())
    } else {
        Err(Error::NotHermitian(name.to_string()))
    }
}

impl BombardmentSpec {
    /// Validates dimensions, Hermiticity of every block and `dt > 0`.
    pub fn new(
        h_s: ComplexMatrix,
        h_a: ComplexMatrix,
        interaction: Vec<InteractionTerm>,
        rho_a: DensityMatrix,
        dt: f64,
    ) -> Result<Self> {
        let tol = Tolerances::default().herm;
        let dim_s = h_s.nrows();
        let dim_a = h_a.nrows();
        if h_s.ncols() != dim_s || dim_s == 0 {
            return Err(Error::mismatch(
                "BombardmentSpec",
                "H_S must be square and non-empty",
            ));
        }
        if h_a.ncols() != dim_a || dim_a == 0 {
            return Err(Error::mismatch(
                "BombardmentSpec",
                "H_A must be square and non-empty",
            ));
        }
        if rho_a.dim() != dim_a {
            return Err(Error::mismatch(
                "BombardmentSpec",
                format!("rho_A is {0}x{0} but H_A is {1}x{1}", rho_a.dim(), dim_a),
            ));
        }
        if dim_s.checked_mul(dim_a).is_none_or(|n| n > D_MAX) {
            return Err(Error::DimensionOverflow {
                dim: dim_s.saturating_mul(dim_a),
                max: D_MAX,
            });
        }
        check_hermitian("H_S", &h_s, tol)?;
        check_hermitian("H_A", &h_a, tol)?;
        for (j, t) in interaction.iter().enumerate() {
            if t.q.shape() != (dim_s, dim_s) || t.r.shape() != (dim_a, dim_a) {
                return Err(Error::mismatch(
                    "BombardmentSpec",
                    format!(
                        "interaction term {j} has Q {:?} and R {:?}",
                        t.q.shape(),
                        t.r.shape()
                    ),
                ));
            }
            check_hermitian(&format!("Q[{j}]"), &t.q, tol)?;
            check_hermitian(&format!("R[{j}]"), &t.r, tol)?;
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimeStep(dt));
        }
        Ok(Self {
            dim_s,
            dim_a,
            h_s,
            h_a,
            interaction,
            rho_a,
            dt,
        })
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimeStep(dt));
        }
        Ok(Self { dt, ..self.clone() })
    }

    pub fn joint_dim(&self) -> usize {
        self.dim_s * self.dim_a
    }

    /// `Σ_j Q_j ⊗ R_j`.
    pub fn interaction_hamiltonian(&self) -> Result<ComplexMatrix> {
        interaction_operator(&self.interaction, self.dim_s, self.dim_a)
    }
}

fn interaction_operator(
    terms: &[InteractionTerm],
    dim_s: usize,
    dim_a: usize,
) -> Result<ComplexMatrix> {
    let n = dim_s * dim_a;
    let mut h = ComplexMatrix::zeros(n, n);
    for t in terms {
        h += kron_with_limit(&t.q, &t.r, D_MAX)?;
    }
    Ok(h)
}

/// `H_S ⊗ 1 + 1 ⊗ H_A + Σ_j Q_j ⊗ R_j`.
pub fn build_joint_hamiltonian(spec: &BombardmentSpec) -> Result<ComplexMatrix> {
    let h = kron_with_limit(&spec.h_s, &identity(spec.dim_a), D_MAX)?
        + kron_with_limit(&identity(spec.dim_s), &spec.h_a, D_MAX)?
        + spec.interaction_hamiltonian()?;
    Ok(h)
}

/// `φ(dt)[X] = Tr_A(U (X ⊗ ρ_A) U†)` with `U = exp(−i dt H)`, at the
/// spec's own `dt`.
pub fn build_update_map(spec: &BombardmentSpec) -> Result<Superoperator> {
    update_map_at(spec, spec.dt)
}

/// [`build_update_map`] at an arbitrary `dt`.
pub fn update_map_at(spec: &BombardmentSpec, dt: f64) -> Result<Superoperator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let h = build_joint_hamiltonian(spec)?;
    let u = matexp(&(h * c64(0.0, -dt)))?;
    let u_dag = u.adjoint();
    let rho = spec.rho_a.matrix();
    Superoperator::from_fn(spec.dim_s, |x| {
        let joint = kron(x, rho)?;
        partial_trace_ancilla(&(&u * joint * &u_dag), spec.dim_s, spec.dim_a)
    })
}

/// `φ_k[X] = (1/k!)(−i)ᵏ Tr_A(ad_Hᵏ(X ⊗ ρ_A))` for k = 1…K, built column
/// by column on matrix units.
pub fn phi_series(spec: &BombardmentSpec, k: usize) -> Result<UpdateSeries> {
    if k == 0 {
        return Err(Error::EmptyInput("φ series needs at least one order"));
    }
    if k > PHI_SERIES_MAX {
        return Err(Error::OrderTooHigh {
            requested: k,
            max: PHI_SERIES_MAX,
        });
    }
    let h = build_joint_hamiltonian(spec)?;
    let (ds, da) = (spec.dim_s, spec.dim_a);
    let n = ds * ds;
    let columns: Vec<Vec<ComplexMatrix>> = (0..n)
        .into_par_iter()
        .map(|col| {
            let (i, j) = (col % ds, col / ds);
            let mut y = kron(&matrix_unit(ds, i, j), spec.rho_a.matrix())?;
            let mut out = Vec::with_capacity(k);
            for order in 1..=k {
                y = (&h * &y - &y * &h) * c64(0.0, -1.0 / order as f64);
                out.push(partial_trace_ancilla(&y, ds, da)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let terms = (0..k)
        .map(|order| {
            let mut rep = ComplexMatrix::zeros(n, n);
            for (col, images) in columns.iter().enumerate() {
                rep.set_column(col, &operator::vectorize(&images[order]));
            }
            Superoperator::new(ds, rep)
        })
        .collect::<Result<_>>()?;
    UpdateSeries::new(terms)
}

/// `L₀ … L_{k−1}` for the spec, via [`phi_series`].
pub fn liouvillian_series(spec: &BombardmentSpec, k: usize) -> Result<LiouvillianSeries> {
    LiouvillianSeries::from_phi_series(&phi_series(spec, k)?, k)
}

/// Purification order of the spec from `k` φ coefficients, with the
/// unitality residual sweep over `dts` attached.
pub fn purification_report(
    spec: &BombardmentSpec,
    k: usize,
    tol: f64,
    dts: &[f64],
) -> Result<PurificationReport> {
    let series = liouvillian_series(spec, k)?;
    let sweep = unital_residual_sweep(dts, |dt| update_map_at(spec, dt))?;
    Ok(purification_order(&series, tol).with_residual_sweep(sweep))
}

/// `H⁽⁰⁾ = Tr_A(H_SA (1 ⊗ ρ_A)) = Σ_j Q_j ⟨R_j⟩`.
pub fn h0_effective(spec: &BombardmentSpec) -> ComplexMatrix {
    weighted_q_sum(&spec.interaction, spec.dim_s, |r| {
        (r * spec.rho_a.matrix()).trace()
    })
}

/// `H⁽¹⁾ = (−i/2) Tr_A(H_SA (1 ⊗ [H_A, ρ_A]))`.
pub fn h1_correction(spec: &BombardmentSpec) -> ComplexMatrix {
    let drho = &spec.h_a * spec.rho_a.matrix() - spec.rho_a.matrix() * &spec.h_a;
    weighted_q_sum(&spec.interaction, spec.dim_s, |r| {
        (r * &drho).trace() * c64(0.0, -0.5)
    })
}

fn weighted_q_sum(
    terms: &[InteractionTerm],
    dim_s: usize,
    weight: impl Fn(&ComplexMatrix) -> num_complex::Complex64,
) -> ComplexMatrix {
    terms
        .iter()
        .fold(ComplexMatrix::zeros(dim_s, dim_s), |acc, t| {
            acc + &t.q * weight(&t.r)
        })
}

/// `L₁ = −i[H⁽¹⁾,·] + ½[H⁽⁰⁾,[H⁽⁰⁾,·]] − ½ Tr_A([H_SA,[H_SA, · ⊗ ρ_A]])`.
pub fn l1_closed_form(spec: &BombardmentSpec) -> Result<Superoperator> {
    let (ds, da) = (spec.dim_s, spec.dim_a);
    let h0 = h0_effective(spec);
    let h1 = h1_correction(spec);
    let hsa = spec.interaction_hamiltonian()?;
    let rho = spec.rho_a.matrix();
    Superoperator::from_fn(ds, |x| {
        let unitary = commutator(&h1, x)? * c64(0.0, -1.0);
        let h0_part = commutator(&h0, &commutator(&h0, x)?)? * c64(0.5, 0.0);
        let joint = kron(x, rho)?;
        let inner = commutator(&hsa, &commutator(&hsa, &joint)?)?;
        let dissipative = partial_trace_ancilla(&inner, ds, da)? * c64(-0.5, 0.0);
        Ok(unitary + h0_part + dissipative)
    })
}

/// `L₁[I] = −½ Σ_{ij} [Q_i, Q_j] Tr([R_i, R_j] ρ_A)`; independent of the
/// free Hamiltonians.
pub fn l1_identity_action(
    interaction: &[InteractionTerm],
    rho_a: &DensityMatrix,
) -> Result<ComplexMatrix> {
    let first = interaction.first().ok_or(Error::EmptyInput(
        "l1_identity_action needs at least one interaction term",
    ))?;
    let (ds, da) = (first.q.nrows(), first.r.nrows());
    if rho_a.dim() != da
        || interaction
            .iter()
            .any(|t| t.q.shape() != (ds, ds) || t.r.shape() != (da, da))
    {
        return Err(Error::mismatch(
            "l1_identity_action",
            "terms and rho_A disagree in shape",
        ));
    }
    let rho = rho_a.matrix();
    let mut out = ComplexMatrix::zeros(ds, ds);
    for (i, ti) in interaction.iter().enumerate() {
        for tj in &interaction[i + 1..] {
            let c = ((&ti.r * &tj.r - &tj.r * &ti.r) * rho).trace();
            // ordered pairs (i,j) and (j,i) contribute equally
            out -= (&ti.q * &tj.q - &tj.q * &ti.q) * c;
        }
    }
    Ok(out)
}

/// Outcome of the leading-order purification condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenCondReport {
    pub purifies: bool,
    pub witness_norm: f64,
    /// `(Σ_j ‖Q_j‖₂ ‖R_j‖₂)²`, the scale the tolerance is relative to.
    pub scale: f64,
    #[serde(with = "operator::serde_matrix")]
    pub witness: ComplexMatrix,
}

/// Leading-order purification test: `‖L₁[I]‖_F > tol · scale`.
pub fn gen_cond_check(
    interaction: &[InteractionTerm],
    rho_a: &DensityMatrix,
    tol: f64,
) -> Result<GenCondReport> {
    let witness = l1_identity_action(interaction, rho_a)?;
    let scale = interaction
        .iter()
        .map(|t| operator::spectral_norm(&t.q) * operator::spectral_norm(&t.r))
        .sum::<f64>()
        .powi(2);
    let witness_norm = witness.norm();
    Ok(GenCondReport {
        purifies: scale > 0.0 && witness_norm > tol * scale,
        witness_norm,
        scale,
        witness,
    })
}

/// `L₃[I] = (1/12) [Q,[H_S,Q]] · Tr([R,[H_A,R]] ρ_A)` for a single product
/// coupling `Q ⊗ R`.
pub fn l3_identity_tensor_product(
    q: &ComplexMatrix,
    r: &ComplexMatrix,
    h_s: &ComplexMatrix,
    h_a: &ComplexMatrix,
    rho_a: &DensityMatrix,
) -> Result<ComplexMatrix> {
    let sys = commutator(q, &commutator(h_s, q)?)?;
    let anc = (commutator(r, &commutator(h_a, r)?)? * rho_a.matrix()).trace();
    Ok(sys * (anc / 12.0))
}

/// `φ_k[I]` keeping only histories that start and end with the
/// interaction: `(1/k!)(−i)ᵏ Tr_A(ad_{H_SA} ad_H^{k−2} ad_{H_SA}(1 ⊗ ρ_A))`.
/// Equals `φ_k[I]` whenever `φ_{k−1}[I]` vanishes for every ancilla state.
pub fn history_reduced_identity_image(spec: &BombardmentSpec, k: usize) -> Result<ComplexMatrix> {
    if k < 2 {
        return Err(Error::Unsupported("history reduction needs k ≥ 2".into()));
    }
    let h = build_joint_hamiltonian(spec)?;
    let hsa = spec.interaction_hamiltonian()?;
    let mut y = commutator(&hsa, &kron(&identity(spec.dim_s), spec.rho_a.matrix())?)?;
    for _ in 0..k - 2 {
        y = commutator(&h, &y)?;
    }
    y = commutator(&hsa, &y)?;
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    let phase = c64(0.0, -1.0).powu(k as u32) / factorial;
    Ok(partial_trace_ancilla(&y, spec.dim_s, spec.dim_a)? * phase)
}

type Sampler = dyn Fn(f64) -> Vec<InteractionTerm> + Send + Sync;

/// Interaction `H_SA(t/dt)` given as a function of the rescaled time
/// `ξ ∈ [0, 1]`.
pub struct TimeDependentInteraction {
    sampler: Box<Sampler>,
    pub quadrature_order: usize,
}

impl std::fmt::Debug for TimeDependentInteraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeDependentInteraction")
            .field("quadrature_order", &self.quadrature_order)
            .finish_non_exhaustive()
    }
}

impl TimeDependentInteraction {
    pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

    pub fn new(sampler: impl Fn(f64) -> Vec<InteractionTerm> + Send + Sync + 'static) -> Self {
        Self {
            sampler: Box::new(sampler),
            quadrature_order: Self::DEFAULT_QUADRATURE_ORDER,
        }
    }

    pub fn with_quadrature_order(mut self, order: usize) -> Self {
        self.quadrature_order = order;
        self
    }

    pub fn sample(&self, xi: f64) -> Vec<InteractionTerm> {
        (self.sampler)(xi)
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// `G₀(H_SA) = ∫₀¹ H_SA(ξ) dξ` by Gauss–Legendre quadrature, re-expressed
/// as a term list `Σ_a A_a ⊗ R_a` over an orthonormal Hermitian basis
/// `{A_a}` of the system.
pub fn time_averaged_interaction(tdi: &TimeDependentInteraction) -> Result<Vec<InteractionTerm>> {
    if tdi.quadrature_order == 0 {
        return Err(Error::EmptyInput("quadrature order must be positive"));
    }
    let tol = Tolerances::default().herm;
    let mut average: Option<(ComplexMatrix, usize, usize)> = None;
    let mut mass = 0.0;
    for (xi, w) in gauss_legendre(tdi.quadrature_order) {
        let terms = tdi.sample(xi);
        let first = terms
            .first()
            .ok_or(Error::EmptyInput("sampler returned no interaction terms"))?;
        let (ds, da) = (first.q.nrows(), first.r.nrows());
        for (j, t) in terms.iter().enumerate() {
            if !is_hermitian(&t.q, tol) || !is_hermitian(&t.r, tol) {
                return Err(Error::NotHermitian(format!(
                    "interaction term {j} sampled at ξ = {xi}"
                )));
            }
        }
        let g = interaction_operator(&terms, ds, da)? * c64(w, 0.0);
        mass += g.norm();
        match &mut average {
            None => average = Some((g, ds, da)),
            Some((acc, s, a)) => {
                if (*s, *a) != (ds, da) {
                    return Err(Error::mismatch(
                        "time_averaged_interaction",
                        "sample shapes change with ξ",
                    ));
                }
                *acc += g;
            }
        }
    }
    let (g, ds, da) = average.expect("quadrature order is positive");
    Ok(operator_schmidt_terms(
        &g,
        ds,
        da,
        64.0 * f64::EPSILON * mass,
    ))
}

/// Splits a joint Hermitian operator into `Σ_a A_a ⊗ R_a` with `A_a` from
/// `{I/√d} ∪` Gell-Mann, dropping terms with ‖R_a‖_F ≤ `cutoff`.
fn operator_schmidt_terms(
    g: &ComplexMatrix,
    ds: usize,
    da: usize,
    cutoff: f64,
) -> Vec<InteractionTerm> {
    let mut basis = vec![identity(ds) * c64(1.0 / (ds as f64).sqrt(), 0.0)];
    basis.extend(gell_mann_basis(ds));
    basis
        .into_iter()
        .filter_map(|a| {
            let lifted = kron(&a, &identity(da)).expect("dims bounded by the sample");
            let r = partial_trace_system(&(lifted * g), ds, da).expect("shape fixed");
            let r = (&r + r.adjoint()) * c64(0.5, 0.0);
            (r.norm() > cutoff).then(|| InteractionTerm::new(a, r))
        })
        .collect()
}

/// `L_k[I]` for a time-dependent interaction. Only the first-order
/// time-average reduction is implemented: `k = 0` is always zero and
/// `k = 1` is `L₁[I]` of the averaged interaction.
pub fn time_dependent_identity_action(
    tdi: &TimeDependentInteraction,
    rho_a: &DensityMatrix,
    k: usize,
) -> Result<ComplexMatrix> {
    let avg = time_averaged_interaction(tdi)?;
    match k {
        0 => {
            let ds = avg.first().map_or(1, |t| t.q.nrows());
            Ok(ComplexMatrix::zeros(ds, ds))
        }
        1 => l1_identity_action(&avg, rho_a),
        _ => Err(Error::Unsupported(format!(
            "order {k} coefficients for time-dependent interactions need time-ordered terms beyond the time average"
        ))),
    }
}

/// A time-dependent interaction purifies at leading order iff its time
/// average does.
pub fn time_dependent_gen_cond(
    tdi: &TimeDependentInteraction,
    rho_a: &DensityMatrix,
    tol: f64,
) -> Result<GenCondReport> {
    let avg = time_averaged_interaction(tdi)?;
    if avg.is_empty() {
        let ds = tdi.sample(0.0).first().map_or(1, |t| t.q.nrows());
        return Ok(GenCondReport {
            purifies: false,
            witness_norm: 0.0,
            scale: 0.0,
            witness: ComplexMatrix::zeros(ds, ds),
        });
    }
    gen_cond_check(&avg, rho_a, tol)
}

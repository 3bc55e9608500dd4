//! Markovian interpolation of a discrete update map.
//!
//! Given `φ(dt)`, the effective Liouvillian `L_dt = log(φ(dt))/dt` generates
//! a semigroup that agrees with the discrete dynamics at every multiple of
//! `dt`. Expanding `φ(dt) = 𝟙 + Σ dtᵏ φ_k` gives `L_dt = Σ dtᵏ L_k`; the
//! first index `m` with `L_m[I] ≠ 0` is the purification order.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::{Superoperator, UpdateSeries};
use crate::error::{Error, Result};
use crate::fit;
use crate::operator::{self, c64, matexp, matlog_principal_with, ComplexMatrix};
use crate::tolerance::Tolerances;

/// Highest φ-series order handled by the closed-form recursion.
pub const K_MAX: usize = 4;
/// Highest φ-series order accepted by the generic series logarithm.
pub const K_EXPERIMENTAL: usize = 6;

/// `L_dt = log(φ)/dt` on the principal branch.
pub fn effective_liouvillian(phi: &Superoperator, dt: f64) -> Result<Superoperator> {
    effective_liouvillian_with(phi, dt, &Tolerances::default())
}

pub fn effective_liouvillian_with(
    phi: &Superoperator,
    dt: f64,
    tol: &Tolerances,
) -> Result<Superoperator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let log = matlog_principal_with(phi.rep(), tol.branch).map_err(|e| match e {
        Error::BranchCutViolation { eigenvalue, .. } => Error::BranchCutViolation {
            eigenvalue,
            dt: Some(dt),
        },
        other => other,
    })?;
    Superoperator::new(phi.dim(), log * c64(1.0 / dt, 0.0))
}

/// Coefficients `L₀ … L_{K−1}` of `L_dt = Σ dtᵏ L_k`, built from `φ₁ … φ_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvillianSeries {
    pub dim: usize,
    pub coeffs: Vec<Superoperator>,
    /// Number of φ coefficients consumed; `coeffs.len() == phi_order`.
    pub phi_order: usize,
    /// Set when the coefficients came from the generic series logarithm.
    pub experimental: bool,
    pub source: UpdateSeries,
}

impl LiouvillianSeries {
    /// Uses the first `k` coefficients of `phis`. Orders up to [`K_MAX`] use
    /// the closed-form recursion; up to [`K_EXPERIMENTAL`] the generic
    /// series logarithm.
    pub fn from_phi_series(phis: &UpdateSeries, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyInput(
                "Liouvillian series needs at least one φ coefficient",
            ));
        }
        if k > K_EXPERIMENTAL {
            return Err(Error::OrderTooHigh {
                requested: k,
                max: K_EXPERIMENTAL,
            });
        }
        if phis.order() < k {
            return Err(Error::mismatch(
                "LiouvillianSeries::from_phi_series",
                format!(
                    "requested order {k} but only {} φ coefficients supplied",
                    phis.order()
                ),
            ));
        }
        let reps: Vec<&ComplexMatrix> = phis.terms[..k].iter().map(Superoperator::rep).collect();
        let (coeffs, experimental) = if k <= K_MAX {
            (closed_form_coefficients(&reps), false)
        } else {
            log::warn!("Liouvillian coefficients beyond order {K_MAX} use the experimental series logarithm");
            (series_log_coefficients(&reps), true)
        };
        let dim = phis.dim;
        Ok(Self {
            dim,
            coeffs: coeffs
                .into_iter()
                .map(|r| Superoperator::new(dim, r))
                .collect::<Result<_>>()?,
            phi_order: k,
            experimental,
            source: UpdateSeries::new(phis.terms[..k].to_vec())?,
        })
    }

    /// Generic series-logarithm route at any order up to [`K_EXPERIMENTAL`].
    pub fn from_phi_series_generic(phis: &UpdateSeries, k: usize) -> Result<Self> {
        let mut s = Self::from_phi_series(phis, k)?;
        let reps: Vec<&ComplexMatrix> = phis.terms[..k].iter().map(Superoperator::rep).collect();
        s.coeffs = series_log_coefficients(&reps)
            .into_iter()
            .map(|r| Superoperator::new(s.dim, r))
            .collect::<Result<_>>()?;
        s.experimental = k > K_MAX;
        Ok(s)
    }

    /// Highest coefficient index `K` (the series is `L₀ … L_K`).
    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> Option<&Superoperator> {
        self.coeffs.get(k)
    }

    /// `Σ_{k≤K} dtᵏ L_k`.
    pub fn evaluate(&self, dt: f64) -> Superoperator {
        self.evaluate_up_to(dt, self.truncation_order())
    }

    pub fn evaluate_up_to(&self, dt: f64, k_max: usize) -> Superoperator {
        let n = self.dim * self.dim;
        let mut rep = ComplexMatrix::zeros(n, n);
        let mut p = 1.0;
        for c in self.coeffs.iter().take(k_max + 1) {
            rep += c.rep() * c64(p, 0.0);
            p *= dt;
        }
        Superoperator::new(self.dim, rep).expect("shape is fixed")
    }

    /// `L_k[I]` for every k.
    pub fn identity_images(&self) -> Vec<ComplexMatrix> {
        self.coeffs
            .iter()
            .map(Superoperator::apply_identity)
            .collect()
    }

    /// Largest trace-annihilation defect over the coefficients.
    pub fn max_trace_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(Superoperator::trace_annihilation_defect)
            .fold(0.0, f64::max)
    }
}

fn closed_form_coefficients(phi: &[&ComplexMatrix]) -> Vec<ComplexMatrix> {
    let half = c64(0.5, 0.0);
    let sixth = c64(1.0 / 6.0, 0.0);
    let mut out: Vec<ComplexMatrix> = Vec::with_capacity(phi.len());
    let l0 = phi[0].clone();
    out.push(l0.clone());
    if phi.len() > 1 {
        let l0sq = &l0 * &l0;
        out.push(phi[1] - &l0sq * half);
    }
    if phi.len() > 2 {
        let l1 = &out[1];
        let l0sq = &l0 * &l0;
        let l2 = phi[2] - (&l0 * l1 + l1 * &l0) * half - &l0sq * &l0 * sixth;
        out.push(l2);
    }
    if phi.len() > 3 {
        let (l1, l2) = (&out[1], &out[2]);
        let l0sq = &l0 * &l0;
        let l3 = phi[3]
            - (&l0 * l2 + l2 * &l0 + l1 * l1) * half
            - (&l0sq * l1 + &l0 * l1 * &l0 + l1 * &l0sq) * sixth
            - &l0sq * &l0sq * c64(1.0 / 24.0, 0.0);
        out.push(l3);
    }
    out
}

/// `log(𝟙 + X)` with `X = Σ_{k=1..K} tᵏ x_k`, collected order by order:
/// `[tᵏ] Σ_n (−1)ⁿ⁺¹ Xⁿ / n`, returned shifted so entry `k−1` is `[tᵏ]`.
fn series_log_coefficients(x: &[&ComplexMatrix]) -> Vec<ComplexMatrix> {
    let k_max = x.len();
    let n = x[0].nrows();
    let zero = || ComplexMatrix::zeros(n, n);
    // power[k] holds [tᵏ] Xᵖ for the current p
    let mut power: Vec<ComplexMatrix> = (0..=k_max)
        .map(|k| if k == 0 { zero() } else { x[k - 1].clone() })
        .collect();
    let mut out: Vec<ComplexMatrix> = (1..=k_max).map(|k| power[k].clone()).collect();
    for p in 2..=k_max {
        let mut next: Vec<ComplexMatrix> = (0..=k_max).map(|_| zero()).collect();
        for (k, slot) in next.iter_mut().enumerate().skip(p) {
            for j in 1..=(k - p + 1) {
                *slot += &power[k - j] * x[j - 1];
            }
        }
        power = next;
        let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
        for k in p..=k_max {
            out[k - 1] += &power[k] * c64(sign / p as f64, 0.0);
        }
    }
    out
}

/// Purification order: a finite index `m`, or none up to the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PurificationOrder {
    Finite(usize),
    NoneUpTo(usize),
}

impl PurificationOrder {
    pub fn finite(self) -> Option<usize> {
        match self {
            Self::Finite(m) => Some(m),
            Self::NoneUpTo(_) => None,
        }
    }
}

impl fmt::Display for PurificationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(m) => write!(f, "{m}"),
            Self::NoneUpTo(k) => write!(f, "none≤{k}"),
        }
    }
}

impl Serialize for PurificationOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(m) => s.serialize_u64(*m as u64),
            Self::NoneUpTo(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for PurificationOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(m) => Ok(Self::Finite(m)),
            Raw::Text(t) => t
                .strip_prefix("none≤")
                .and_then(|k| k.parse().ok())
                .map(Self::NoneUpTo)
                .ok_or_else(|| serde::de::Error::custom(format!("bad purification order `{t}`"))),
        }
    }
}

/// Check of the discrete offset rule `φ(dt)[I] − I = O(dt^{m+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetCheck {
    pub expected_slope: f64,
    /// `None` when the residuals sit at the numerical floor.
    pub fitted_slope: Option<f64>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurificationReport {
    pub order: PurificationOrder,
    /// ‖L_k[I]‖_F for k = 0…K.
    pub norms: Vec<f64>,
    #[serde(with = "operator::serde_matrix::vec")]
    pub identity_images: Vec<ComplexMatrix>,
    /// `[dt, ‖φ(dt)[I] − I‖_F]` pairs.
    pub residual_sweep: Vec<[f64; 2]>,
    pub tolerance: f64,
    /// maxₖ ‖L_k‖₂, the scale the tolerance is relative to.
    pub scale: f64,
    pub offset_check: Option<OffsetCheck>,
}

impl PurificationReport {
    /// The first non-vanishing `L_m[I]`.
    pub fn witness(&self) -> Option<&ComplexMatrix> {
        self.order.finite().map(|m| &self.identity_images[m])
    }

    /// Attaches a unitality sweep and the offset-rule cross-check.
    pub fn with_residual_sweep(mut self, sweep: Vec<[f64; 2]>) -> Self {
        self.offset_check = self.order.finite().map(|m| {
            let expected = (m + 1) as f64;
            let fitted = fit::loglog_slope(&sweep);
            OffsetCheck {
                expected_slope: expected,
                fitted_slope: fitted,
                consistent: fitted.is_some_and(|s| (s - expected).abs() <= 0.3),
            }
        });
        self.residual_sweep = sweep;
        self
    }
}

/// Smallest `m` with ‖L_m[I]‖_F > tol · maxₖ‖L_k‖₂.
pub fn purification_order(series: &LiouvillianSeries, tol: f64) -> PurificationReport {
    let images = series.identity_images();
    let norms: Vec<f64> = images.iter().map(|m| m.norm()).collect();
    let scale = series
        .coeffs
        .iter()
        .map(Superoperator::operator_norm)
        .fold(0.0, f64::max);
    let threshold = tol * scale;
    let order = match norms.iter().position(|&n| scale > 0.0 && n > threshold) {
        Some(m) => PurificationOrder::Finite(m),
        None => PurificationOrder::NoneUpTo(series.truncation_order()),
    };
    PurificationReport {
        order,
        norms,
        identity_images: images,
        residual_sweep: Vec::new(),
        tolerance: tol,
        scale,
        offset_check: None,
    }
}

/// `[dt, ‖φ(dt)[I] − I‖_F]` over `dts`, evaluated in parallel.
pub fn unital_residual_sweep<F>(dts: &[f64], phi_at: F) -> Result<Vec<[f64; 2]>>
where
    F: Fn(f64) -> Result<Superoperator> + Sync,
{
    dts.par_iter()
        .map(|&dt| Ok([dt, phi_at(dt)?.is_unital(0.0).1]))
        .collect()
}

/// `[dt, ‖L_dt[I]‖_F]` over `dts`, evaluated in parallel.
pub fn liouvillian_identity_sweep<F>(dts: &[f64], phi_at: F) -> Result<Vec<[f64; 2]>>
where
    F: Fn(f64) -> Result<Superoperator> + Sync,
{
    dts.par_iter()
        .map(|&dt| {
            let l = effective_liouvillian(&phi_at(dt)?, dt)?;
            Ok([dt, l.apply_identity().norm()])
        })
        .collect()
}

/// `‖L_dt − Σ_{k≤K} dtᵏ L_k‖_F`.
pub fn series_residual(
    series: &LiouvillianSeries,
    k_max: usize,
    phi: &Superoperator,
    dt: f64,
) -> Result<f64> {
    let l = effective_liouvillian(phi, dt)?;
    Ok((l.rep() - series.evaluate_up_to(dt, k_max).rep()).norm())
}

/// maxₙ ‖exp(n dt L) − φⁿ‖_F for n = 1…n_steps.
pub fn verify_matching(
    phi: &Superoperator,
    l: &Superoperator,
    dt: f64,
    n_steps: usize,
) -> Result<f64> {
    Ok(matching_residuals(phi, l, dt, n_steps)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `‖exp(n dt L) − φⁿ‖_F` for n = 1…n_steps.
pub fn matching_residuals(
    phi: &Superoperator,
    l: &Superoperator,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<f64>> {
    if phi.dim() != l.dim() {
        return Err(Error::mismatch(
            "verify_matching",
            "φ and L differ in dimension",
        ));
    }
    let mut power = operator::identity(phi.dim() * phi.dim());
    let mut out = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        power = phi.rep() * &power;
        let e = matexp(&(l.rep() * c64(n as f64 * dt, 0.0)))?;
        out.push((e - &power).norm());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::unitary_propagator;
    use crate::operator::{identity, pauli_x, pauli_y, pauli_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rep(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_series(rng: &mut ChaCha8Rng, d: usize, k: usize) -> UpdateSeries {
        UpdateSeries::new(
            (0..k)
                .map(|_| Superoperator::new(d, random_rep(rng, d * d)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = effective_liouvillian(&Superoperator::identity(3), 0.1).unwrap();
        assert!(l.norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_dt() {
        let id = Superoperator::identity(2);
        for dt in [0.0, -0.1, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                effective_liouvillian(&id, dt),
                Err(Error::InvalidTimeStep(_))
            ));
        }
    }

    #[test]
    fn branch_cut_carries_dt() {
        // conjugation by exp(−iπσ_z/2) has eigenvalue −1
        let u = unitary_propagator(&pauli_z(), std::f64::consts::FRAC_PI_2).unwrap();
        let phi = Superoperator::conjugation(&u).unwrap();
        match effective_liouvillian(&phi, 0.5) {
            Err(Error::BranchCutViolation { dt: Some(dt), .. }) => assert_eq!(dt, 0.5),
            other => panic!("expected branch cut, got {other:?}"),
        }
    }

    #[test]
    fn unitary_case_recovers_commutator() {
        let h = pauli_x() * c64(0.7, 0.0) + pauli_z() * c64(0.2, 0.0);
        let dt = 0.05;
        let phi = Superoperator::conjugation(&unitary_propagator(&h, dt).unwrap()).unwrap();
        let l = effective_liouvillian(&phi, dt).unwrap();
        let expected = Superoperator::hamiltonian_generator(&h).unwrap();
        assert!((l.rep() - expected.rep()).norm() <= 1e-12 * phi.norm() / dt);
        assert!(verify_matching(&phi, &l, dt, 1).unwrap() <= 1e-12 * phi.norm());
    }

    #[test]
    fn zero_phis_give_zero_series() {
        let zero = UpdateSeries::new(vec![Superoperator::zero(2); 4]).unwrap();
        let s = LiouvillianSeries::from_phi_series(&zero, 4).unwrap();
        assert!(s.coeffs.iter().all(|c| c.norm() == 0.0));
        let r = purification_order(&s, 1e-8);
        assert_eq!(r.order, PurificationOrder::NoneUpTo(3));
    }

    #[test]
    fn closed_forms_match_generic_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let phis = random_series(&mut rng, 2, 4);
            let a = LiouvillianSeries::from_phi_series(&phis, 4).unwrap();
            let b = LiouvillianSeries::from_phi_series_generic(&phis, 4).unwrap();
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((x.rep() - y.rep()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn series_log_inverts_exponential_series() {
        // φ(t) = exp(t A + t² B) has log φ = t A + t² B exactly
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_rep(&mut rng, 4);
        let b = random_rep(&mut rng, 4);
        // Taylor coefficients of exp(tA + t²B) up to t⁶
        let mut coeffs: Vec<ComplexMatrix> = vec![ComplexMatrix::zeros(4, 4); 7];
        coeffs[0] = identity(4);
        let mut term = vec![ComplexMatrix::zeros(4, 4); 7];
        term[0] = identity(4);
        for n in 1..=6 {
            let mut next = vec![ComplexMatrix::zeros(4, 4); 7];
            for k in 0..=6 {
                if k < 6 {
                    next[k + 1] += &term[k] * &a * c64(1.0 / n as f64, 0.0);
                }
                if k + 2 <= 6 {
                    next[k + 2] += &term[k] * &b * c64(1.0 / n as f64, 0.0);
                }
            }
            term = next;
            for k in 0..=6 {
                coeffs[k] += &term[k];
            }
        }
        let phis = UpdateSeries::new(
            coeffs[1..]
                .iter()
                .map(|c| Superoperator::new(2, c.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let s = LiouvillianSeries::from_phi_series(&phis, 6).unwrap();
        assert!(s.experimental);
        assert!((s.coeffs[0].rep() - &a).norm() < 1e-12);
        assert!((s.coeffs[1].rep() - &b).norm() < 1e-12);
        for c in &s.coeffs[2..] {
            assert!(c.norm() < 1e-11);
        }
    }

    #[test]
    fn order_bound() {
        let phis = UpdateSeries::new(vec![Superoperator::zero(2); 7]).unwrap();
        assert!(matches!(
            LiouvillianSeries::from_phi_series(&phis, 7),
            Err(Error::OrderTooHigh {
                requested: 7,
                max: 6
            })
        ));
        assert!(LiouvillianSeries::from_phi_series(&phis, 0).is_err());
    }

    #[test]
    fn order_detection_picks_first_nonzero() {
        // L0 unitary, L1 annihilates I, L2 moves I
        let h = Superoperator::hamiltonian_generator(&pauli_y()).unwrap();
        let mut terms = vec![h, Superoperator::hamiltonian_generator(&pauli_x()).unwrap()];
        // φ₃ with φ₃[I] = σ_z survives into L₂[I] since L₀[I] = L₁[I] = 0
        let z_vec = operator::vectorize(&pauli_z());
        let i_vec = operator::vectorize(&identity(2));
        let phi3 = &z_vec * i_vec.adjoint() * c64(0.5, 0.0);
        terms.push(Superoperator::new(2, phi3).unwrap());
        let phis = UpdateSeries::new(terms).unwrap();
        let s = LiouvillianSeries::from_phi_series(&phis, 3).unwrap();
        let r = purification_order(&s, 1e-8);
        assert_eq!(r.order, PurificationOrder::Finite(2));
        assert!(r.norms[0] < 1e-15 && r.norms[1] < 1e-15);
        assert!((r.witness().unwrap() - pauli_z()).norm() < 1e-14);
    }

    #[test]
    fn report_serializes_order() {
        let r = PurificationReport {
            order: PurificationOrder::NoneUpTo(3),
            norms: vec![0.0],
            identity_images: vec![identity(2)],
            residual_sweep: vec![[0.1, 0.0]],
            tolerance: 1e-8,
            scale: 1.0,
            offset_check: None,
        };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["order"], "none≤3");
        let back: PurificationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        assert_eq!(
            serde_json::to_value(PurificationOrder::Finite(1)).unwrap(),
            1
        );
    }

    #[test]
    fn matching_detects_perturbation() {
        let h = pauli_x() + pauli_z() * c64(0.5, 0.0);
        let dt = 0.01;
        let phi = Superoperator::conjugation(&unitary_propagator(&h, dt).unwrap()).unwrap();
        let l = effective_liouvillian(&phi, dt).unwrap();
        assert!(verify_matching(&phi, &l, dt, 20).unwrap() < 20.0 * 1e-12);
        let dephase = Superoperator::sandwich(&pauli_z(), &pauli_z())
            .unwrap()
            .sub(&Superoperator::identity(2))
            .unwrap();
        let bad = l.add(&dephase.scaled(c64(1e-3, 0.0))).unwrap();
        let r10 = verify_matching(&phi, &bad, dt, 10).unwrap();
        let r20 = verify_matching(&phi, &bad, dt, 20).unwrap();
        assert!(r10 > 1e-6);
        assert!((r20 / r10 - 2.0).abs() < 0.1);
        let id = Superoperator::identity(2);
        assert_eq!(
            verify_matching(&id, &Superoperator::zero(2), dt, 5).unwrap(),
            0.0
        );
    }
}

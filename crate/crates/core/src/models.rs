//! Ready-made bombardment specs: the worked examples (spin–spin,
//! qubit–oscillator, single and two-term product couplings, free
//! evolution) and seeded random instances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bombardment::{BombardmentSpec, InteractionTerm};
use crate::error::{Error, Result};
use crate::operator::{
    self, annihilation, c64, pauli_x, pauli_y, pauli_z, ComplexMatrix, DensityMatrix,
};

/// Population on the top two oscillator levels above which truncation
/// effects are reported.
pub const BOUNDARY_WEIGHT_WARNING: f64 = 1e-8;
pub const DEFAULT_LEVELS: usize = 20;

/// Quadrature normalisation for truncated oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureConvention {
    /// `x = (a + a†)/√2`, `p = i(a† − a)/√2`, so `[x, p] = i`.
    #[default]
    Canonical,
    /// `x = (a + a†)/2`, `p = i(a − a†)/2`, so `[x, p] = −i/2`.
    Halved,
}

/// Truncated quadratures `(x, p)` on `n` Fock levels.
pub fn quadratures(n: usize, convention: QuadratureConvention) -> (ComplexMatrix, ComplexMatrix) {
    let a = annihilation(n);
    let ad = a.adjoint();
    match convention {
        QuadratureConvention::Canonical => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            ((&a + &ad) * c64(s, 0.0), (&ad - &a) * c64(0.0, s))
        }
        QuadratureConvention::Halved => ((&a + &ad) * c64(0.5, 0.0), (&a - &ad) * c64(0.0, 0.5)),
    }
}

/// Oscillator ancilla state: `"vacuum"`, `"fock k"`, `"thermal r"`
/// (populations ∝ rᵏ) or an explicit density matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OscillatorState {
    #[default]
    Vacuum,
    Fock(usize),
    Thermal(f64),
    Matrix(ComplexMatrix),
}

impl OscillatorState {
    pub fn density_matrix(&self, levels: usize) -> Result<DensityMatrix> {
        match self {
            Self::Vacuum => DensityMatrix::basis_state(levels, 0),
            Self::Fock(k) => DensityMatrix::basis_state(levels, *k),
            Self::Thermal(r) => DensityMatrix::geometric(levels, *r),
            Self::Matrix(m) => {
                if m.nrows() != levels {
                    return Err(Error::mismatch(
                        "OscillatorState",
                        format!(
                            "state is {0}x{0} but the oscillator has {levels} levels",
                            m.nrows()
                        ),
                    ));
                }
                DensityMatrix::new(m.clone())
            }
        }
    }
}

impl fmt::Display for OscillatorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Vacuum => write!(f, "vacuum"),
            Self::Fock(k) => write!(f, "fock {k}"),
            Self::Thermal(r) => write!(f, "thermal {r}"),
            Self::Matrix(m) => write!(f, "matrix {}x{}", m.nrows(), m.ncols()),
        }
    }
}

impl FromStr for OscillatorState {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("vacuum"), None, None) => Ok(Self::Vacuum),
            (Some("fock"), Some(k), None) => k
                .parse()
                .map(Self::Fock)
                .map_err(|_| format!("bad Fock index `{k}`")),
            (Some("thermal"), Some(r), None) => r
                .parse()
                .map(Self::Thermal)
                .map_err(|_| format!("bad ratio `{r}`")),
            _ => Err(format!(
                "unknown oscillator state `{s}` (expected \"vacuum\", \"fock k\" or \"thermal r\")"
            )),
        }
    }
}

impl Serialize for OscillatorState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Matrix(m) => operator::serde_matrix::serialize(m, s),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for OscillatorState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Rows(Vec<Vec<[f64; 2]>>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Raw::Rows(r) => operator::serde_matrix::from_rows(&r)
                .map(Self::Matrix)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// Population on the top two levels; logs a warning above
/// [`BOUNDARY_WEIGHT_WARNING`].
pub fn check_boundary_weight(rho: &DensityMatrix) -> f64 {
    let w = rho.top_level_weight(2);
    if w > BOUNDARY_WEIGHT_WARNING {
        log::warn!(
            "oscillator state has weight {w:e} on the top two of {} levels; truncation may distort results",
            rho.dim()
        );
    }
    w
}

/// `H_SA = J Σ_k σ_k ⊗ σ_k` between two qubits.
pub fn spin_spin(
    j: f64,
    rho_a: DensityMatrix,
    h_s: Option<ComplexMatrix>,
    h_a: Option<ComplexMatrix>,
    dt: f64,
) -> Result<BombardmentSpec> {
    let terms = [pauli_x(), pauli_y(), pauli_z()]
        .into_iter()
        .map(|s| InteractionTerm::new(&s * c64(j, 0.0), s))
        .collect();
    BombardmentSpec::new(
        h_s.unwrap_or_else(|| ComplexMatrix::zeros(2, 2)),
        h_a.unwrap_or_else(|| ComplexMatrix::zeros(2, 2)),
        terms,
        rho_a,
        dt,
    )
}

/// Qubit system, oscillator ancilla truncated at `levels`:
/// `H_SA = ω (σ_x ⊗ x + σ_y ⊗ p)`, free Hamiltonians zero.
pub fn qubit_oscillator(
    omega: f64,
    levels: usize,
    rho_a: DensityMatrix,
    dt: f64,
    convention: QuadratureConvention,
) -> Result<BombardmentSpec> {
    if levels < 3 {
        return Err(Error::Unsupported(format!(
            "oscillator needs at least 3 levels, got {levels}"
        )));
    }
    check_boundary_weight(&rho_a);
    let (x, p) = quadratures(levels, convention);
    let w = c64(omega, 0.0);
    two_term(
        pauli_x() * w,
        x,
        pauli_y() * w,
        p,
        ComplexMatrix::zeros(2, 2),
        ComplexMatrix::zeros(levels, levels),
        rho_a,
        dt,
    )
}

/// Single product coupling `Q ⊗ R`.
pub fn tensor_product(
    q: ComplexMatrix,
    r: ComplexMatrix,
    h_s: ComplexMatrix,
    h_a: ComplexMatrix,
    rho_a: DensityMatrix,
    dt: f64,
) -> Result<BombardmentSpec> {
    BombardmentSpec::new(h_s, h_a, vec![InteractionTerm::new(q, r)], rho_a, dt)
}

/// Two product terms `Q ⊗ R + S ⊗ T`.
#[allow(clippy::too_many_arguments)]
pub fn two_term(
    q: ComplexMatrix,
    r: ComplexMatrix,
    s: ComplexMatrix,
    t: ComplexMatrix,
    h_s: ComplexMatrix,
    h_a: ComplexMatrix,
    rho_a: DensityMatrix,
    dt: f64,
) -> Result<BombardmentSpec> {
    BombardmentSpec::new(
        h_s,
        h_a,
        vec![InteractionTerm::new(q, r), InteractionTerm::new(s, t)],
        rho_a,
        dt,
    )
}

/// No interaction: the map is unitary conjugation by `exp(−i dt H_S)`.
pub fn free_only(
    h_s: ComplexMatrix,
    h_a: ComplexMatrix,
    rho_a: DensityMatrix,
    dt: f64,
) -> Result<BombardmentSpec> {
    BombardmentSpec::new(h_s, h_a, vec![], rho_a, dt)
}

fn gaussian_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(n, n, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&a + a.adjoint()) * c64(0.5 * scale, 0.0)
}

/// Mixture of `n` random pure states with random weights (full rank for
/// `n ≥ d` almost surely).
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> DensityMatrix {
    let weights: Vec<f64> = (0..n.max(1)).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut m = ComplexMatrix::zeros(d, d);
    for w in weights {
        let v = nalgebra::DVector::from_fn(d, |_, _| {
            c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let v = &v / c64(v.norm(), 0.0);
        m += &v * v.adjoint() * c64(w / total, 0.0);
    }
    let m = (&m + m.adjoint()) * c64(0.5, 0.0);
    DensityMatrix::new(m).expect("convex mixture of pure states")
}

/// Deterministic random spec: Gaussian Hermitian blocks scaled by `scale`
/// and an ancilla state mixed from `dim_a` random pure states.
pub fn random_spec(
    seed: u64,
    dims: (usize, usize),
    n_terms: usize,
    scale: f64,
    dt: f64,
) -> Result<BombardmentSpec> {
    let (ds, da) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = gaussian_hermitian(&mut rng, ds, scale);
    let h_a = gaussian_hermitian(&mut rng, da, scale);
    let terms = (0..n_terms)
        .map(|_| {
            InteractionTerm::new(
                gaussian_hermitian(&mut rng, ds, scale),
                gaussian_hermitian(&mut rng, da, 1.0),
            )
        })
        .collect();
    let rho_a = random_density_matrix(&mut rng, da, da);
    BombardmentSpec::new(h_s, h_a, terms, rho_a, dt)
}

fn default_dt() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}
fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_levels() -> usize {
    DEFAULT_LEVELS
}
fn default_two() -> usize {
    2
}

/// Named preset with parameters, as accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelPreset {
    SpinSpin {
        #[serde(rename = "J", alias = "j", default = "default_one")]
        j: f64,
        /// Ancilla Bloch vector.
        #[serde(default = "default_up")]
        bloch: [f64; 3],
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_s: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_a: Option<ComplexMatrix>,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    QubitOscillator {
        #[serde(default = "default_one")]
        omega: f64,
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default)]
        state: OscillatorState,
        #[serde(default)]
        convention: QuadratureConvention,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    /// Defaults: `Q = R = σ_x`, `H_S = H_A = σ_z/2`, ancilla spin up.
    TensorProduct {
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        q: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        r: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_s: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_a: Option<ComplexMatrix>,
        #[serde(default = "default_up")]
        bloch: [f64; 3],
        #[serde(default = "default_dt")]
        dt: f64,
    },
    /// Defaults: `σ_x ⊗ σ_x + σ_y ⊗ σ_y`, free Hamiltonians zero, ancilla
    /// spin up.
    TwoTerm {
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        q: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        r: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        s: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        t: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_s: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_a: Option<ComplexMatrix>,
        #[serde(default = "default_up")]
        bloch: [f64; 3],
        #[serde(default = "default_dt")]
        dt: f64,
    },
    /// Defaults: `H_S = H_A = σ_z/2`, ancilla spin up.
    FreeOnly {
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_s: Option<ComplexMatrix>,
        #[serde(
            default,
            with = "operator::serde_matrix::option",
            skip_serializing_if = "Option::is_none"
        )]
        h_a: Option<ComplexMatrix>,
        #[serde(default = "default_up")]
        bloch: [f64; 3],
        #[serde(default = "default_dt")]
        dt: f64,
    },
    Random {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_two")]
        dim_s: usize,
        #[serde(default = "default_two")]
        dim_a: usize,
        #[serde(default = "default_two")]
        n_terms: usize,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

fn half_z() -> ComplexMatrix {
    pauli_z() * c64(0.5, 0.0)
}

impl ModelPreset {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SpinSpin { .. } => "spin_spin",
            Self::QubitOscillator { .. } => "qubit_oscillator",
            Self::TensorProduct { .. } => "tensor_product",
            Self::TwoTerm { .. } => "two_term",
            Self::FreeOnly { .. } => "free_only",
            Self::Random { .. } => "random",
        }
    }

    /// Every preset with default parameters.
    pub fn defaults() -> Vec<Self> {
        [
            "spin_spin",
            "qubit_oscillator",
            "tensor_product",
            "two_term",
            "free_only",
            "random",
        ]
        .into_iter()
        .map(|n| Self::with_defaults(n).expect("known name"))
        .collect()
    }

    pub fn with_defaults(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::json!({ "name": name }))
            .map_err(|e| Error::Unsupported(format!("unknown preset `{name}`: {e}")))
    }

    pub fn dt(&self) -> f64 {
        match self {
            Self::SpinSpin { dt, .. }
            | Self::QubitOscillator { dt, .. }
            | Self::TensorProduct { dt, .. }
            | Self::TwoTerm { dt, .. }
            | Self::FreeOnly { dt, .. }
            | Self::Random { dt, .. } => *dt,
        }
    }

    pub fn set_dt(&mut self, value: f64) {
        match self {
            Self::SpinSpin { dt, .. }
            | Self::QubitOscillator { dt, .. }
            | Self::TensorProduct { dt, .. }
            | Self::TwoTerm { dt, .. }
            | Self::FreeOnly { dt, .. }
            | Self::Random { dt, .. } => *dt = value,
        }
    }

    /// Overrides the seed of the random preset; no-op otherwise.
    pub fn set_seed(&mut self, value: u64) {
        if let Self::Random { seed, .. } = self {
            *seed = value;
        }
    }

    pub fn build(&self) -> Result<BombardmentSpec> {
        let or = |m: &Option<ComplexMatrix>, d: ComplexMatrix| m.clone().unwrap_or(d);
        let zero2 = || ComplexMatrix::zeros(2, 2);
        match self {
            Self::SpinSpin {
                j,
                bloch,
                h_s,
                h_a,
                dt,
            } => spin_spin(
                *j,
                DensityMatrix::from_bloch(*bloch)?,
                h_s.clone(),
                h_a.clone(),
                *dt,
            ),
            Self::QubitOscillator {
                omega,
                levels,
                state,
                convention,
                dt,
            } => qubit_oscillator(
                *omega,
                *levels,
                state.density_matrix(*levels)?,
                *dt,
                *convention,
            ),
            Self::TensorProduct {
                q,
                r,
                h_s,
                h_a,
                bloch,
                dt,
            } => tensor_product(
                or(q, pauli_x()),
                or(r, pauli_x()),
                or(h_s, half_z()),
                or(h_a, half_z()),
                DensityMatrix::from_bloch(*bloch)?,
                *dt,
            ),
            Self::TwoTerm {
                q,
                r,
                s,
                t,
                h_s,
                h_a,
                bloch,
                dt,
            } => two_term(
                or(q, pauli_x()),
                or(r, pauli_x()),
                or(s, pauli_y()),
                or(t, pauli_y()),
                or(h_s, zero2()),
                or(h_a, zero2()),
                DensityMatrix::from_bloch(*bloch)?,
                *dt,
            ),
            Self::FreeOnly {
                h_s,
                h_a,
                bloch,
                dt,
            } => free_only(
                or(h_s, half_z()),
                or(h_a, half_z()),
                DensityMatrix::from_bloch(*bloch)?,
                *dt,
            ),
            Self::Random {
                seed,
                dim_s,
                dim_a,
                n_terms,
                scale,
                dt,
            } => random_spec(*seed, (*dim_s, *dim_a), *n_terms, *scale, *dt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bombardment::{build_update_map, gen_cond_check, l1_identity_action, update_map_at};
    use crate::operator::commutator;

    #[test]
    fn quadrature_commutators() {
        let n = 6;
        for (conv, expected) in [
            (QuadratureConvention::Canonical, c64(0.0, 1.0)),
            (QuadratureConvention::Halved, c64(0.0, -0.5)),
        ] {
            let (x, p) = quadratures(n, conv);
            assert!(
                operator::hermiticity_defect(&x) == 0.0 && operator::hermiticity_defect(&p) == 0.0
            );
            let c = commutator(&x, &p).unwrap();
            for k in 0..n - 1 {
                assert!((c[(k, k)] - expected).norm() < 1e-14);
            }
            // truncation boundary
            assert!((c[(n - 1, n - 1)] + expected * (n as f64 - 1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn oscillator_state_parsing() {
        assert_eq!(
            "vacuum".parse::<OscillatorState>().unwrap(),
            OscillatorState::Vacuum
        );
        assert_eq!(
            "fock 3".parse::<OscillatorState>().unwrap(),
            OscillatorState::Fock(3)
        );
        assert_eq!(
            "thermal 0.2".parse::<OscillatorState>().unwrap(),
            OscillatorState::Thermal(0.2)
        );
        assert!("squeezed".parse::<OscillatorState>().is_err());
        let m: OscillatorState = serde_json::from_str("[[[1,0],[0,0]],[[0,0],[0,0]]]").unwrap();
        assert!(matches!(m, OscillatorState::Matrix(_)));
        assert!(OscillatorState::Fock(5).density_matrix(4).is_err());
    }

    #[test]
    fn spin_spin_expected_action() {
        let up = DensityMatrix::basis_state(2, 0).unwrap();
        let s = spin_spin(1.0, up, None, None, 0.1).unwrap();
        let got = l1_identity_action(&s.interaction, &s.rho_a).unwrap();
        assert!((got - pauli_z() * c64(4.0, 0.0)).norm() < 1e-9);
        let mixed = spin_spin(1.0, DensityMatrix::maximally_mixed(2), None, None, 0.1).unwrap();
        assert!(
            l1_identity_action(&mixed.interaction, &mixed.rho_a)
                .unwrap()
                .norm()
                < 1e-15
        );
    }

    #[test]
    fn qubit_oscillator_conventions() {
        let vac = DensityMatrix::basis_state(20, 0).unwrap();
        let canon =
            qubit_oscillator(1.0, 20, vac.clone(), 0.1, QuadratureConvention::Canonical).unwrap();
        let got = l1_identity_action(&canon.interaction, &canon.rho_a).unwrap();
        assert!((got - pauli_z() * c64(2.0, 0.0)).norm() < 1e-12);
        let halved = qubit_oscillator(1.0, 20, vac, 0.1, QuadratureConvention::Halved).unwrap();
        let got = l1_identity_action(&halved.interaction, &halved.rho_a).unwrap();
        assert!((got + pauli_z()).norm() < 1e-12);
        assert!(qubit_oscillator(
            1.0,
            2,
            DensityMatrix::basis_state(2, 0).unwrap(),
            0.1,
            QuadratureConvention::Canonical
        )
        .is_err());
    }

    #[test]
    fn random_spec_is_deterministic() {
        let a = random_spec(42, (3, 2), 2, 1.5, 0.05).unwrap();
        let b = random_spec(42, (3, 2), 2, 1.5, 0.05).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_spec(43, (3, 2), 2, 1.5, 0.05).unwrap());
        for seed in 0..10 {
            let s = random_spec(seed, (2, 3), 1, 1.0, 0.1).unwrap();
            assert!(
                !gen_cond_check(&s.interaction, &s.rho_a, 1e-8)
                    .unwrap()
                    .purifies
            );
        }
    }

    #[test]
    fn presets_build_and_are_cptp() {
        for p in ModelPreset::defaults() {
            let spec = p.build().unwrap();
            for dt in [1e-3, 1e-2, 1e-1] {
                let f = update_map_at(&spec, dt).unwrap().verify_cptp();
                assert!(f.is_cptp(), "{} at dt={dt}: {f:?}", p.name());
            }
        }
        let free = ModelPreset::with_defaults("free_only")
            .unwrap()
            .build()
            .unwrap();
        assert!(build_update_map(&free).unwrap().is_unital(1e-12).0);
        assert!(ModelPreset::with_defaults("bogus").is_err());
    }

    #[test]
    fn preset_json() {
        let p: ModelPreset =
            serde_json::from_str(r#"{"name":"spin_spin","J":0.5,"bloch":[1,0,0],"dt":0.01}"#)
                .unwrap();
        assert_eq!(p.dt(), 0.01);
        let spec = p.build().unwrap();
        assert!((&spec.interaction[0].q - pauli_x() * c64(0.5, 0.0)).norm() == 0.0);
        let q: ModelPreset =
            serde_json::from_str(r#"{"name":"qubit_oscillator","levels":10,"state":"fock 1"}"#)
                .unwrap();
        assert_eq!(q.build().unwrap().dim_a, 10);
        assert!(serde_json::from_str::<ModelPreset>(r#"{"name":"spin_spin","typo":1}"#).is_err());
        let mut r = ModelPreset::with_defaults("random").unwrap();
        r.set_seed(9);
        let back: ModelPreset = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..5 {
            let r = random_density_matrix(&mut rng, d, d);
            assert!((r.matrix().trace().re - 1.0).abs() < 1e-14);
            assert!(r.purity() <= 1.0 + 1e-14);
        }
        assert!((random_density_matrix(&mut rng, 3, 1).purity() - 1.0).abs() < 1e-12);
    }
}

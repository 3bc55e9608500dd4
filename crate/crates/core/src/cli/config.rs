//! Run configuration: a single JSON file per run.

use std::fmt;

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};

use crate::bombardment::{BombardmentSpec, InteractionTerm};
use crate::interpolation::K_MAX;
use crate::models::{self, ModelPreset, OscillatorState, QuadratureConvention};
use crate::operator::{self, c64, ComplexMatrix, DensityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Value of ħ in the units of the Hamiltonian entries. Hamiltonians are
    /// divided by it before use.
    #[serde(default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Number of φ coefficients used; the Liouvillian series then runs to
    /// `L_{max_order−1}`.
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_sweep")]
    pub dt_sweep: Vec<f64>,
}

fn default_max_order() -> usize {
    K_MAX
}
fn default_tolerance() -> f64 {
    crate::tolerance::DEFAULT.order
}
fn default_sweep() -> Vec<f64> {
    crate::fit::logspace(1e-3, 1e-1, 9)
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            max_order: default_max_order(),
            tolerance: default_tolerance(),
            dt_sweep: default_sweep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Initial system state; the maximally mixed state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<DensityMatrix>,
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

/// A named preset (object with a `name` field) or an inline spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Preset(ModelPreset),
    Inline(InlineSpec),
}

fn from_value<T: DeserializeOwned, E: serde::de::Error>(
    v: serde_json::Value,
    what: &str,
) -> Result<T, E> {
    T::deserialize(v).map_err(|e| E::custom(format!("{what}: {e}")))
}

impl<'de> Deserialize<'de> for ModelConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v.get("name") {
            Some(_) => from_value(v, "preset").map(Self::Preset),
            None if v.is_object() => from_value(v, "inline model").map(Self::Inline),
            None => Err(D::Error::custom("model must be an object")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSpec {
    #[serde(with = "operator::serde_matrix")]
    pub h_s: ComplexMatrix,
    #[serde(
        default,
        with = "operator::serde_matrix::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub h_a: Option<ComplexMatrix>,
    #[serde(default)]
    pub interaction: Vec<InlineTerm>,
    pub rho_a: AncillaConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineTerm {
    #[serde(with = "operator::serde_matrix")]
    pub q: ComplexMatrix,
    pub r: AncillaOperator,
}

/// Ancilla operator: an explicit matrix, or `"x"`, `"p"`, `"n"` for an
/// oscillator ancilla.
#[derive(Debug, Clone, PartialEq)]
pub enum AncillaOperator {
    Matrix(ComplexMatrix),
    Named(String),
}

impl Serialize for AncillaOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Matrix(m) => operator::serde_matrix::serialize(m, s),
            Self::Named(n) => s.serialize_str(n),
        }
    }
}

impl<'de> Deserialize<'de> for AncillaOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Rows(Vec<Vec<[f64; 2]>>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => Ok(Self::Named(t)),
            Raw::Rows(r) => operator::serde_matrix::from_rows(&r)
                .map(Self::Matrix)
                .map_err(D::Error::custom),
        }
    }
}

/// Ancilla state: a density matrix, or a tagged object.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AncillaConfig {
    State(DensityMatrix),
    Described(AncillaDescription),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AncillaDescription {
    Oscillator {
        levels: usize,
        #[serde(default)]
        state: OscillatorState,
        #[serde(default)]
        convention: QuadratureConvention,
    },
    Bloch {
        vector: [f64; 3],
    },
}

impl<'de> Deserialize<'de> for AncillaConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        if v.is_array() {
            from_value(v, "rho_a").map(Self::State)
        } else {
            from_value(v, "rho_a").map(Self::Described)
        }
    }
}

impl InlineSpec {
    pub fn build(&self) -> crate::Result<BombardmentSpec> {
        use crate::Error;
        let (rho_a, oscillator) = match &self.rho_a {
            AncillaConfig::State(rho) => (rho.clone(), None),
            AncillaConfig::Described(AncillaDescription::Bloch { vector }) => {
                (DensityMatrix::from_bloch(*vector)?, None)
            }
            AncillaConfig::Described(AncillaDescription::Oscillator {
                levels,
                state,
                convention,
            }) => {
                let rho = state.density_matrix(*levels)?;
                models::check_boundary_weight(&rho);
                (rho, Some((*levels, *convention)))
            }
        };
        let da = rho_a.dim();
        let terms = self
            .interaction
            .iter()
            .map(|t| {
                let r = match (&t.r, oscillator) {
                    (AncillaOperator::Matrix(m), _) => m.clone(),
                    (AncillaOperator::Named(name), Some((levels, conv))) => {
                        let (x, p) = models::quadratures(levels, conv);
                        match name.as_str() {
                            "x" => x,
                            "p" => p,
                            "n" => {
                                let a = operator::annihilation(levels);
                                a.adjoint() * a
                            }
                            other => {
                                return Err(Error::Unsupported(format!(
                                    "unknown oscillator operator `{other}`"
                                )))
                            }
                        }
                    }
                    (AncillaOperator::Named(name), None) => {
                        return Err(Error::Unsupported(format!(
                            "named operator `{name}` needs an oscillator ancilla"
                        )))
                    }
                };
                Ok(InteractionTerm::new(t.q.clone(), r))
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let h_a = self
            .h_a
            .clone()
            .unwrap_or_else(|| ComplexMatrix::zeros(da, da));
        BombardmentSpec::new(self.h_s.clone(), h_a, terms, rho_a, self.dt)
    }
}

impl ModelConfig {
    pub fn name(&self) -> &str {
        match self {
            Self::Preset(p) => p.name(),
            Self::Inline(_) => "inline",
        }
    }

    pub fn build(&self) -> crate::Result<BombardmentSpec> {
        match self {
            Self::Preset(p) => p.build(),
            Self::Inline(s) => s.build(),
        }
    }
}

/// Divides every Hamiltonian block by `hbar`.
pub fn rescale(spec: &BombardmentSpec, hbar: f64) -> crate::Result<BombardmentSpec> {
    if hbar == 1.0 {
        return Ok(spec.clone());
    }
    let s = c64(1.0 / hbar, 0.0);
    let terms = spec
        .interaction
        .iter()
        .map(|t| InteractionTerm::new(&t.q * s, t.r.clone()))
        .collect();
    BombardmentSpec::new(
        &spec.h_s * s,
        &spec.h_a * s,
        terms,
        spec.rho_a.clone(),
        spec.dt,
    )
}

/// Configuration problem with its location in the file, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if !self.field.is_empty() {
            write!(f, " at `{}`", self.field)?;
        }
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " (line {l}, column {c})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    /// Error on `field`, located at the first occurrence of its last path
    /// segment as a JSON key in `text`.
    pub fn at(text: &str, field: &str, message: impl Into<String>) -> Self {
        let key = field.rsplit('.').next().unwrap_or(field);
        let (line, column) =
            locate_key(text, key).map_or((None, None), |(l, c)| (Some(l), Some(c)));
        Self {
            field: field.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    text.lines()
        .enumerate()
        .find_map(|(i, line)| line.find(&needle).map(|c| (i + 1, c + 1)))
}

impl RunConfig {
    /// Parses and validates a configuration file's contents.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let (line, column) = (inner.line(), inner.column());
            ConfigError {
                field: if field == "." { String::new() } else { field },
                line: (line > 0).then_some(line),
                column: (line > 0).then_some(column),
                message: strip_position(&inner.to_string()),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let a = &self.analysis;
        if a.max_order == 0 || a.max_order > K_MAX {
            return Err(ConfigError::at(
                text,
                "analysis.max_order",
                format!("must be between 1 and {K_MAX}, got {}", a.max_order),
            ));
        }
        if !(a.tolerance > 0.0 && a.tolerance.is_finite()) {
            return Err(ConfigError::at(
                text,
                "analysis.tolerance",
                "must be finite and positive",
            ));
        }
        if a.dt_sweep.iter().any(|&dt| !(dt > 0.0 && dt.is_finite())) {
            return Err(ConfigError::at(
                text,
                "analysis.dt_sweep",
                "entries must be finite and strictly positive",
            ));
        }
        if a.dt_sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::at(
                text,
                "analysis.dt_sweep",
                "entries must be strictly increasing",
            ));
        }
        if let Some(s) = &self.simulate {
            if s.steps == 0 {
                return Err(ConfigError::at(
                    text,
                    "simulate.steps",
                    "must be at least 1",
                ));
            }
            if s.record_every == 0 {
                return Err(ConfigError::at(
                    text,
                    "simulate.record_every",
                    "must be at least 1",
                ));
            }
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(ConfigError::at(text, "hbar", "must be finite and positive"));
        }
        Ok(())
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_defaults() {
        let cfg = RunConfig::parse(r#"{"model": {"name": "spin_spin"}}"#).unwrap();
        assert_eq!(cfg.model.name(), "spin_spin");
        assert_eq!(cfg.analysis.max_order, 4);
        assert_eq!(cfg.hbar, 1.0);
    }

    #[test]
    fn unknown_field_is_located() {
        let text =
            "{\n  \"model\": {\"name\": \"spin_spin\"},\n  \"analysis\": {\"max_ordr\": 3}\n}";
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.field, "analysis.max_ordr");
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("max_ordr"), "{err}");
    }

    #[test]
    fn unsorted_sweep_rejected() {
        let text =
            "{\"model\": {\"name\": \"free_only\"},\n\"analysis\": {\"dt_sweep\": [0.1, 0.01]}}";
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.field, "analysis.dt_sweep");
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn inline_oscillator_model() {
        let text = r#"{"model": {
            "h_s": [[[0,0],[0,0]],[[0,0],[0,0]]],
            "interaction": [
                {"q": [[[0,0],[1,0]],[[1,0],[0,0]]], "r": "x"},
                {"q": [[[0,0],[0,-1]],[[0,1],[0,0]]], "r": "p"}
            ],
            "rho_a": {"type": "oscillator", "levels": 12, "state": "vacuum"},
            "dt": 0.05
        }}"#;
        let cfg = RunConfig::parse(text).unwrap();
        let spec = cfg.model.build().unwrap();
        assert_eq!((spec.dim_s, spec.dim_a), (2, 12));
        let l1 = crate::bombardment::l1_identity_action(&spec.interaction, &spec.rho_a).unwrap();
        assert!((l1 - operator::pauli_z() * c64(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn named_operator_needs_oscillator() {
        let text = r#"{"model": {
            "h_s": [[[0,0],[0,0]],[[0,0],[0,0]]],
            "interaction": [{"q": [[[1,0],[0,0]],[[0,0],[-1,0]]], "r": "x"}],
            "rho_a": {"type": "bloch", "vector": [0, 0, 1]}
        }}"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert!(cfg.model.build().is_err());
    }

    #[test]
    fn rescale_divides_hamiltonians() {
        let spec = ModelPreset::with_defaults("tensor_product")
            .unwrap()
            .build()
            .unwrap();
        let scaled = rescale(&spec, 2.0).unwrap();
        assert!((&scaled.h_s * c64(2.0, 0.0) - &spec.h_s).norm() < 1e-15);
        assert!((&scaled.interaction[0].q * c64(2.0, 0.0) - &spec.interaction[0].q).norm() < 1e-15);
        assert_eq!(scaled.interaction[0].r, spec.interaction[0].r);
    }
}

//! Command-line front end: `analyze`, `simulate` and `sweep`.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for numerical
//! domain errors such as a branch-cut violation, 1 for I/O failures.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bombardment::{self, BombardmentSpec, GenCondReport};
use crate::channels::Superoperator;
use crate::error::Error;
use crate::fit::loglog_slope;
use crate::interpolation::{self, PurificationReport};
use crate::lindblad::{self, LindbladDecomposition};
use crate::operator::{self, c64, matexp, ComplexMatrix, DensityMatrix};
use crate::tolerance::Tolerances;

pub use config::{ConfigError, OutputFormat, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "rri",
    version,
    about = "Collision-model update maps, effective Liouvillians and purification order"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Purification order, per-order norms, Lindblad modes of L₁ and the
    /// leading-order condition, as a JSON report.
    Analyze(Args),
    /// Discrete and interpolated trajectories from the `simulate` block.
    Simulate(Args),
    /// Unitality and Liouvillian residuals over `analysis.dt_sweep`, with
    /// fitted log–log slopes.
    Sweep(Args),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: PathBuf,
    /// Output path; overrides the configured report or CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the `random` preset.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Numeric(e) => write!(f, "numerical error: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    let (args, kind) = match command {
        Command::Analyze(a) => (a, Kind::Analyze),
        Command::Simulate(a) => (a, Kind::Simulate),
        Command::Sweep(a) => (a, Kind::Sweep),
    };
    let (cfg, spec) = load(args)?;
    match kind {
        Kind::Analyze => {
            let report = analyze(&cfg, &spec)?;
            let format = cfg.output.format.unwrap_or(OutputFormat::Json);
            let body = match format {
                OutputFormat::Json => to_json(&report)?,
                OutputFormat::Csv => norms_csv(&report.purification)?,
            };
            emit(
                args.out
                    .as_deref()
                    .or(cfg.output.report_path.as_deref().map(Path::new)),
                &body,
            )
        }
        Kind::Simulate => {
            let sim = cfg.simulate.as_ref().ok_or_else(|| {
                CliError::Config(ConfigError {
                    field: "simulate".into(),
                    line: None,
                    column: None,
                    message: "the simulate command needs a `simulate` block".into(),
                })
            })?;
            let traj = simulate(
                &spec,
                sim.steps,
                sim.record_every,
                sim.initial_state.as_ref(),
            )?;
            let body = match cfg.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => traj.to_csv()?,
                OutputFormat::Json => to_json(&traj)?,
            };
            emit(
                args.out
                    .as_deref()
                    .or(cfg.output.csv_path.as_deref().map(Path::new)),
                &body,
            )?;
            if let Some(p) = &cfg.output.report_path {
                write_atomic(Path::new(p), &to_json(&traj.summary(&cfg))?)?;
            }
            Ok(())
        }
        Kind::Sweep => {
            if cfg.analysis.dt_sweep.is_empty() {
                return Err(CliError::Config(ConfigError {
                    field: "analysis.dt_sweep".into(),
                    line: None,
                    column: None,
                    message: "the sweep command needs at least one time step".into(),
                }));
            }
            let table = sweep(
                &spec,
                &cfg.analysis.dt_sweep,
                cfg.analysis.max_order,
                cfg.analysis.tolerance,
            )?;
            let body = match cfg.output.format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => table.to_csv()?,
                OutputFormat::Json => to_json(&table)?,
            };
            emit(
                args.out
                    .as_deref()
                    .or(cfg.output.csv_path.as_deref().map(Path::new)),
                &body,
            )?;
            if let Some(p) = &cfg.output.report_path {
                write_atomic(Path::new(p), &to_json(&table)?)?;
            }
            Ok(())
        }
    }
}

enum Kind {
    Analyze,
    Simulate,
    Sweep,
}

/// Reads the config, applies flag overrides and builds the spec.
pub fn load(args: &Args) -> CliResult<(RunConfig, BombardmentSpec)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        if let config::ModelConfig::Preset(p) = &mut cfg.model {
            p.set_seed(seed);
        }
    }
    if let Some(k) = args.max_order {
        cfg.analysis.max_order = k;
    }
    if let Some(t) = args.tolerance {
        cfg.analysis.tolerance = t;
    }
    cfg.validate(&text)?;
    let spec = cfg
        .model
        .build()
        .and_then(|s| config::rescale(&s, cfg.hbar))
        .map_err(|e| ConfigError::at(&text, "model", e.to_string()))?;
    Ok((cfg, spec))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Writes to `path` atomically, or to stdout when no path is given.
fn emit(path: Option<&Path>, body: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, body),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, body: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Round-trip decimal with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn norms_csv(report: &PurificationReport) -> CliResult<String> {
    let rows: Vec<Vec<String>> = report
        .norms
        .iter()
        .enumerate()
        .map(|(k, n)| vec![k.to_string(), format_f64(*n)])
        .collect();
    csv_string(&["k", "identity_image_norm"], &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Unitality {
    pub unital: bool,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTable {
    /// `None` when L₁ could not be decomposed.
    pub decomposition: Option<LindbladDecomposition>,
    pub negative_rates: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveLiouvillian {
    pub dt: f64,
    pub identity_image_norm: f64,
    pub trace_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub version: &'static str,
    pub model: String,
    pub dim_s: usize,
    pub dim_a: usize,
    pub dt: f64,
    pub max_order: usize,
    #[serde(flatten)]
    pub purification: PurificationReport,
    pub unitality: Unitality,
    pub effective: EffectiveLiouvillian,
    pub lindblad_l1: ModeTable,
    /// `None` without interaction terms.
    pub gen_cond: Option<GenCondReport>,
    pub tolerances: Tolerances,
    pub config: RunConfig,
}

pub fn analyze(cfg: &RunConfig, spec: &BombardmentSpec) -> CliResult<AnalyzeReport> {
    let tol = Tolerances::default();
    let a = &cfg.analysis;
    let purification =
        bombardment::purification_report(spec, a.max_order, a.tolerance, &a.dt_sweep)?;
    let phi = bombardment::build_update_map(spec)?;
    let (unital, residual) = phi.is_unital(tol.unital);
    let l = interpolation::effective_liouvillian(&phi, spec.dt)?;
    let effective = EffectiveLiouvillian {
        dt: spec.dt,
        identity_image_norm: l.apply_identity().norm(),
        trace_defect: l.trace_annihilation_defect(),
    };
    let lindblad_l1 = match bombardment::liouvillian_series(spec, 2)?
        .coeff(1)
        .map(lindblad::decompose)
    {
        Some(Ok(d)) => ModeTable {
            negative_rates: d.min_rate() < -tol.psd,
            decomposition: Some(d),
            error: None,
        },
        Some(Err(e)) => ModeTable {
            decomposition: None,
            negative_rates: false,
            error: Some(e.to_string()),
        },
        None => unreachable!("series built with two coefficients"),
    };
    let gen_cond = match spec.interaction.is_empty() {
        true => None,
        false => Some(bombardment::gen_cond_check(
            &spec.interaction,
            &spec.rho_a,
            a.tolerance,
        )?),
    };
    Ok(AnalyzeReport {
        version: VERSION,
        model: cfg.model.name().to_string(),
        dim_s: spec.dim_s,
        dim_a: spec.dim_a,
        dt: spec.dt,
        max_order: a.max_order,
        purification,
        unitality: Unitality {
            unital,
            residual,
            tolerance: tol.unital,
        },
        effective,
        lindblad_l1,
        gen_cond,
        tolerances: tol,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub purity_discrete: f64,
    pub purity_interp: f64,
    pub trace_distance_between: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub rows: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub version: &'static str,
    pub model: String,
    pub dt: f64,
    pub steps: usize,
    /// maxₙ |P_discrete − P_interp| / n over recorded steps.
    pub max_purity_gap_per_step: f64,
    pub max_trace_distance: f64,
    pub tolerances: Tolerances,
    pub config: RunConfig,
}

impl Trajectory {
    pub fn to_csv(&self) -> CliResult<String> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.t,
                    r.purity_discrete,
                    r.purity_interp,
                    r.trace_distance_between,
                ]
                .iter()
                .map(|x| format_f64(*x))
                .collect()
            })
            .collect();
        csv_string(
            &[
                "t",
                "purity_discrete",
                "purity_interp",
                "trace_distance_between",
            ],
            &rows,
        )
    }

    pub fn summary(&self, cfg: &RunConfig) -> TrajectorySummary {
        let gap = self
            .rows
            .iter()
            .filter(|r| r.step > 0)
            .map(|r| (r.purity_discrete - r.purity_interp).abs() / r.step as f64)
            .fold(0.0, f64::max);
        TrajectorySummary {
            version: VERSION,
            model: cfg.model.name().to_string(),
            dt: self.dt,
            steps: self.rows.last().map_or(0, |r| r.step),
            max_purity_gap_per_step: gap,
            max_trace_distance: self
                .rows
                .iter()
                .map(|r| r.trace_distance_between)
                .fold(0.0, f64::max),
            tolerances: Tolerances::default(),
            config: cfg.clone(),
        }
    }
}

/// Iterates `φ` and evaluates `exp(n dt L_dt)` at each recorded step `n`.
pub fn simulate(
    spec: &BombardmentSpec,
    steps: usize,
    record_every: usize,
    initial: Option<&DensityMatrix>,
) -> CliResult<Trajectory> {
    let d = spec.dim_s;
    let rho0 = initial
        .cloned()
        .unwrap_or_else(|| DensityMatrix::maximally_mixed(d));
    if rho0.dim() != d {
        return Err(CliError::Config(ConfigError {
            field: "simulate.initial_state".into(),
            line: None,
            column: None,
            message: format!(
                "state is {0}x{0} but the system has dimension {d}",
                rho0.dim()
            ),
        }));
    }
    let phi = bombardment::build_update_map(spec)?;
    let l = interpolation::effective_liouvillian(&phi, spec.dt)?;
    let mut discrete = rho0.matrix().clone();
    let mut rows = Vec::new();
    for n in 0..=steps {
        if n > 0 {
            discrete = phi.apply(&discrete)?;
        }
        if n % record_every == 0 || n == steps {
            let t = n as f64 * spec.dt;
            let interp = evolve(&l, rho0.matrix(), t)?;
            rows.push(TrajectoryRow {
                step: n,
                t,
                purity_discrete: operator::purity(&discrete),
                purity_interp: operator::purity(&interp),
                trace_distance_between: operator::trace_distance(&discrete, &interp),
            });
        }
    }
    Ok(Trajectory { dt: spec.dt, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub dt: f64,
    /// ‖φ(dt)[I] − I‖_F.
    pub discrete: f64,
    /// ‖L_dt[I]‖_F.
    pub continuous: f64,
    /// ‖L_dt − Σ_{j≤k} dtʲ L_j‖_F for k = 0…K−1.
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub version: &'static str,
    pub order: interpolation::PurificationOrder,
    pub rows: Vec<SweepRow>,
    /// `None` when the residuals sit at the numerical floor.
    pub discrete_slope: Option<f64>,
    pub continuous_slope: Option<f64>,
    pub series_slopes: Vec<Option<f64>>,
    /// Discrete minus continuous slope.
    pub offset: Option<f64>,
    /// Whether the offset is 1 ± 0.3; `None` without a finite order.
    pub offset_consistent: Option<bool>,
    pub tolerances: Tolerances,
}

pub fn sweep(
    spec: &BombardmentSpec,
    dts: &[f64],
    max_order: usize,
    tol: f64,
) -> CliResult<SweepTable> {
    use rayon::prelude::*;
    let series = bombardment::liouvillian_series(spec, max_order)?;
    let order = interpolation::purification_order(&series, tol).order;
    let rows = dts
        .par_iter()
        .map(|&dt| {
            let phi = bombardment::update_map_at(spec, dt)?;
            let l = interpolation::effective_liouvillian(&phi, dt)?;
            let series_res = (0..series.coeffs.len())
                .map(|k| (l.rep() - series.evaluate_up_to(dt, k).rep()).norm())
                .collect();
            Ok(SweepRow {
                dt,
                discrete: phi.is_unital(0.0).1,
                continuous: l.apply_identity().norm(),
                series: series_res,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let slope = |f: &dyn Fn(&SweepRow) -> f64| {
        loglog_slope(&rows.iter().map(|r| [r.dt, f(r)]).collect::<Vec<_>>())
    };
    let discrete_slope = slope(&|r| r.discrete);
    let continuous_slope = slope(&|r| r.continuous);
    let series_slopes = (0..series.coeffs.len())
        .map(|k| slope(&|r| r.series[k]))
        .collect();
    let offset = discrete_slope.zip(continuous_slope).map(|(a, b)| a - b);
    let offset_consistent = order
        .finite()
        .map(|_| offset.is_some_and(|o| (o - 1.0).abs() <= 0.3));
    if offset_consistent == Some(false) {
        log::warn!("discrete and continuous slopes differ by {offset:?}, expected 1 ± 0.3");
    }
    Ok(SweepTable {
        version: VERSION,
        order,
        rows,
        discrete_slope,
        continuous_slope,
        series_slopes,
        offset,
        offset_consistent,
        tolerances: Tolerances::default(),
    })
}

impl SweepTable {
    /// One row per time step, then a `slope` row; undefined slopes are
    /// written as `null`.
    pub fn to_csv(&self) -> CliResult<String> {
        let k = self.series_slopes.len();
        let mut header = vec!["dt".to_string(), "discrete".into(), "continuous".into()];
        header.extend((0..k).map(|j| format!("series_k{j}")));
        let mut rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    format_f64(r.dt),
                    format_f64(r.discrete),
                    format_f64(r.continuous),
                ];
                v.extend(r.series.iter().map(|x| format_f64(*x)));
                v
            })
            .collect();
        let fmt = |s: &Option<f64>| s.map_or("null".to_string(), format_f64);
        let mut slopes = vec![
            "slope".to_string(),
            fmt(&self.discrete_slope),
            fmt(&self.continuous_slope),
        ];
        slopes.extend(self.series_slopes.iter().map(fmt));
        rows.push(slopes);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        csv_string(&header, &rows)
    }
}

/// Propagates `ρ` by `exp(t L)`.
pub fn evolve(l: &Superoperator, rho: &ComplexMatrix, t: f64) -> crate::Result<ComplexMatrix> {
    Superoperator::new(l.dim(), matexp(&(l.rep() * c64(t, 0.0)))?)?.apply(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelPreset;

    fn preset(name: &str) -> (RunConfig, BombardmentSpec) {
        let cfg = RunConfig::parse(&format!(r#"{{"model": {{"name": "{name}"}}}}"#)).unwrap();
        let spec = cfg.model.build().unwrap();
        (cfg, spec)
    }

    #[test]
    fn analyze_orders() {
        for (name, want) in [
            ("spin_spin", "1"),
            ("tensor_product", "3"),
            ("free_only", "none≤3"),
        ] {
            let (cfg, spec) = preset(name);
            let r = analyze(&cfg, &spec).unwrap();
            assert_eq!(r.purification.order.to_string(), want, "{name}");
        }
    }

    #[test]
    fn spin_spin_witness_along_sigma_z() {
        let (cfg, spec) = preset("spin_spin");
        let r = analyze(&cfg, &spec).unwrap();
        let w = r.purification.witness().unwrap();
        let along = (w * operator::pauli_z()).trace().re / 2.0;
        assert!((w - operator::pauli_z() * c64(along, 0.0)).norm() < 1e-12 * w.norm());
        assert!(r.gen_cond.unwrap().purifies);
    }

    #[test]
    fn free_only_sweep_is_flat() {
        let (cfg, spec) = preset("free_only");
        let t = sweep(&spec, &cfg.analysis.dt_sweep, 4, 1e-8).unwrap();
        assert!(t.rows.iter().all(|r| r.discrete <= 1e-12));
        assert!(t.discrete_slope.is_none() && t.continuous_slope.is_none());
        assert!(t
            .to_csv()
            .unwrap()
            .lines()
            .last()
            .unwrap()
            .starts_with("slope,null,null"));
    }

    #[test]
    fn sweep_offsets() {
        for (name, disc) in [("spin_spin", 2.0), ("tensor_product", 4.0)] {
            let (cfg, spec) = preset(name);
            let t = sweep(&spec, &cfg.analysis.dt_sweep, 4, 1e-8).unwrap();
            assert!((t.discrete_slope.unwrap() - disc).abs() < 0.3, "{name}");
            assert_eq!(t.offset_consistent, Some(true), "{name}");
        }
    }

    #[test]
    fn simulate_matches_and_purifies() {
        let mut p = ModelPreset::with_defaults("spin_spin").unwrap();
        p.set_dt(0.01);
        let traj = simulate(&p.build().unwrap(), 100, 1, None).unwrap();
        assert!(traj
            .rows
            .windows(2)
            .take(10)
            .all(|w| w[1].purity_discrete > w[0].purity_discrete));
        for r in &traj.rows {
            assert!((r.purity_discrete - r.purity_interp).abs() <= r.step.max(1) as f64 * 1e-12);
        }
        let (_, free) = preset("free_only");
        let traj = simulate(&free, 50, 5, None).unwrap();
        assert!(traj
            .rows
            .iter()
            .all(|r| (r.purity_discrete - 0.5).abs() <= 1e-12));
    }

    #[test]
    fn csv_has_round_trip_precision() {
        let x = 0.1 + 0.2;
        assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }
}

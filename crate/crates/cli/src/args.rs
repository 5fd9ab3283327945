//! Command-line and run-config parameters. Each parameter block derives both
//! clap and serde so `run --config` accepts the same fields as the flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "orbitscale",
    version,
    about = "Periodic orbits, scaling laws and spectral oscillations"
)]
pub struct Cli {
    /// System description (JSON).
    #[arg(long, global = true)]
    pub system: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pass/fail tolerance, overriding each check's default.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a periodic orbit or list billiard orbits.
    #[command(subcommand)]
    Orbit(OrbitCmd),
    /// Apply a scaling transformation to an orbit.
    #[command(subcommand)]
    Scale(ScaleCmd),
    /// Closed-form or finite-difference spectrum.
    #[command(subcommand)]
    Spectrum(SpectrumCmd),
    /// Oscillatory level density and its recurrence spectrum.
    Oscillate(OscillateArgs),
    /// Level loci against coupling strength.
    Loci(LociArgs),
    /// Identity checks with pass/fail rows.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Execute a JSON run config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OrbitCmd {
    /// Orbit at one energy, with its trace.
    Find(OrbitArgs),
    /// Invariants only; billiard systems give their orbit catalog.
    Invariants(InvariantArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Integrator steps per period.
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Keep every n-th trace sample in the CSV.
    #[arg(long, default_value_t = 100)]
    #[serde(default = "default_stride")]
    pub trace_stride: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Largest winding number listed for billiards.
    #[arg(long, default_value_t = 4)]
    #[serde(default = "default_n_max")]
    pub n_max: u32,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleCmd {
    Coupling(ScaleArgs),
    Homogeneous(ScaleArgs),
    Mixed(MixedArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Comma-separated scale factors.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Index of the term whose coupling is held fixed.
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub anchor: usize,
    /// Deform terms that have no declared degree.
    #[arg(long)]
    #[serde(default)]
    pub deform: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SpectrumCmd {
    Analytic(AnalyticArgs),
    Fd(FdArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub levels: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdArgs {
    #[arg(long)]
    pub levels: usize,
    /// Grid intervals; the estimate uses half as many.
    #[arg(long)]
    pub grid: usize,
    /// Truncation interval `lo,hi`; chosen automatically when omitted.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    #[serde(default)]
    pub interval: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapName {
    Omega,
    Homogeneous,
    GammaField,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowName {
    Hann,
    Rect,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillateArgs {
    #[arg(long, value_enum)]
    pub map: MapName,
    #[arg(long)]
    pub levels: usize,
    /// Use levels `skip..skip+levels` of the spectrum.
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub skip: usize,
    /// `E₀` for the homogeneous and gamma-field maps.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default)]
    pub reference_energy: Option<f64>,
    /// Kernel width in `s`; default 0.1 mean spacing.
    #[arg(long)]
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Points on the `s` grid; default four per `σ`.
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 3)]
    #[serde(default = "default_detrend")]
    pub detrend: usize,
    #[arg(long, value_enum, default_value_t = WindowName::Hann)]
    #[serde(default = "default_window")]
    pub window: WindowName,
    /// Finite-difference grid for systems without closed-form levels.
    #[arg(long)]
    #[serde(default)]
    pub fd_grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LociName {
    Oscillator,
    Coulomb,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LociArgs {
    #[arg(long, value_enum)]
    pub kind: LociName,
    #[arg(long, default_value_t = 10)]
    #[serde(default = "default_loci_n")]
    pub n_max: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub couplings: Vec<f64>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckCmd {
    /// Mean potential over a period against the virial prediction.
    Virial(CheckEnergyArgs),
    /// Central-difference dS/dE against the period.
    Dsde(DsDeArgs),
    /// Scaling laws on the transformed orbit.
    Scaling(CheckScalingArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckEnergyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsDeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, default_value_t = 1e-4)]
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingName {
    Coupling,
    Homogeneous,
    Mixed,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckScalingArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ScalingName::Coupling)]
    #[serde(default = "default_scaling")]
    pub kind: ScalingName,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    100_000
}

fn default_stride() -> usize {
    100
}

fn default_n_max() -> u32 {
    4
}

fn default_loci_n() -> u32 {
    10
}

fn default_detrend() -> usize {
    3
}

fn default_window() -> WindowName {
    WindowName::Hann
}

fn default_delta() -> f64 {
    1e-4
}

fn default_scaling() -> ScalingName {
    ScalingName::Coupling
}

/// A task with its parameters, as run by either entry point.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Orbit(OrbitCmd),
    Scale(ScaleCmd),
    Spectrum(SpectrumCmd),
    Oscillate(OscillateArgs),
    Loci(LociArgs),
    Check(CheckCmd),
}

impl Task {
    pub fn name(&self) -> String {
        let (task, sub) = match self {
            Task::Orbit(OrbitCmd::Find(_)) => ("orbit", Some("find")),
            Task::Orbit(OrbitCmd::Invariants(_)) => ("orbit", Some("invariants")),
            Task::Scale(ScaleCmd::Coupling(_)) => ("scale", Some("coupling")),
            Task::Scale(ScaleCmd::Homogeneous(_)) => ("scale", Some("homogeneous")),
            Task::Scale(ScaleCmd::Mixed(_)) => ("scale", Some("mixed")),
            Task::Spectrum(SpectrumCmd::Analytic(_)) => ("spectrum", Some("analytic")),
            Task::Spectrum(SpectrumCmd::Fd(_)) => ("spectrum", Some("fd")),
            Task::Oscillate(_) => ("oscillate", None),
            Task::Loci(_) => ("loci", None),
            Task::Check(CheckCmd::Virial(_)) => ("check", Some("virial")),
            Task::Check(CheckCmd::Dsde(_)) => ("check", Some("dsde")),
            Task::Check(CheckCmd::Scaling(_)) => ("check", Some("scaling")),
        };
        match sub {
            Some(s) => format!("{task} {s}"),
            None => task.to_string(),
        }
    }

    /// Whether the task reads a system description.
    pub fn needs_system(&self) -> bool {
        !matches!(self, Task::Loci(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Orbit,
    Scale,
    Spectrum,
    Oscillate,
    Loci,
    Check,
}

/// Supported value of the `schema` field.
pub const RUN_SCHEMA: u32 = 1;

/// ```json
/// {"schema": 1, "system": {...}, "task": "check",
///  "params": {"check": "virial", "energy": 1.0}, "output_dir": "out", "tol": 1e-8}
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub system: Option<serde_json::Value>,
    pub task: TaskName,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn task(&self) -> Result<Task, String> {
        let p = self.params.clone();
        let err = |e: serde_json::Error| format!("params: {e}");
        Ok(match self.task {
            TaskName::Orbit => Task::Orbit(serde_json::from_value(p).map_err(err)?),
            TaskName::Scale => Task::Scale(serde_json::from_value(p).map_err(err)?),
            TaskName::Spectrum => Task::Spectrum(serde_json::from_value(p).map_err(err)?),
            TaskName::Oscillate => Task::Oscillate(serde_json::from_value(p).map_err(err)?),
            TaskName::Loci => Task::Loci(serde_json::from_value(p).map_err(err)?),
            TaskName::Check => Task::Check(serde_json::from_value(p).map_err(err)?),
        })
    }
}

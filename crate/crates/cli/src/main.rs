mod args;
mod report;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use orbitscale::config::SystemConfig;
use orbitscale::Error;

use args::{Cli, Command, RunConfig, Task, RUN_SCHEMA};
use report::{emit_report, manifest, Outcome};

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_MODULE: u8 = 3;
const DEFAULT_OUT: &str = "orbitscale-out";

/// Everything needed to execute one task, validated before any work starts.
struct Plan {
    task: Task,
    system: Option<SystemConfig>,
    out: PathBuf,
    tol: Option<f64>,
}

fn schema_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_SCHEMA)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load_system(path: &Path) -> Result<SystemConfig, String> {
    SystemConfig::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn plan(cli: Cli) -> Result<Plan, String> {
    let system = cli.system.as_deref().map(load_system).transpose()?;
    let (task, system, out, tol) = match cli.command {
        Command::Orbit(c) => (Task::Orbit(c), system, cli.out, cli.tol),
        Command::Scale(c) => (Task::Scale(c), system, cli.out, cli.tol),
        Command::Spectrum(c) => (Task::Spectrum(c), system, cli.out, cli.tol),
        Command::Oscillate(a) => (Task::Oscillate(a), system, cli.out, cli.tol),
        Command::Loci(a) => (Task::Loci(a), system, cli.out, cli.tol),
        Command::Check(c) => (Task::Check(c), system, cli.out, cli.tol),
        Command::Run { config } => {
            let text = read(&config)?;
            let run: RunConfig =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", config.display()))?;
            if run.schema != RUN_SCHEMA {
                return Err(format!(
                    "unsupported schema {} (expected {RUN_SCHEMA})",
                    run.schema
                ));
            }
            let inline = run
                .system
                .clone()
                .map(serde_json::from_value::<SystemConfig>)
                .transpose()
                .map_err(|e| format!("system: {e}"))?;
            let task = run.task()?;
            (
                task,
                inline.or(system),
                cli.out.or(run.output_dir),
                cli.tol.or(run.tol),
            )
        }
    };
    if task.needs_system() && system.is_none() {
        return Err(format!(
            "{} needs a system (--system or \"system\" in the run config)",
            task.name()
        ));
    }
    if let Some(s) = &system {
        s.build().map_err(|e| e.to_string())?;
    }
    if tol.is_some_and(|t| t.is_nan() || t < 0.0) {
        return Err("tolerance must be non-negative".into());
    }
    Ok(Plan {
        task,
        system,
        out: out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        tol,
    })
}

fn write_all(
    dir: &Path,
    outcome: &Outcome,
    parameters: &Value,
    command: &str,
) -> std::io::Result<String> {
    fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    let (text, report_json) = emit_report(&outcome.report);
    fs::write(dir.join("report.txt"), &text)?;
    fs::write(dir.join("report.json"), pretty(&report_json))?;
    let m = manifest(
        command,
        parameters,
        outcome,
        &["report.txt", "report.json", "manifest.json"],
    );
    fs::write(dir.join("manifest.json"), pretty(&m))?;
    Ok(text)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("ORBITSCALE_THREADS") else {
        return Ok(());
    };
    let n: usize =
        value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            format!("ORBITSCALE_THREADS must be a positive integer, got {value:?}")
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return schema_error(e);
    }
    let plan = match plan(cli) {
        Ok(p) => p,
        Err(e) => return schema_error(e),
    };
    let spec = match plan.system.as_ref().map(SystemConfig::build).transpose() {
        Ok(s) => s,
        Err(e) => return schema_error(e),
    };
    let command = plan.task.name();
    let outcome = match tasks::execute(&plan.task, spec.as_ref(), plan.tol) {
        Ok(o) => o,
        Err(Error::Config(e)) => return schema_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_MODULE);
        }
    };
    let parameters = json!({
        "task": plan.task,
        "system": plan.system,
        "tol": plan.tol,
    });
    match write_all(&plan.out, &outcome, &parameters, &command) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", plan.out.display());
            return ExitCode::from(EXIT_MODULE);
        }
    }
    if outcome.report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED_CHECK)
    }
}

//! Task execution. Everything is computed in memory; `main` writes the files
//! only once a task has succeeded.

use std::f64::consts::PI;

use serde_json::json;

use orbitscale::dynamics::{Domain, HamiltonianSpec, Shape, Trajectory};
use orbitscale::export;
use orbitscale::orbits::{
    ds_de_check, find_orbit_1d_with, orbit_invariants, rectangle_orbit_lengths, OrbitCatalog,
    OrbitOptions, PeriodicOrbit,
};
use orbitscale::oscillations::{
    catalog_predictions, map_levels, match_orbits, mean_spacing, oscillatory_dos,
    recurrence_spectrum, Prediction, ScaledVariableMap, Window,
};
use orbitscale::qspec::{
    analytic_spectrum, fd_spectrum_1d, fd_spectrum_1d_auto, AnalyticKind, SpectrumResult,
};
use orbitscale::scaling::{
    characteristic_length, level_loci, scale_coupling, scale_homogeneous, scale_mixed_deformed,
    virial_residual, LociKind, ScalingResult,
};
use orbitscale::{Error, Result};

use crate::args::{
    CheckCmd, LociName, MapName, OrbitCmd, OscillateArgs, ScaleCmd, ScalingName, SpectrumCmd, Task,
    WindowName,
};
use crate::report::{Outcome, Report, Row};

const TOL_ACTION_TRACE: f64 = 1e-8;
const TOL_DS_DE: f64 = 1e-6;
const TOL_SCALING: f64 = 1e-10;
const TOL_EOM: f64 = 1e-8;
const TOL_VIRIAL: f64 = 1e-8;
const TOL_LOCI: f64 = 1e-12;
/// Predictions listed in the oscillation report, lowest frequency first.
const REPORTED_PREDICTIONS: usize = 3;

/// Tolerances, with the user's override applied to every check.
struct Tol(Option<f64>);

impl Tol {
    fn or(&self, default: f64) -> f64 {
        self.0.unwrap_or(default)
    }
}

fn csv<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn options(steps: usize) -> OrbitOptions {
    OrbitOptions {
        steps_per_period: steps,
        ..Default::default()
    }
}

/// A box with no potential terms: its side lengths.
fn billiard_sides(spec: &HamiltonianSpec) -> Option<(f64, Option<f64>)> {
    match (&spec.domain, spec.terms.is_empty()) {
        (Domain::Box { lower, upper, .. }, true) => match lower.len() {
            1 => Some((upper[0] - lower[0], None)),
            2 => Some((upper[0] - lower[0], Some(upper[1] - lower[1]))),
            _ => None,
        },
        _ => None,
    }
}

/// Closed-form level family of the system, if it has one.
fn analytic_kind(spec: &HamiltonianSpec) -> Option<AnalyticKind> {
    if let Some((length, width)) = billiard_sides(spec) {
        return Some(AnalyticKind::Box { length, width });
    }
    if spec.domain.is_bounded() || spec.terms.len() != 1 {
        return None;
    }
    let term = &spec.terms[0];
    match term.shape {
        Shape::Power { exponent }
            if exponent == 2.0 && spec.dimension == 1 && term.coupling > 0.0 =>
        {
            Some(AnalyticKind::Oscillator {
                omega: (2.0 * term.coupling / spec.mass).sqrt(),
            })
        }
        Shape::Coulomb if term.coupling > 0.0 => Some(AnalyticKind::Coulomb {
            charge_squared: term.coupling,
        }),
        _ => None,
    }
}

fn catalog(spec: &HamiltonianSpec, n_max: u32) -> Result<OrbitCatalog> {
    let (a, b) = billiard_sides(spec).ok_or_else(|| {
        Error::WrongKind("orbit catalogs exist for empty 1D or 2D boxes only".into())
    })?;
    rectangle_orbit_lengths(a, b, n_max, spec.mass)
}

fn thinned(trace: &Trajectory, stride: usize) -> Trajectory {
    let stride = stride.max(1);
    let last = trace.samples.len().saturating_sub(1);
    let keep: Vec<usize> = (0..trace.samples.len())
        .filter(|k| k % stride == 0 || *k == last)
        .collect();
    Trajectory {
        samples: keep.iter().map(|&k| trace.samples[k].clone()).collect(),
        tau: trace
            .tau
            .as_ref()
            .map(|t| keep.iter().map(|&k| t[k]).collect()),
        ..trace.clone()
    }
}

fn orbit_rows(report: &mut Report, orbit: &PeriodicOrbit, tol: &Tol) -> Result<()> {
    let ti = orbit.trace_invariants();
    report.push(Row::info("E", orbit.energy));
    report.push(Row::info("T", orbit.period));
    report.push(Row::info("S", orbit.action));
    report.push(Row::info("R = S - E T", orbit.time_action));
    if let Ok(lambda) = characteristic_length(orbit.action, orbit.energy, orbit.spec.mass) {
        report.push(Row::info("Lambda", lambda));
    }
    report.push(Row::judged(
        "S trace vs quadrature",
        orbit.action,
        ti.action,
        rel(ti.action, orbit.action),
        tol.or(TOL_ACTION_TRACE),
    ));
    let dsde = ds_de_check(&orbit.spec, orbit.energy, 1e-4)?;
    report.push(Row::judged(
        "dS/dE vs T",
        dsde.period,
        dsde.ds_de,
        dsde.residual,
        tol.or(TOL_DS_DE),
    ));
    Ok(())
}

fn scaling_rows(report: &mut Report, results: &[ScalingResult], tol: &Tol) {
    for r in results {
        let a = r.alpha;
        report.push(Row::judged(
            format!("T' (alpha={a})"),
            r.predicted_period,
            r.measured_period,
            r.period_residual,
            tol.or(TOL_SCALING),
        ));
        report.push(Row::judged(
            format!("S' (alpha={a})"),
            r.predicted_action,
            r.measured_action,
            r.action_residual,
            tol.or(TOL_SCALING),
        ));
        report.push(Row::judged(
            format!("EOM residual (alpha={a})"),
            0.0,
            r.eom_residual,
            r.eom_residual,
            tol.or(TOL_EOM),
        ));
    }
}

fn scale_all<F>(orbit: &PeriodicOrbit, alphas: &[f64], f: F) -> Result<Vec<ScalingResult>>
where
    F: Fn(&PeriodicOrbit, f64) -> Result<ScalingResult>,
{
    alphas.iter().map(|&a| f(orbit, a)).collect()
}

fn scaling_outcome(orbit: &PeriodicOrbit, results: &[ScalingResult], tol: &Tol) -> Result<Outcome> {
    let mut out = Outcome::default();
    out.add("scaling.csv", csv(|w| export::write_scaling(w, results))?);
    scaling_rows(&mut out.report, results, tol);
    out.invariants = json!({
        "source": export::orbit_summary(orbit),
        "results": results.iter().map(|r| json!({
            "alpha": r.alpha,
            "kind": r.kind,
            "factors": r.factors,
            "energy": r.new_energy,
            "couplings": r.new_couplings,
            "period": r.measured_period,
            "action": r.measured_action,
        })).collect::<Vec<_>>(),
    });
    Ok(out)
}

/// Error for a missing or invalid parameter that the schema cannot express.
pub fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn execute(task: &Task, spec: Option<&HamiltonianSpec>, tol: Option<f64>) -> Result<Outcome> {
    let tol = Tol(tol);
    let need = || spec.ok_or_else(|| config_error("this task needs --system"));
    match task {
        Task::Orbit(OrbitCmd::Find(a)) => {
            let spec = need()?;
            let orbit = find_orbit_1d_with(spec, a.energy, &options(a.steps))?;
            let mut out = Outcome::default();
            out.add(
                "trace.csv",
                csv(|w| export::write_trajectory(w, spec, &thinned(&orbit.trace, a.trace_stride)))?,
            );
            let summary = export::orbit_summary(&orbit);
            out.add("orbit.json", pretty(&summary));
            orbit_rows(&mut out.report, &orbit, &tol)?;
            out.invariants = summary;
            Ok(out)
        }
        Task::Orbit(OrbitCmd::Invariants(a)) => {
            let spec = need()?;
            let mut out = Outcome::default();
            if billiard_sides(spec).is_some() {
                let cat = catalog(spec, a.n_max)?;
                out.add(
                    "catalog.csv",
                    csv(|w| export::write_catalog(w, &cat, a.energy))?,
                );
                for e in &cat.entries {
                    out.report
                        .push(Row::info(format!("L {}", e.label), e.length));
                }
                out.invariants = json!({
                    "energy": a.energy,
                    "orbits": cat.entries.iter().map(|e| json!({
                        "label": e.label,
                        "length": e.length,
                        "invariants": e.invariants(a.energy, cat.mass),
                    })).collect::<Vec<_>>(),
                });
            } else {
                let orbit = find_orbit_1d_with(spec, a.energy, &OrbitOptions::default())?;
                let inv = orbit_invariants(&orbit)?;
                orbit_rows(&mut out.report, &orbit, &tol)?;
                out.invariants = json!({ "energy": a.energy, "invariants": inv });
            }
            Ok(out)
        }
        Task::Scale(cmd) => {
            let spec = need()?;
            let (energy, steps) = match cmd {
                ScaleCmd::Coupling(a) | ScaleCmd::Homogeneous(a) => (a.energy, a.steps),
                ScaleCmd::Mixed(a) => (a.energy, a.steps),
            };
            let orbit = find_orbit_1d_with(spec, energy, &options(steps))?;
            let results = match cmd {
                ScaleCmd::Coupling(a) => scale_all(&orbit, &a.alpha, scale_coupling)?,
                ScaleCmd::Homogeneous(a) => scale_all(&orbit, &a.alpha, scale_homogeneous)?,
                ScaleCmd::Mixed(a) => scale_all(&orbit, &a.alpha, |o, x| {
                    scale_mixed_deformed(o, x, a.anchor, a.deform)
                })?,
            };
            scaling_outcome(&orbit, &results, &tol)
        }
        Task::Spectrum(SpectrumCmd::Analytic(a)) => {
            let spec = need()?;
            let kind = analytic_kind(spec).ok_or_else(|| {
                Error::WrongKind("the system has no closed-form spectrum; use spectrum fd".into())
            })?;
            let s = analytic_spectrum(kind, spec.mass, spec.hbar, a.levels)?;
            spectrum_outcome(&s, None, &tol)
        }
        Task::Spectrum(SpectrumCmd::Fd(a)) => {
            let spec = need()?;
            let s = match &a.interval {
                Some(iv) if iv.len() == 2 => {
                    fd_spectrum_1d(spec, (iv[0], iv[1]), a.grid, a.levels)?
                }
                Some(iv) => {
                    return Err(config_error(format!(
                        "interval needs two values, got {}",
                        iv.len()
                    )))
                }
                None => fd_spectrum_1d_auto(spec, a.grid, a.levels)?,
            };
            let exact = match analytic_kind(spec) {
                Some(kind) if !matches!(kind, AnalyticKind::Box { width: Some(_), .. }) => {
                    Some(analytic_spectrum(kind, spec.mass, spec.hbar, a.levels)?)
                }
                _ => None,
            };
            spectrum_outcome(&s, exact.as_ref(), &tol)
        }
        Task::Oscillate(a) => oscillate(need()?, a, &tol),
        Task::Loci(a) => {
            let kind = match a.kind {
                LociName::Oscillator => LociKind::Oscillator,
                LociName::Coulomb => LociKind::Coulomb,
            };
            let rows = level_loci(kind, a.n_max, &a.couplings)?;
            let mut out = Outcome::default();
            out.add("loci.csv", csv(|w| export::write_loci(w, &rows))?);
            let expected = |n: u32| match kind {
                LociKind::Oscillator => n as f64 + 0.5,
                LociKind::Coulomb => -1.0 / (8.0 * (n as f64).powi(2)),
            };
            let spread = rows
                .iter()
                .map(|r| rel(r.scaled_energy, expected(r.n)))
                .fold(0.0, f64::max);
            let c = rows.first().map_or(f64::NAN, |r| r.scaled_energy);
            out.report.push(Row::judged(
                "E_n x0^2 vs closed form",
                expected(rows[0].n),
                c,
                spread,
                tol.or(TOL_LOCI),
            ));
            out.invariants = json!({ "kind": kind, "max_relative_spread": spread });
            Ok(out)
        }
        Task::Check(CheckCmd::Virial(a)) => {
            let spec = need()?;
            let orbit = find_orbit_1d_with(spec, a.energy, &options(a.steps))?;
            let v = virial_residual(&orbit)?;
            let mut out = Outcome::default();
            out.report.push(Row::judged(
                "virial: int lambda V dt vs 2ET/(nu+2)",
                v.predicted,
                v.potential_integral,
                v.residual,
                tol.or(TOL_VIRIAL),
            ));
            out.invariants = json!({ "orbit": export::orbit_summary(&orbit), "virial": v });
            Ok(out)
        }
        Task::Check(CheckCmd::Dsde(a)) => {
            let spec = need()?;
            let r = ds_de_check(spec, a.energy, a.delta)?;
            let mut out = Outcome::default();
            out.report.push(Row::judged(
                "dS/dE vs T",
                r.period,
                r.ds_de,
                r.residual,
                tol.or(TOL_DS_DE),
            ));
            out.invariants = json!({ "energy": a.energy, "delta": a.delta, "ds_de": r });
            Ok(out)
        }
        Task::Check(CheckCmd::Scaling(a)) => {
            let spec = need()?;
            let orbit = find_orbit_1d_with(spec, a.energy, &options(a.steps))?;
            let results = match a.kind {
                ScalingName::Coupling => scale_all(&orbit, &a.alpha, scale_coupling)?,
                ScalingName::Homogeneous => scale_all(&orbit, &a.alpha, scale_homogeneous)?,
                ScalingName::Mixed => scale_all(&orbit, &a.alpha, |o, x| {
                    scale_mixed_deformed(o, x, 0, false)
                })?,
            };
            scaling_outcome(&orbit, &results, &tol)
        }
    }
}

fn pretty(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn spectrum_outcome(
    s: &SpectrumResult,
    exact: Option<&SpectrumResult>,
    tol: &Tol,
) -> Result<Outcome> {
    let mut out = Outcome::default();
    out.add("spectrum.csv", csv(|w| export::write_spectrum(w, s))?);
    out.report.push(Row::info("E (lowest)", s.levels[0]));
    out.report
        .push(Row::info("E (highest)", s.levels[s.levels.len() - 1]));
    if let (Some(exact), Some(est)) = (exact, &s.est_error) {
        // Worst ratio of the true error to the estimate; at most 1 when the estimate holds.
        let worst = s
            .levels
            .iter()
            .zip(&exact.levels)
            .zip(est)
            .map(|((e, x), d)| (e - x).abs() / d)
            .fold(0.0, f64::max);
        out.report.push(Row::judged(
            "max |E_fd - E_exact| / est_error",
            1.0,
            worst,
            worst,
            tol.or(1.0),
        ));
    }
    out.invariants = json!({
        "solver": s.solver,
        "count": s.count(),
        "first_index": s.first_index,
        "grid_points": s.grid_points,
        "interval": s.interval,
        "max_est_error": s.est_error.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max)),
    });
    Ok(out)
}

fn oscillate(spec: &HamiltonianSpec, a: &OscillateArgs, tol: &Tol) -> Result<Outcome> {
    let total = a.skip + a.levels;
    let full = match analytic_kind(spec) {
        Some(kind) => analytic_spectrum(kind, spec.mass, spec.hbar, total)?,
        None => fd_spectrum_1d_auto(spec, a.fd_grid.unwrap_or(16 * total), total)?,
    };
    let spectrum = full.window(a.skip, total);
    let reference = || {
        a.reference_energy
            .ok_or_else(|| config_error(format!("map {:?} needs reference_energy", a.map)))
    };
    let map = match a.map {
        MapName::Omega => ScaledVariableMap::Omega,
        MapName::Homogeneous => ScaledVariableMap::Homogeneous {
            degree: spec.common_degree().ok_or_else(|| {
                Error::WrongKind("the homogeneous map needs a single-degree potential".into())
            })?,
            reference_energy: reference()?,
        },
        MapName::GammaField => ScaledVariableMap::GammaField {
            reference_energy: reference()?,
        },
        MapName::Raw => ScaledVariableMap::RawEnergy,
    };
    let sigma = match a.sigma {
        Some(s) => s,
        None => 0.1 * mean_spacing(&spectrum, &map)?,
    };
    let grid = match a.grid {
        Some(g) => g,
        None => {
            let s = map_levels(&spectrum, &map)?;
            (4.0 * (s[s.len() - 1] - s[0]).abs() / sigma).ceil() as usize + 1
        }
    };
    let osc = oscillatory_dos(&spectrum, &map, sigma, a.detrend, grid)?;
    let window = match a.window {
        WindowName::Hann => Window::Hann,
        WindowName::Rect => Window::Rect,
    };
    let rec = recurrence_spectrum(&osc, window)?;
    let bin = rec.bin_width();

    let mut predictions = predictions(spec, &map)?;
    predictions.sort_by(|x, y| x.frequency.total_cmp(&y.frequency));
    let matches = match_orbits(&rec.peaks, &predictions, 3.0 * bin);

    let mut out = Outcome::default();
    out.add(
        "spectrum.csv",
        csv(|w| export::write_spectrum(w, &spectrum))?,
    );
    out.add("dos.csv", csv(|w| export::write_dos(w, &rec))?);
    out.add(
        "peaks.csv",
        csv(|w| export::write_peaks(w, &rec, Some(&matches)))?,
    );
    for p in predictions.iter().take(REPORTED_PREDICTIONS) {
        let measured = matches.best_for(&p.label).map_or(f64::NAN, |m| m.frequency);
        let residual = (measured - p.frequency).abs();
        let mut row = Row::judged(
            format!("peak {} at {:.3}", p.label, p.frequency),
            p.frequency,
            measured,
            residual,
            tol.or(bin),
        );
        if measured.is_nan() {
            row.pass = Some(false);
        }
        out.report.push(row);
    }
    if let Some(top) = rec.dominant() {
        out.report.push(Row::info("dominant peak", top.frequency));
    }
    out.invariants = json!({
        "map": map,
        "sigma": sigma,
        "grid_points": grid,
        "bin_width": bin,
        "levels": [spectrum.first_index, spectrum.first_index as usize + spectrum.count()],
        "peaks": rec.peaks,
        "predictions": predictions,
    });
    Ok(out)
}

/// Predicted recurrence frequencies in the chosen variable.
///
/// Billiards in `ω` give `√(2m)L/ħ`; in `s = |E/E₀|^((ν+2)/2ν)` the action is
/// `S(E₀)·s`, so the repetitions of the primitive orbit sit at `k·S(E₀)/ħ`.
fn predictions(spec: &HamiltonianSpec, map: &ScaledVariableMap) -> Result<Vec<Prediction>> {
    let action_at = |e0: f64| -> Result<Option<f64>> {
        match analytic_kind(spec) {
            Some(AnalyticKind::Coulomb { charge_squared }) if e0 < 0.0 => Ok(Some(
                2.0 * PI * charge_squared * (spec.mass / (2.0 * e0.abs())).sqrt(),
            )),
            _ if spec.dimension == 1 => Ok(Some(
                find_orbit_1d_with(spec, e0, &OrbitOptions::default())?.action,
            )),
            _ => Ok(None),
        }
    };
    let repetitions = |s0: f64| -> Vec<Prediction> {
        (1..=REPORTED_PREDICTIONS)
            .map(|k| Prediction {
                label: format!("k={k}"),
                frequency: k as f64 * s0 / spec.hbar,
            })
            .collect()
    };
    Ok(match map {
        ScaledVariableMap::Omega => match billiard_sides(spec) {
            Some(_) => catalog_predictions(&catalog(spec, 4)?, spec.hbar),
            None => Vec::new(),
        },
        ScaledVariableMap::Homogeneous {
            reference_energy, ..
        } => action_at(*reference_energy)?
            .map(repetitions)
            .unwrap_or_default(),
        ScaledVariableMap::GammaField { reference_energy } => match analytic_kind(spec) {
            Some(AnalyticKind::Coulomb { .. }) => action_at(*reference_energy)?
                .map(repetitions)
                .unwrap_or_default(),
            _ => Vec::new(),
        },
        ScaledVariableMap::RawEnergy => Vec::new(),
    })
}

//! CSV and JSON writers for the plot-data files.

use std::io::Write;

use serde_json::{json, Value};

use crate::dynamics::{HamiltonianSpec, Trajectory};
use crate::error::{Error, Result};
use crate::orbits::{OrbitCatalog, PeriodicOrbit};
use crate::oscillations::{MatchReport, RecurrencePeaks};
use crate::qspec::SpectrumResult;
use crate::scaling::{characteristic_length, LociRow, ScalingResult};

fn csv_error(e: csv::Error) -> Error {
    Error::Numeric(format!("csv output failed: {e}"))
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

/// Columns `t, [tau], x0.., p0.., H`.
pub fn write_trajectory<W: Write>(w: W, spec: &HamiltonianSpec, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w);
    let d = spec.dimension;
    let mut header = vec!["t".to_string()];
    if traj.tau.is_some() {
        header.push("tau".into());
    }
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("p{i}")));
    header.push("H".into());
    out.write_record(&header).map_err(csv_error)?;
    for (k, s) in traj.samples.iter().enumerate() {
        let mut row = vec![fmt(s.t)];
        if let Some(tau) = &traj.tau {
            row.push(fmt(tau[k]));
        }
        row.extend(s.x.iter().map(|v| fmt(*v)));
        row.extend(s.p.iter().map(|v| fmt(*v)));
        row.push(fmt(spec.hamiltonian(&s.x, &s.p)));
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Columns `label, L, S_at_E0, T_at_E0, E0`.
pub fn write_catalog<W: Write>(w: W, catalog: &OrbitCatalog, energy: f64) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "L", "S_at_E0", "T_at_E0", "E0"])
        .map_err(csv_error)?;
    for e in &catalog.entries {
        out.write_record([
            e.label.clone(),
            fmt(e.length),
            fmt(e.action(energy, catalog.mass)),
            fmt(e.period(energy, catalog.mass)),
            fmt(energy),
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// One row per result: `alpha, E, lambda_j.., T_meas, T_pred, S_meas, S_pred, residuals`.
pub fn write_scaling<W: Write>(w: W, results: &[ScalingResult]) -> Result<()> {
    let mut out = writer(w);
    let n_terms = results
        .iter()
        .map(|r| r.new_couplings.len())
        .max()
        .unwrap_or(0);
    let mut header = vec!["alpha".to_string(), "E".into()];
    header.extend((0..n_terms).map(|j| format!("lambda_{j}")));
    header.extend(
        [
            "T_meas",
            "T_pred",
            "S_meas",
            "S_pred",
            "T_residual",
            "S_residual",
            "eom_residual",
            "energy_residual",
        ]
        .map(String::from),
    );
    out.write_record(&header).map_err(csv_error)?;
    for r in results {
        let mut row = vec![fmt(r.alpha), fmt(r.new_energy)];
        row.extend((0..n_terms).map(|j| r.new_couplings.get(j).map_or(String::new(), |c| fmt(*c))));
        row.extend(
            [
                r.measured_period,
                r.predicted_period,
                r.measured_action,
                r.predicted_action,
                r.period_residual,
                r.action_residual,
                r.eom_residual,
                r.energy_residual,
            ]
            .map(fmt),
        );
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Columns `lambda, n, E_n, x0, E_n_x0sq`.
pub fn write_loci<W: Write>(w: W, rows: &[LociRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["lambda", "n", "E_n", "x0", "E_n_x0sq"])
        .map_err(csv_error)?;
    for r in rows {
        out.write_record([
            fmt(r.coupling),
            r.n.to_string(),
            fmt(r.energy),
            fmt(r.length),
            fmt(r.scaled_energy),
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Columns `n, E_n, est_error` (empty error for closed forms).
pub fn write_spectrum<W: Write>(w: W, spectrum: &SpectrumResult) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "E_n", "est_error"])
        .map_err(csv_error)?;
    for (k, e) in spectrum.levels.iter().enumerate() {
        let err = spectrum
            .est_error
            .as_ref()
            .map_or(String::new(), |v| fmt(v[k]));
        out.write_record([
            (spectrum.first_index as usize + k).to_string(),
            fmt(*e),
            err,
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Columns `s, delta_rho`.
pub fn write_dos<W: Write>(w: W, osc: &RecurrencePeaks) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["s", "delta_rho"]).map_err(csv_error)?;
    for (s, v) in osc.s_grid.iter().zip(&osc.delta_rho) {
        out.write_record([fmt(*s), fmt(*v)]).map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Columns `frequency, amplitude, matched_label, predicted, rel_error`.
pub fn write_peaks<W: Write>(
    w: W,
    osc: &RecurrencePeaks,
    report: Option<&MatchReport>,
) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "frequency",
        "amplitude",
        "matched_label",
        "predicted",
        "rel_error",
    ])
    .map_err(csv_error)?;
    for (i, p) in osc.peaks.iter().enumerate() {
        let row = report.and_then(|r| r.rows.get(i));
        out.write_record([
            fmt(p.frequency),
            fmt(p.amplitude),
            row.and_then(|r| r.label.clone()).unwrap_or_default(),
            row.and_then(|r| r.predicted).map_or(String::new(), fmt),
            row.and_then(|r| r.rel_error).map_or(String::new(), fmt),
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|e| Error::Numeric(e.to_string()))
}

/// Invariant block of an orbit, with `Λ` when it is defined.
pub fn orbit_summary(orbit: &PeriodicOrbit) -> Value {
    let lambda = characteristic_length(orbit.action, orbit.energy, orbit.spec.mass).ok();
    json!({
        "energy": orbit.energy,
        "period": orbit.period,
        "action": orbit.action,
        "arclength": orbit.arclength,
        "time_action": orbit.time_action,
        "characteristic_length": lambda,
        "closure_residual": orbit.closure_residual,
        "energy_drift": orbit.trace.energy_drift,
        "samples": orbit.trace.samples.len(),
        "turning_points": orbit.well.map(|w| vec![w.lower, w.upper]),
    })
}

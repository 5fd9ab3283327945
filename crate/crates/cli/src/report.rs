//! Predicted-versus-measured rows and the manifest written with every run.

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub quantity: String,
    pub predicted: Option<f64>,
    pub measured: f64,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    /// `None` for informational rows.
    pub pass: Option<bool>,
}

impl Row {
    pub fn info(quantity: impl Into<String>, measured: f64) -> Self {
        Row {
            quantity: quantity.into(),
            predicted: None,
            measured,
            residual: None,
            tolerance: None,
            pass: None,
        }
    }

    /// A row judged by `residual ≤ tolerance`.
    pub fn judged(
        quantity: impl Into<String>,
        predicted: f64,
        measured: f64,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        Row {
            quantity: quantity.into(),
            predicted: Some(predicted),
            measured,
            residual: Some(residual),
            tolerance: Some(tolerance),
            pass: Some(residual <= tolerance),
        }
    }

    fn status(&self) -> &'static str {
        match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "-",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
}

impl Report {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

/// Text table plus its JSON twin. An empty report gives an empty table.
pub fn emit_report(report: &Report) -> (String, Value) {
    let mut text = String::new();
    if !report.rows.is_empty() {
        let width = report
            .rows
            .iter()
            .map(|r| r.quantity.len())
            .max()
            .unwrap_or(0)
            .max(8);
        text.push_str(&format!(
            "{:<width$}  {:>14}  {:>14}  {:>14}  {:>14}  status\n",
            "quantity", "predicted", "measured", "residual", "tolerance"
        ));
        for r in &report.rows {
            text.push_str(&format!(
                "{:<width$}  {:>14}  {:>14}  {:>14}  {:>14}  {}\n",
                r.quantity,
                num(r.predicted),
                num(Some(r.measured)),
                num(r.residual),
                num(r.tolerance),
                r.status()
            ));
        }
    }
    let value = json!({
        "passed": report.passed(),
        "rows": report.rows,
    });
    (text, value)
}

/// One output file held in memory until the run has finished.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub report: Report,
    /// Invariant values recorded in the manifest.
    pub invariants: Value,
}

impl Outcome {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }
}

pub fn manifest(
    command: &str,
    parameters: &Value,
    outcome: &Outcome,
    extra_files: &[&str],
) -> Value {
    let mut files: Vec<Value> = outcome
        .artifacts
        .iter()
        .map(|a| json!({"name": a.name, "bytes": a.bytes.len()}))
        .collect();
    files.extend(extra_files.iter().map(|f| json!({"name": f})));
    json!({
        "command": command,
        "parameters": parameters,
        "files": files,
        "invariants": outcome.invariants,
        "passed": outcome.report.passed(),
    })
}

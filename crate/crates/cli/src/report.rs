use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// One verified property: passes when `max_residual <= tol`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: String,
    /// The identity or condition being checked, in words.
    pub identity: String,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

impl Check {
    pub fn residual(id: impl Into<String>, identity: impl Into<String>, max_residual: f64, tol: f64) -> Self {
        Check {
            id: id.into(),
            identity: identity.into(),
            max_residual,
            tol,
            // NaN residuals fail
            pass: max_residual <= tol,
            status: None,
        }
    }

    /// An exact yes/no check, recorded as residual 0 or 1 with tolerance 0.
    pub fn exact(id: impl Into<String>, identity: impl Into<String>, holds: bool) -> Self {
        Check {
            status: Some(if holds { "exact" } else { "mismatch" }.to_string()),
            ..Check::residual(id, identity, if holds { 0.0 } else { 1.0 }, 0.0)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub params: Map<String, Value>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    /// Rows for CSV output when the command has a natural table; the checks
    /// are flattened otherwise.
    #[serde(skip)]
    pub table: Option<Table>,
}

#[derive(Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(command: &str, params: Map<String, Value>) -> Self {
        Report {
            command: command.to_string(),
            params,
            checks: Vec::new(),
            details: None,
            table: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => self.render_csv(),
        }
    }

    fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.table {
            Some(table) => {
                w.write_record(&table.header)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
            }
            None => {
                w.write_record(["id", "identity", "status", "max_residual", "tol", "pass"])?;
                for c in &self.checks {
                    w.write_record([
                        c.id.clone(),
                        c.identity.clone(),
                        c.status.clone().unwrap_or_default(),
                        c.max_residual.to_string(),
                        c.tol.to_string(),
                        c.pass.to_string(),
                    ])?;
                }
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Writes the rendered report to `out`, or to stdout without a path.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let text = self.render(format)?;
        match out {
            Some(path) => {
                fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "{}: {} checks, {} failed; report written to {}",
                    self.command,
                    self.checks.len(),
                    self.failures(),
                    path.display()
                );
            }
            None => match std::io::stdout().write_all(text.as_bytes()) {
                // a closed pipe (e.g. `| head`) is not an error of the run
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            },
        }
        Ok(())
    }
}

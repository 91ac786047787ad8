use std::io::Write;
use std::path::Path;
use std::time::Duration;

use apollonian::frozen::Comparison;
use serde::Serialize;
use serde_json::Value;

use crate::config::{CliResult, Format, RunConfig};

pub const SCHEMA: &str = "apollo-report/1";

/// A rectangular table, the CSV view of a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Output of one command. Timing and the human summary stay out of the JSON
/// so that equal configurations serialize byte-for-byte equal.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub results: Value,
    pub frozen: Vec<Comparison>,
    pub pass: bool,
    #[serde(skip)]
    pub table: Option<Table>,
    #[serde(skip)]
    pub lines: Vec<String>,
    #[serde(skip)]
    pub timing: Duration,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            results: Value::Null,
            frozen: Vec::new(),
            pass: true,
            table: None,
            lines: Vec::new(),
            timing: Duration::ZERO,
        }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    /// Record a regression comparison; a miss fails the report.
    pub fn compare(&mut self, c: Comparison) {
        self.pass &= c.pass;
        self.frozen.push(c);
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> CliResult<String> {
        let v = serde_json::to_value(self).map_err(|e| crate::config::CliError::Check(e.to_string()))?;
        Ok(serde_json::to_string_pretty(&sort(v)).expect("values serialize") + "\n")
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let empty = Table::default();
        let t = self.table.as_ref().unwrap_or(&empty);
        let io = |e: csv::Error| crate::config::CliError::Check(e.to_string());
        w.write_record(&t.columns).map_err(io)?;
        for row in &t.rows {
            w.write_record(row.iter().map(cell)).map_err(io)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| crate::config::CliError::Check(e.to_string()))?).expect("utf8"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        for c in &self.frozen {
            let verdict = if c.pass { "ok" } else { "MISMATCH" };
            s.push_str(&format!("frozen {}: {} (registry {}, tol {}) {verdict}\n", c.name, c.measured, c.frozen, c.tol));
        }
        s.push_str(if self.pass { "PASS\n" } else { "FAIL\n" });
        s
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Text => Ok(self.to_text()),
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    /// Print to stdout and, with `out`, also write the JSON (or CSV) file.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> CliResult<()> {
        let stdout = self.render(format)?;
        std::io::stdout().write_all(stdout.as_bytes())?;
        if let Some(path) = out {
            let body = if format == Format::Csv { self.to_csv()? } else { self.to_json()? };
            std::fs::write(path, body)?;
        }
        eprintln!("{}: {:.3}s", self.command, self.timing.as_secs_f64());
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn sort(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<_> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort(v))).collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort).collect()),
        other => other,
    }
}

//! Self-describing result files.
//!
//! A JSON-lines file starts with one header object (schema version,
//! subcommand, every parameter, seed, warnings, summary, column names) and
//! continues with one object per table row. A CSV file carries the same
//! header as a `# `-prefixed JSON comment line, then the table.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::experiments::Warning;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub subcommand: String,
    pub parameters: Value,
    pub seed: u64,
    /// Seconds; the only field allowed to differ between reruns.
    pub wall_time: f64,
    pub warnings: Vec<Warning>,
    pub summary: Value,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<Value>>,
}

impl ResultRecord {
    pub fn new(subcommand: &str, parameters: Value, seed: u64, columns: &[&str]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            wall_time: 0.0,
            warnings: Vec::new(),
            summary: Value::Null,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Everything except the wall time agrees.
    pub fn same_payload(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other && a.rows == other.rows
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        let header = serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
        match format {
            Format::Jsonl => {
                writeln!(out, "{header}")?;
                for row in &self.rows {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                    writeln!(out, "{}", Value::Object(obj))?;
                }
            }
            Format::Csv => {
                writeln!(out, "# {header}")?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell)).map_err(csv_err)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }

    /// Reads back a JSON-lines result file.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty result file".into()))?;
        let mut record: ResultRecord = serde_json::from_str(head).map_err(|e| Error::Parse(e.to_string()))?;
        for line in lines {
            let obj: Map<String, Value> = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
            let row = record
                .columns
                .iter()
                .map(|c| obj.get(c).cloned().unwrap_or(Value::Null))
                .collect();
            record.rows.push(row);
        }
        Ok(record)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

//! Rectangular result tables and their CSV/JSON encodings.
//!
//! JSON documents look like
//! `{"schema_version": "1", "command": "...", "columns": [...], "rows": [[...], ...]}`.
//! Non-finite numbers are written as the strings `"inf"`, `"-inf"` and `"nan"`
//! since JSON has no literal for them; empty cells are `null`.

use std::io::{Read, Write};

use netval_core::io::{fmt_f64, SCHEMA_VERSION};
use netval_core::{NetError, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Num(if v { 1.0 } else { 0.0 })
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) if v.is_nan() => json!("nan"),
            Cell::Num(v) => json!(fmt_f64(*v)),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    /// Number when `s` is the canonical rendering of one, text otherwise.
    pub fn parse(s: &str) -> Cell {
        if s.is_empty() {
            return Cell::Empty;
        }
        match s.parse::<f64>() {
            Ok(v) if fmt_f64(v) == s => Cell::Num(v),
            _ => Cell::Text(s.to_owned()),
        }
    }

    fn from_json(v: &Value) -> Result<Cell> {
        Ok(match v {
            Value::Null => Cell::Empty,
            Value::Number(n) => Cell::Num(n.as_f64().ok_or_else(|| NetError::Parse(format!("bad number {n}")))?),
            Value::String(s) => match s.as_str() {
                "inf" | "-inf" | "nan" => Cell::parse(s),
                _ => Cell::Text(s.clone()),
            },
            other => return Err(NetError::Parse(format!("unexpected table cell {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self { command: command.into(), columns: columns.iter().map(|c| (*c).to_owned()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> Result<()> {
        match format {
            Format::Csv => {
                let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut w);
                c.write_record(&self.columns)?;
                for r in &self.rows {
                    c.write_record(r.iter().map(Cell::to_csv))?;
                }
                c.flush()?;
            }
            Format::Json => {
                let doc = json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": self.command,
                    "columns": self.columns,
                    "rows": self.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                });
                serde_json::to_writer_pretty(&mut w, &doc)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn parse_csv<R: Read>(command: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(Cell::parse).collect());
        }
        Ok(Self { command: command.into(), columns, rows })
    }

    pub fn parse_json<R: Read>(reader: R) -> Result<Self> {
        let doc: Value = serde_json::from_reader(reader)?;
        let version = doc["schema_version"].as_str().unwrap_or_default();
        if version != SCHEMA_VERSION {
            return Err(NetError::Parse(format!("unsupported schema_version '{version}'")));
        }
        let command = doc["command"].as_str().unwrap_or_default().to_owned();
        let columns = serde_json::from_value(doc["columns"].clone())?;
        let rows = doc["rows"]
            .as_array()
            .ok_or_else(|| NetError::Parse("rows must be an array".into()))?
            .iter()
            .map(|r| r.as_array().ok_or_else(|| NetError::Parse("row must be an array".into()))?.iter().map(Cell::from_json).collect())
            .collect::<Result<Vec<Vec<Cell>>>>()?;
        Ok(Self { command, columns, rows })
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Tabular reports rendered as CSV or as a single JSON object.
//!
//! CSV has one header row and newline-terminated rows. Floats use the
//! shortest representation that round-trips; missing or non-finite values are
//! empty cells in CSV and `null` in JSON. Report-level scalars are appended to
//! every CSV row as extra columns and stored under `scalars` in JSON.

use std::fmt::Write as _;

use serde_json::{json, Map, Number, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Float)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => format!("{v:?}"),
            Cell::Float(_) | Cell::Empty => String::new(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub params: Map<String, Value>,
    pub scalars: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            params: Map::new(),
            scalars: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, v: impl Into<Cell>) -> &mut Self {
        self.params.insert(key.to_string(), v.into().json());
        self
    }

    pub fn scalar(&mut self, key: &str, v: impl Into<Cell>) -> &mut Self {
        self.scalars.push((key.to_string(), v.into()));
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .columns
            .iter()
            .map(String::as_str)
            .chain(self.scalars.iter().map(|(k, _)| k.as_str()))
            .collect();
        let _ = writeln!(out, "{}", header.join(","));
        let tail: Vec<String> = self.scalars.iter().map(|(_, v)| v.csv()).collect();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(Cell::csv)
                .chain(tail.iter().cloned())
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let scalars: Map<String, Value> = self
            .scalars
            .iter()
            .map(|(k, v)| (k.clone(), v.json()))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let v = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": self.params,
            "scalars": scalars,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

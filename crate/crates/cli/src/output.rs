//! CSV and JSON writers. CSV cells carry 12 significant digits; JSON keeps
//! full round-trip precision.

use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `x` rounded to 12 significant digits, printed in the shortest form that
/// reads back to the rounded value.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    rounded.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match *self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => sig12(x),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Int(i) => Value::from(i),
            Cell::Real(x) => Value::from(x),
        }
    }
}

/// Rectangular numeric data with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"manifest": ..., "rows": [{column: value, ...}, ...]}`.
    pub fn to_json(&self, manifest: Option<&str>) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json_document(manifest, "rows", &rows)
    }

    pub fn render(&self, format: Format, manifest: Option<&str>) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(manifest),
        }
    }
}

/// Pretty JSON object holding the manifest reference and one payload field.
pub fn json_document(manifest: Option<&str>, key: &str, payload: &impl Serialize) -> Result<String> {
    let mut obj = Map::new();
    obj.insert("manifest".into(), manifest.map_or(Value::Null, Value::from));
    obj.insert(key.into(), serde_json::to_value(payload)?);
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
    text.push('\n');
    Ok(text)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(bytes).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(1.344199123456789), "1.34419912346");
        assert_eq!(sig12(-2.5e-7), "-0.00000025");
        assert_eq!(sig12(0.1 + 0.2), "0.3");
        assert_eq!(sig12(123456789012345.0), "123456789012000");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["N", "S"]);
        t.push(vec![Cell::Int(2), Cell::Real(1.0 / 3.0)]);
        assert_eq!(t.to_csv(), "N,S\n2,0.333333333333\n");
    }
}

//! CSV and JSON emitters. Every file starts with the same provenance block:
//! command, config hash, seed, crate version and the functionals it contains.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputHeader {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// `(id, definition)` of every functional reported.
    pub functionals: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(command: &str, config_hash: u64, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash: format!("{config_hash:016x}"),
            seed,
            version: VERSION.into(),
            functionals: Vec::new(),
        }
    }

    pub fn with_functional(mut self, id: impl Into<String>, definition: impl Into<String>) -> Self {
        let id = id.into();
        if !self.functionals.iter().any(|(i, _)| *i == id) {
            self.functionals.push((id, definition.into()));
        }
        self
    }

    fn comment_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sns3d {}", self.version);
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# config_hash: {}", self.config_hash);
        let _ = writeln!(s, "# seed: {}", self.seed);
        for (id, def) in &self.functionals {
            let _ = writeln!(s, "# functional {id}: {def}");
        }
        s
    }
}

/// A CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(if x { "true" } else { "false" }.into())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

/// Shortest round-trip representation; identical runs give identical bytes.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) => format_float(*x),
        Cell::Text(t) => t.clone(),
        Cell::Empty => String::new(),
    }
}

pub fn write_csv(path: &Path, header: &OutputHeader, columns: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut s = header.comment_block();
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(format_cell).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Writes `{"header": ..., <body fields>}` as pretty JSON.
pub fn write_summary_json<T: Serialize>(path: &Path, header: &OutputHeader, body: &T) -> Result<()> {
    let mut v = serde_json::to_value(body)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("header".into(), serde_json::to_value(header)?);
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

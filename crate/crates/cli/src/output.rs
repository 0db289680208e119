use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Cell {
    /// Integers as such, reals with 17 significant digits.
    pub fn to_csv(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Real(x) => x.to_string(),
        }
    }

    fn to_json(self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Real(x) if x.is_finite() => json!(x),
            Cell::Real(_) => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

/// Column headers carry their unit in parentheses.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf, Failure> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
                w.write_record(&self.columns).map_err(|e| io_err(&path, e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|c| c.to_csv()))
                        .map_err(|e| io_err(&path, e))?;
                }
                w.flush().map_err(|e| io_err(&path, e))?;
                Ok(path)
            }
            Format::Json => {
                let rows: Vec<Vec<Value>> = self
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|c| c.to_json()).collect())
                    .collect();
                write_json(dir, stem, &json!({ "columns": self.columns, "rows": rows }))
            }
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_json<S: Serialize>(dir: &Path, stem: &str, value: &S) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("{stem}.json"));
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(&path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_csv() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5e-17] {
            let s = Cell::Real(x).to_csv();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(Cell::Int(42).to_csv(), "42");
        assert_eq!(Cell::Real(1.0).to_csv(), "1.0000000000000000e0");
    }

    #[test]
    fn non_finite_values_become_null_in_json() {
        assert_eq!(Cell::Real(f64::NAN).to_json(), Value::Null);
        assert_eq!(Cell::Real(2.5).to_json(), json!(2.5));
    }
}

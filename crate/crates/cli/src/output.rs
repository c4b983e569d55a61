//! Table and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    /// Reals use 17 significant digits so that parsing returns the same bits.
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Writes `<stem>.csv` or `<stem>.json` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf, CliError> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
                w.write_record(&self.header)
                    .map_err(|e| io_error(&path, e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv))
                        .map_err(|e| io_error(&path, e))?;
                }
                w.flush().map_err(|e| io_error(&path, e))?;
                Ok(path)
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(k, c)| (k.to_string(), c.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                write_json(dir, &format!("{stem}.json"), &rows)
            }
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(
    dir: &Path,
    name: &str,
    value: &T,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX] {
            let s = Cell::Real(x).csv();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }
}

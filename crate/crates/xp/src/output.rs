//! CSV and sidecar emission.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::scenario::{Columns, RunResult};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

fn write_err(path: &Path, e: impl ToString) -> OutputError {
    OutputError::Write { path: path.display().to_string(), message: e.to_string() }
}

fn read_err(path: &Path, e: impl ToString) -> OutputError {
    OutputError::Read { path: path.display().to_string(), message: e.to_string() }
}

/// Seventeen significant digits: every `f64` survives a round trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_columns(cols: &Columns, path: &Path) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(&cols.names).map_err(|e| write_err(path, e))?;
    let mut row = Vec::with_capacity(cols.names.len());
    for k in 0..cols.rows() {
        row.clear();
        row.extend(cols.data.iter().map(|c| format_value(c[k])));
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

/// Writes the trajectory with a header naming every column.
pub fn emit_csv(res: &RunResult, path: &Path) -> Result<(), OutputError> {
    write_columns(&res.columns, path)
}

pub fn read_csv(path: &Path) -> Result<Columns, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| read_err(path, e))?;
    let names: Vec<String> = r.headers().map_err(|e| read_err(path, e))?.iter().map(String::from).collect();
    let mut data = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|e| read_err(path, format!("{e} in {field:?}")))?;
            data[i].push(v);
        }
    }
    Ok(Columns { names, data })
}

/// Serializes a summary block as TOML key-value text.
pub fn write_toml<S: Serialize>(value: &S, path: &Path) -> Result<(), OutputError> {
    let text = toml::to_string(value).map_err(|e| write_err(path, e))?;
    std::fs::write(path, text).map_err(|e| write_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

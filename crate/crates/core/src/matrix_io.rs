//! Headerless CSV matrix files: one row per line, decimal entries.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// Parses CSV text into rows. Shape is not checked here.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

/// Formats one entry with 17 significant digits.
pub fn format_entry(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_matrix(m: &SpdMatrix) -> String {
    let mut out = String::new();
    for row in m.as_slice().chunks(m.dim()) {
        let line: Vec<String> = row.iter().copied().map(format_entry).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &SpdMatrix) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(format_matrix(m).as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

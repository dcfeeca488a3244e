//! Plain numeric CSV: comma separated, LF line endings, no quoting, and an
//! optional single header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use l12glasso_core::DenseMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: line {line}, column {column}: cannot parse '{value}' as a number")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        value: String,
    },
    #[error("{path}: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: no data rows")]
    Empty { path: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CsvError {
    CsvError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads a rectangular numeric grid. Line numbers in errors are 1-based and
/// count the header.
pub fn load_matrix_csv(path: &Path, has_header: bool) -> Result<DenseMatrix, CsvError> {
    let name = || path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CsvError::RaggedRows {
                    path: name(),
                    line,
                    expected: c,
                    found: record.len(),
                })
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CsvError::Parse {
                path: name(),
                line,
                column: j + 1,
                value: field.to_string(),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CsvError::Empty { path: name() })?;
    DenseMatrix::new(rows, cols, data).map_err(|e| CsvError::Invalid {
        path: name(),
        message: e.to_string(),
    })
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|&v| format_number(v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

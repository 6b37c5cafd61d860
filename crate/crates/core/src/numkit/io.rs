//! Plain-CSV matrix serialization: one row per line, comma separated,
//! `.` radix, no header.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::CsvError;

/// Parses a matrix from CSV text. Every row must have the same width.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>, CsvError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| CsvError::BadNumber {
                line: idx + 1,
                token: token.to_string(),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CsvError::RaggedRow {
                    line: idx + 1,
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CsvError::EmptyInput);
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Renders a matrix as CSV text with shortest round-trip float formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_csv(&text)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<(), CsvError> {
    let mut file = std::fs::File::create(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(matrix_to_csv(m).as_bytes())
        .map_err(|source| CsvError::Io {
            path: path.display().to_string(),
            source,
        })
}

//! Reading and writing dense matrices: MatrixMarket `array` files (`.mtx`)
//! and headerless comma-separated text (`.csv`), chosen by extension.
//!
//! Values are written in the shortest decimal form that parses back to the
//! same `f64`, so a write followed by a read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported matrix file extension {0:?} (expected .mtx or .csv)")]
    UnsupportedExtension(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    MatrixMarket,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self, IoError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "mtx" => Ok(Format::MatrixMarket),
            "csv" => Ok(Format::Csv),
            _ => Err(IoError::UnsupportedExtension(ext)),
        }
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, IoError> {
    let format = Format::from_path(path)?;
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        Format::MatrixMarket => parse_matrix_market(&text),
        Format::Csv => parse_csv(&text),
    }
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<(), IoError> {
    let text = match Format::from_path(path)? {
        Format::MatrixMarket => to_matrix_market(a),
        Format::Csv => to_csv(a),
    };
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_value(token: &str, line: usize, column: usize) -> Result<f64, IoError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, column, format!("cannot parse {token:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(
            line,
            column,
            format!("non-finite value {token:?}"),
        ));
    }
    Ok(v)
}

/// Tokens of a line with their 1-based starting columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (line[..offset].chars().count() + 1, tok)
    })
}

/// Parses `%%MatrixMarket matrix array real general` (also `integer` or
/// `double` fields); entries are listed column by column.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty file"))?;
    let head: Vec<String> = header
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if head.first().map(String::as_str) != Some("%%matrixmarket") || head.len() != 5 {
        return Err(parse_err(
            1,
            1,
            "expected a %%MatrixMarket header with four fields",
        ));
    }
    if head[1] != "matrix" || head[2] != "array" {
        return Err(parse_err(
            1,
            1,
            "only dense `matrix array` files are supported",
        ));
    }
    if !matches!(head[3].as_str(), "real" | "double" | "integer") {
        return Err(parse_err(1, 1, format!("unsupported field {:?}", head[3])));
    }
    if head[4] != "general" {
        return Err(parse_err(
            1,
            1,
            format!("unsupported symmetry {:?}", head[4]),
        ));
    }
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_err(2, 1, "missing size line"))?;
    let dims: Vec<(usize, &str)> = tokens(size).collect();
    if dims.len() != 2 {
        return Err(parse_err(size_line, 1, "size line must hold `rows cols`"));
    }
    let mut shape = [0usize; 2];
    for (slot, &(col, tok)) in shape.iter_mut().zip(&dims) {
        *slot = tok.parse().map_err(|_| {
            parse_err(
                size_line,
                col,
                format!("cannot parse {tok:?} as a dimension"),
            )
        })?;
    }
    let [rows, cols] = shape;
    if rows == 0 || cols == 0 {
        return Err(MatrixError::EmptyShape { rows, cols }.into());
    }
    let total = rows * cols;
    let mut column_major = Vec::with_capacity(total);
    let mut last_line = size_line;
    for (line, text) in body {
        last_line = line;
        for (col, tok) in tokens(text) {
            if column_major.len() == total {
                return Err(parse_err(line, col, format!("more than {total} entries")));
            }
            column_major.push(parse_value(tok, line, col)?);
        }
    }
    if column_major.len() != total {
        return Err(parse_err(
            last_line + 1,
            1,
            format!("expected {total} entries, found {}", column_major.len()),
        ));
    }
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        column_major[j * rows + i]
    }))
}

/// Parses one matrix row per non-empty line, fields separated by commas.
pub fn parse_csv(text: &str) -> Result<DenseMatrix, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut col = 1;
        for field in line.split(',') {
            let lead = field.len() - field.trim_start().len();
            let tok = field.trim();
            let at = col + field[..lead].chars().count();
            if tok.is_empty() {
                return Err(parse_err(line_no, at, "empty field"));
            }
            row.push(parse_value(tok, line_no, at)?);
            col += field.chars().count() + 1;
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line_no,
                    1,
                    format!("row has {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, 1, "no data rows"));
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

fn fmt_value(out: &mut String, x: f64) {
    // `{:e}` prints the shortest digits that round-trip.
    write!(out, "{x:e}").expect("writing to a String cannot fail");
}

pub fn to_matrix_market(a: &DenseMatrix) -> String {
    let (rows, cols) = a.shape();
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    writeln!(out, "{rows} {cols}").expect("writing to a String cannot fail");
    for j in 0..cols {
        for i in 0..rows {
            fmt_value(&mut out, a.get(i, j));
            out.push('\n');
        }
    }
    out
}

pub fn to_csv(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.rows() {
        for (j, &x) in a.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            fmt_value(&mut out, x);
        }
        out.push('\n');
    }
    out
}

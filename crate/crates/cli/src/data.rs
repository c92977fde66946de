//! Delimited text matrices: rows are samples, columns variables, fields split
//! on commas or runs of whitespace, an optional header row of names.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

fn fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

pub fn parse_table(text: &str, path: &Path) -> CliResult<Table> {
    let err = |line: usize, column: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts = fields(line);
        let first_content = width.is_none() && names.is_none();
        if first_content && parts.iter().any(|f| f.parse::<f64>().is_err()) {
            if let Some(pos) = parts.iter().position(|f| f.is_empty()) {
                return Err(err(line_no, pos + 1, "empty column name".into()));
            }
            names = Some(parts.iter().map(|s| s.to_string()).collect());
            width = Some(parts.len());
            continue;
        }
        let expected = *width.get_or_insert(parts.len());
        if parts.len() != expected {
            return Err(err(
                line_no,
                parts.len().min(expected) + 1,
                format!("expected {expected} fields, found {}", parts.len()),
            ));
        }
        for (col, f) in parts.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| err(line_no, col + 1, format!("cannot parse '{f}' as a number")))?;
            if !v.is_finite() {
                return Err(err(line_no, col + 1, format!("non-finite value '{f}'")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(p) = width else {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    };
    if rows == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let names = names.unwrap_or_else(|| (0..p).map(|j| format!("v{j}")).collect());
    let values = Array2::from_shape_vec((rows, p), values).expect("row lengths checked");
    Ok(Table { names, values })
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_table(&text, path)
}

/// Comma-separated, shortest round-trip formatting for every float.
pub fn format_matrix(header: Option<&[String]>, values: &Array2<f64>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in values.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

/// Writes a header line plus rows of already-formatted cells.
pub fn format_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Left-aligned text table with columns padded to their widest cell.
pub fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

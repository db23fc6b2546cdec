//! Plain-text complex matrix format.
//!
//! ```text
//! # CMX1 rows=2 cols=2
//! 1.0,0.0,0.5,-0.25
//! 0.5,0.25,2.0,0.0
//! ```
//!
//! Each data row holds `2·cols` fields with real and imaginary parts
//! interleaved. Floats are written in shortest round-trip form. Further `#`
//! lines directly after the header carry metadata and are returned verbatim.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64};

const MAGIC: &str = "# CMX1";

pub fn write_cmx(m: &ComplexMatrix, metadata: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} rows={} cols={}", m.rows(), m.cols());
    for line in metadata {
        let _ = writeln!(out, "# {line}");
    }
    for r in 0..m.rows() {
        let mut first = true;
        for z in m.row(r) {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{:?},{:?}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

/// Parses a CMX1 document, returning the matrix and any metadata lines
/// (without the leading `# `).
pub fn parse_cmx(text: &str) -> Result<(ComplexMatrix, Vec<String>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected '{MAGIC}' header") })?;
    let mut rows = None;
    let mut cols = None;
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("bad header token '{tok}'") })?;
        let val: usize =
            val.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad value in '{tok}'") })?;
        match key {
            "rows" => rows = Some(val),
            "cols" => cols = Some(val),
            _ => return Err(Error::Parse { line: 1, msg: format!("unknown header key '{key}'") }),
        }
    }
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => return Err(Error::Parse { line: 1, msg: "header needs rows= and cols=".into() }),
    };

    let mut metadata = Vec::new();
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if seen_rows > 0 {
                return Err(Error::Parse { line: lineno, msg: "metadata after data rows".into() });
            }
            metadata.push(meta.trim().to_string());
            continue;
        }
        if seen_rows == rows {
            return Err(Error::Parse { line: lineno, msg: "more rows than declared".into() });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 * cols {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", 2 * cols, fields.len()),
            });
        }
        for pair in fields.chunks(2) {
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line: lineno, msg: format!("bad number '{s}'") })
            };
            data.push(C64::new(parse(pair[0])?, parse(pair[1])?));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {rows} rows, found {seen_rows}"),
        });
    }
    Ok((ComplexMatrix::from_vec(rows, cols, data)?, metadata))
}

pub fn read_cmx_file(path: impl AsRef<Path>) -> Result<(ComplexMatrix, Vec<String>)> {
    parse_cmx(&std::fs::read_to_string(path)?)
}

pub fn write_cmx_file(path: impl AsRef<Path>, m: &ComplexMatrix, metadata: &[String]) -> Result<()> {
    std::fs::write(path, write_cmx(m, metadata))?;
    Ok(())
}

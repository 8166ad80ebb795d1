//! Spectrum CSV: one `# key=value ...` header line, then `axis,value` rows.
//!
//! The header must carry `kind`, `axis_unit` and `value_unit`; further
//! tokens are kept as metadata. Numbers are written with 17 significant
//! digits so a write/read cycle is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_text, PipeError};
use crate::spectrum::{Spectrum, SpectrumError};

const REQUIRED: [&str; 3] = ["kind", "axis_unit", "value_unit"];

pub fn format_spectrum(spectrum: &Spectrum) -> Result<String, PipeError> {
    spectrum.check()?;
    let mut out = format!(
        "# kind={} axis_unit={} value_unit={}",
        spectrum.kind, spectrum.axis_unit, spectrum.value_unit
    );
    for (k, v) in &spectrum.meta {
        if REQUIRED.contains(&k.as_str()) || k.is_empty() || v.is_empty() || [k, v].iter().any(|s| s.contains(|c: char| c.is_whitespace() || c == '=')) {
            return Err(PipeError::Argument(format!("metadata `{k}={v}` cannot be written to a CSV header")));
        }
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    for (x, y) in spectrum.axis.iter().zip(&spectrum.values) {
        let _ = writeln!(out, "{x:.16e},{y:.16e}");
    }
    Ok(out)
}

pub fn write_spectrum(spectrum: &Spectrum, path: &Path) -> Result<(), PipeError> {
    write_text(path, &format_spectrum(spectrum)?)
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum, PipeError> {
    parse_spectrum(&read_text(path)?)
}

fn header_error(message: impl Into<String>) -> PipeError {
    PipeError::Format {
        line: 1,
        message: message.into(),
    }
}

pub fn parse_spectrum(text: &str) -> Result<Spectrum, PipeError> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) if l.trim_start().starts_with('#') => l.trim_start()[1..].trim(),
        _ => return Err(header_error("missing `# kind=... axis_unit=... value_unit=...` header")),
    };
    let mut tags = BTreeMap::new();
    for token in header.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| header_error(format!("header token `{token}` is not key=value")))?;
        if tags.insert(k.to_string(), v.to_string()).is_some() {
            return Err(header_error(format!("duplicate header key `{k}`")));
        }
    }
    let mut take = |key: &str| tags.remove(key).ok_or_else(|| header_error(format!("header lacks `{key}`")));
    let kind = take("kind")?.parse().map_err(|e: SpectrumError| header_error(e.to_string()))?;
    let axis_unit = take("axis_unit")?.parse().map_err(|e: SpectrumError| header_error(e.to_string()))?;
    let value_unit = take("value_unit")?.parse().map_err(|e: SpectrumError| header_error(e.to_string()))?;

    let mut axis = Vec::new();
    let mut values = Vec::new();
    let mut line_of = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(PipeError::Format {
                line: line_no,
                message: format!("expected 2 cells, found {}", cells.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| PipeError::Format {
                line: line_no,
                message: format!("`{s}` is not a number"),
            })
        };
        axis.push(num(cells[0])?);
        values.push(num(cells[1])?);
        line_of.push(line_no);
    }
    if axis.is_empty() {
        return Err(PipeError::Format {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let at = |idx: usize| line_of.get(idx).copied().unwrap_or(1);
    let mut spectrum = Spectrum::new(kind, axis_unit, value_unit, axis, values).map_err(|e| match e {
        SpectrumError::NonMonotoneAxis(i) => PipeError::Format {
            line: at(i),
            message: "axis is not strictly increasing".into(),
        },
        SpectrumError::NonFinite(i) => PipeError::Format {
            line: at(i),
            message: "non-finite value".into(),
        },
        other => PipeError::Spectrum(other),
    })?;
    spectrum.meta = tags;
    Ok(spectrum)
}

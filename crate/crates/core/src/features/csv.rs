//! Feature CSV: `domain,f1,...,f15,label`. Booleans are 0/1, F15 has six
//! decimals, categorical columns are always quoted, label is `pos`, `neg`
//! or empty.

use super::{FeatureId, FeatureVector, Label, ValueRef};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("feature CSV I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("feature CSV line {line}: {message}")]
    Format { line: u64, message: String },
}

pub fn header() -> String {
    let mut h = String::from("domain");
    for id in FeatureId::ALL {
        h.push(',');
        h.push_str(id.name());
    }
    h.push_str(",label");
    h
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn plain(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        quoted(s)
    } else {
        s.to_string()
    }
}

pub fn format_row(v: &FeatureVector) -> String {
    let mut row = plain(&v.domain);
    for id in FeatureId::ALL {
        row.push(',');
        match v.value(id) {
            ValueRef::Bool(b) => row.push(if b { '1' } else { '0' }),
            ValueRef::Cat(s) => row.push_str(&quoted(s)),
            ValueRef::Int(i) => row.push_str(&i.to_string()),
            ValueRef::Real(r) => row.push_str(&format!("{r:.6}")),
        }
    }
    row.push(',');
    if let Some(l) = v.label {
        row.push_str(l.as_str());
    }
    row
}

pub fn write_features<W: Write>(mut out: W, rows: &[FeatureVector]) -> std::io::Result<()> {
    writeln!(out, "{}", header())?;
    for r in rows {
        writeln!(out, "{}", format_row(r))?;
    }
    out.flush()
}

fn parse_row(rec: &::csv::StringRecord, line: u64) -> Result<FeatureVector, CsvError> {
    let err = |message: String| CsvError::Format { line, message };
    if rec.len() != 17 {
        return Err(err(format!("expected 17 columns, found {}", rec.len())));
    }
    let mut v = FeatureVector::blank(rec[0].to_string());
    for id in FeatureId::ALL {
        let cell = rec[id.index() + 1].trim();
        match v.value(id) {
            ValueRef::Bool(_) => {
                let b = match cell {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(format!("{id}: expected 0 or 1, found {other:?}"))),
                };
                v.set_bool(id, b);
            }
            ValueRef::Cat(_) => v.set_categorical(id, rec[id.index() + 1].to_string()),
            ValueRef::Int(_) => {
                let n: u64 = cell.parse().map_err(|_| err(format!("{id}: bad integer {cell:?}")))?;
                v.set_numeric(id, n as f64);
            }
            ValueRef::Real(_) => {
                let r: f64 = cell.parse().map_err(|_| err(format!("{id}: bad number {cell:?}")))?;
                if !r.is_finite() {
                    return Err(err(format!("{id}: non-finite value")));
                }
                v.set_numeric(id, r);
            }
        }
    }
    let label = rec[16].trim();
    v.label = if label.is_empty() {
        None
    } else {
        Some(label.parse::<Label>().map_err(err)?)
    };
    Ok(v)
}

pub fn read_features<R: Read>(input: R) -> Result<Vec<FeatureVector>, CsvError> {
    let mut reader = ::csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| CsvError::Format { line: 1, message: e.to_string() })?;
    let expected = header();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got.join(",") != expected {
        return Err(CsvError::Format {
            line: 1,
            message: format!("header must be {expected:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CsvError::Format {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(parse_row(&rec, line)?);
    }
    Ok(rows)
}

//! Deterministic report serialization.
//!
//! JSON keeps struct field order and prints every float with 12 significant
//! digits. CSV uses RFC 4180 quoting. Identical reports always produce
//! identical bytes.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("cannot write csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(format!("unknown format `{other}` (expected json, csv or table)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Table => "table",
        })
    }
}

/// Row view of a report for CSV and table output.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

/// Formats a float with 12 significant digits, trimming trailing zeros.
/// Integral values keep a `.0` suffix; very large or small magnitudes switch
/// to exponent form.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_fraction(&fixed)
    } else {
        let m = trim_fraction(mantissa);
        format!("{}e{}", m.strip_suffix(".0").unwrap_or(&m), exp)
    }
}

fn trim_fraction(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, EmitError> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out);
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                if f.is_finite() {
                    out.push_str(&fmt_float(f));
                } else {
                    out.push_str("null");
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escapes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key escapes"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

pub fn to_csv<R: Tabular + ?Sized>(report: &R) -> Result<String, EmitError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(report.header())?;
    for row in report.rows() {
        wtr.write_record(row)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| EmitError::Io {
            path: "<memory>".into(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf8"))
}

pub fn to_table<R: Tabular + ?Sized>(report: &R) -> String {
    let header = report.header();
    let rows = report.rows();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths.get(i).copied().unwrap_or(0)))
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("  "));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Serializes a report in the requested format.
pub fn emit<R: Serialize + Tabular>(report: &R, format: Format) -> Result<Vec<u8>, EmitError> {
    let text = match format {
        Format::Json => {
            let mut s = to_json(report)?;
            s.push('\n');
            s
        }
        Format::Csv => to_csv(report)?,
        Format::Table => to_table(report),
    };
    Ok(text.into_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    fs::write(path, bytes).map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })
}

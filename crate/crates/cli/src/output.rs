//! Artifacts: `result.json` with fixed 17-significant-digit floats,
//! `result.csv` and two-column `*.dat` files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub tolerance: f64,
    pub detail: Value,
}

/// A table cell; floats are written with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }
}

/// Two-column plot data.
#[derive(Debug, Clone)]
pub struct Dat {
    pub name: String,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub result: Value,
    pub verdicts: Vec<Verdict>,
    pub table: Table,
    pub dats: Vec<Dat>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// `{:.16e}`: 17 significant digits, so equal runs give equal bytes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no infinities; these never arise from valid runs.
        "null".into()
    }
}

/// Pretty JSON with every float printed by [`fmt_f64`].
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Short numeric arrays (points, vectors) stay on one line.
            if items.len() <= 4 && items.iter().all(Value::is_number) {
                out.push('[');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, it, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, it) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, it, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, it)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, it, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write { path: path.to_path_buf(), message: e.to_string() }
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    fs::write(path, to_json(v)).map_err(|e| write_err(path, e))
}

pub fn write_csv(path: &Path, t: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(&t.headers).map_err(|e| write_err(path, e))?;
    for row in &t.rows {
        let rec: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => fmt_f64(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => s.clone(),
                Cell::Empty => String::new(),
            })
            .collect();
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn write_dat(dir: &Path, d: &Dat) -> Result<(), CliError> {
    let path = dir.join(format!("{}.dat", d.name));
    let mut s = format!("# {} {}\n", d.columns[0], d.columns[1]);
    for (x, y) in &d.points {
        let _ = writeln!(s, "{} {}", fmt_f64(*x), fmt_f64(*y));
    }
    fs::write(&path, s).map_err(|e| write_err(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        let back: f64 = fmt_f64(0.1 + 0.2).parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
    }

    #[test]
    fn json_is_valid_and_stable() {
        let v = json!({"a": [1, 2.5, -3], "b": {"c": "x\"y", "d": null, "e": []}, "f": 1e-300});
        let s = to_json(&v);
        let parsed: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["a"][1], json!(2.5));
        assert_eq!(parsed["b"]["c"], json!("x\"y"));
        assert_eq!(s, to_json(&v));
        assert!(s.contains("\"a\": [1, 2.5000000000000000e0, -3]"));
    }
}

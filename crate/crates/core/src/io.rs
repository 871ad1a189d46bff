//! Point-set files.
//!
//! CSV: an optional `# d=<dim>` header, then one point per line with
//! comma-separated coordinates. JSON: `{"d": <dim>, "points": [[...], ...]}`.
//! Writers emit 17 significant digits so values round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PointSet};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid JSON point set: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for `.json` files, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonPointSet {
    d: usize,
    points: Vec<Vec<f64>>,
}

pub fn parse_csv<T: Real>(text: &str) -> Result<PointSet<T>, IoError> {
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = k + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("d=") {
                let d = v.trim().parse::<usize>().map_err(|e| IoError::Parse { line: lineno, msg: format!("bad dimension header: {e}") })?;
                dim = Some(d);
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| IoError::Parse { line: lineno, msg: format!("not a number: {f:?}") })
            })
            .collect::<Result<Vec<T>, _>>()?;
        let expected = *dim.get_or_insert(row.len());
        if row.len() != expected {
            return Err(IoError::Parse { line: lineno, msg: format!("expected {expected} coordinates, found {}", row.len()) });
        }
        rows.push(row);
    }
    match dim {
        Some(d) if rows.is_empty() => Ok(PointSet::new(d, Vec::new())?),
        None => Err(IoError::Parse { line: 0, msg: "empty point set without a `# d=` header".into() }),
        _ => Ok(PointSet::from_rows(&rows)?),
    }
}

pub fn parse_json<T: Real>(text: &str) -> Result<PointSet<T>, IoError> {
    let raw: JsonPointSet = serde_json::from_str(text)?;
    if raw.points.is_empty() {
        return Ok(PointSet::new(raw.d, Vec::new())?);
    }
    let rows: Vec<Vec<T>> = raw.points.iter().map(|p| p.iter().map(|&v| T::lit(v)).collect()).collect();
    if let Some((k, p)) = rows.iter().enumerate().find(|(_, p)| p.len() != raw.d) {
        return Err(IoError::Parse { line: k + 1, msg: format!("point {k} has {} coordinates, expected {}", p.len(), raw.d) });
    }
    Ok(PointSet::from_rows(&rows)?)
}

pub fn to_csv<T: Real>(set: &PointSet<T>) -> String {
    let mut out = format!("# d={}\n", set.dim());
    for p in set.points() {
        let cols: Vec<String> = p.as_slice().iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Real>(set: &PointSet<T>) -> String {
    let raw = JsonPointSet { d: set.dim(), points: set.points().iter().map(|p| p.to_f64_vec()).collect() };
    serde_json::to_string_pretty(&raw).expect("point set serialises")
}

pub fn read_point_set<T: Real>(path: &Path) -> Result<PointSet<T>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    match Format::from_path(path) {
        Format::Csv => parse_csv(&text),
        Format::Json => parse_json(&text),
    }
}

pub fn write_point_set<T: Real>(set: &PointSet<T>, path: &Path) -> Result<(), IoError> {
    let text = match Format::from_path(path) {
        Format::Csv => to_csv(set),
        Format::Json => to_json(set),
    };
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

//! Tabular and summary output.
//!
//! Numbers in tables carry 12 significant digits so reruns diff cleanly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Table file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `x` with 12 significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Rounds `x` to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| fmt_num(x)))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Array of objects keyed by the header, values rounded like the CSV.
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(k, &v)| (k.clone(), json_num(round_sig(v))))
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("table serializes") + "\n"
    }

    /// Writes `dir/stem.{csv,json}` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> io::Result<PathBuf> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let body = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => self.to_json(),
        };
        fs::write(&path, body)?;
        Ok(path)
    }
}

/// Non-finite values become JSON null.
pub fn json_num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn write_summary<T: Serialize>(dir: &Path, stem: &str, summary: &T) -> io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.json"));
    let body = serde_json::to_string_pretty(summary).map_err(io::Error::other)?;
    fs::write(&path, body + "\n")?;
    Ok(path)
}

use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{HciError, Result};

/// A comparison series imported from a `date,value` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSeries {
    pub name: String,
    pub points: Vec<(NaiveDate, f64)>,
}

impl ExternalSeries {
    /// Sorts by date; fails on a repeated date.
    pub fn new(name: impl Into<String>, mut points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(HciError::DuplicateDate(w[0].0));
        }
        Ok(ExternalSeries {
            name: name.into(),
            points,
        })
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        self.points
            .binary_search_by_key(&date, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }
}

pub fn read_external_series<R: Read>(name: &str, input: R) -> Result<ExternalSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols != ["date", "value"] {
        return Err(HciError::Schema(format!(
            "external series header must be `date,value`, found `{}`",
            cols.join(",")
        )));
    }
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or("").trim(), "%Y-%m-%d").map_err(|e| {
            HciError::Line {
                line,
                message: format!("unparseable date: {e}"),
            }
        })?;
        let raw = rec.get(1).unwrap_or("").trim();
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| HciError::Line {
                line,
                message: format!("unparseable value {raw:?}"),
            })?;
        points.push((date, value));
    }
    ExternalSeries::new(name, points)
}

/// Imports a `date,value` file; the series is named after the file stem.
pub fn import_external_series(path: &Path) -> Result<ExternalSeries> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "external".into());
    let file = File::open(path).map_err(|e| HciError::io(path, e))?;
    read_external_series(&name, std::io::BufReader::new(file))
}

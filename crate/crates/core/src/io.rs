//! Count-series CSV files.
//!
//! One count per line, or `time,count` pairs. A first line that does not
//! parse as data is treated as a header. Blank lines are allowed only at the
//! end of the file.

use std::path::Path;

use crate::error::{GinarError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesFile {
    pub counts: Vec<u64>,
    /// Leading time column, verbatim, when present.
    pub time: Option<Vec<String>>,
}

fn parse_count(field: &str, line: u64) -> Result<u64> {
    if field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan") {
        return Err(GinarError::InvalidSeries(format!(
            "row {line}: missing value"
        )));
    }
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    match field.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(GinarError::InvalidSeries(format!(
            "row {line}: negative count {field}"
        ))),
        Ok(v) if v.fract() == 0.0 && v.is_finite() && v < 2f64.powi(53) => Ok(v as u64),
        Ok(_) => Err(GinarError::InvalidSeries(format!(
            "row {line}: non-integer count {field}"
        ))),
        Err(_) => Err(GinarError::InvalidSeries(format!(
            "row {line}: cannot parse {field:?} as a count"
        ))),
    }
}

fn looks_numeric(field: &str) -> bool {
    field.parse::<f64>().is_ok() || field.eq_ignore_ascii_case("na")
}

pub fn parse_series(text: &str) -> Result<SeriesFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| GinarError::Parse(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    // The csv reader skips empty lines, so detect interior blanks from the raw text.
    let last_data_line = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i)
        .last();
    if let Some(last) = last_data_line {
        if let Some((i, _)) = text
            .lines()
            .enumerate()
            .take(last)
            .find(|(_, l)| l.trim().is_empty())
        {
            return Err(GinarError::InvalidSeries(format!(
                "row {}: missing value",
                i + 1
            )));
        }
    }
    if let Some((_, first)) = rows.first() {
        if first.iter().any(|f| !looks_numeric(f))
            && first.iter().all(|f| !f.is_empty())
            && (first.len() == 1 || !looks_numeric(first.last().unwrap()))
        {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(GinarError::InvalidSeries("series is empty".into()));
    }
    let width = rows[0].1.len();
    if width > 2 {
        return Err(GinarError::InvalidSeries(format!(
            "row {}: expected 1 or 2 columns, got {width}",
            rows[0].0
        )));
    }
    let mut counts = Vec::with_capacity(rows.len());
    let mut time = (width == 2).then(Vec::new);
    for (line, fields) in rows {
        if fields.len() != width {
            return Err(GinarError::InvalidSeries(format!(
                "row {line}: expected {width} columns, got {}",
                fields.len()
            )));
        }
        counts.push(parse_count(&fields[width - 1], line)?);
        if let Some(t) = time.as_mut() {
            t.push(fields[0].clone());
        }
    }
    Ok(SeriesFile { counts, time })
}

pub fn read_series(path: &Path) -> Result<SeriesFile> {
    parse_series(&std::fs::read_to_string(path)?)
}

/// `count` header followed by one value per line.
pub fn format_series(counts: &[u64]) -> String {
    let mut out = String::with_capacity(counts.len() * 3 + 6);
    out.push_str("count\n");
    for c in counts {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

//! Forecast exchange table.
//!
//! CSV layout, one row per (issue time, horizon):
//!
//! ```text
//! issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2[,aux_irradiance_wm2][,p000..p099]
//! ```
//!
//! When present, the 100 probability columns describe the predicted
//! irradiance distribution over equal bins spanning 0..1300 W/m² and must sum
//! to one per row.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::timefmt;

pub const PROBABILITY_BINS: usize = 100;
pub const BIN_RANGE_WM2: f64 = 1300.0;
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

const BASE_COLUMNS: [&str; 4] = ["issue_time_iso", "horizon_min", "y_true_wm2", "y_pred_wm2"];
const AUX_COLUMN: &str = "aux_irradiance_wm2";

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub issue_time: DateTime<Utc>,
    pub horizon_min: u32,
    pub y_true: f64,
    pub y_pred: f64,
    pub aux_irradiance: Option<f64>,
    pub probabilities: Option<Vec<f64>>,
}

impl ForecastRow {
    pub fn new(issue_time: DateTime<Utc>, horizon_min: u32, y_true: f64, y_pred: f64) -> Self {
        Self {
            issue_time,
            horizon_min,
            y_true,
            y_pred,
            aux_irradiance: None,
            probabilities: None,
        }
    }

    pub fn key(&self) -> (DateTime<Utc>, u32) {
        (self.issue_time, self.horizon_min)
    }

    pub fn target_time(&self) -> DateTime<Utc> {
        self.issue_time + chrono::Duration::minutes(self.horizon_min as i64)
    }
}

/// Bin index of an irradiance value over `PROBABILITY_BINS` bins of 0..1300.
pub fn probability_bin(y: f64) -> usize {
    let width = BIN_RANGE_WM2 / PROBABILITY_BINS as f64;
    ((y / width).floor().max(0.0) as usize).min(PROBABILITY_BINS - 1)
}

pub fn probability_column(k: usize) -> String {
    format!("p{k:03}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastTable {
    pub rows: Vec<ForecastRow>,
}

impl ForecastTable {
    pub fn new(rows: Vec<ForecastRow>) -> Self {
        Self { rows }
    }

    pub fn horizons(&self) -> Vec<u32> {
        let mut h: Vec<u32> = self.rows.iter().map(|r| r.horizon_min).collect();
        h.sort_unstable();
        h.dedup();
        h
    }

    /// Rows of one horizon ordered by issue time.
    pub fn horizon_rows(&self, horizon: u32) -> Vec<&ForecastRow> {
        let mut rows: Vec<&ForecastRow> = self.rows.iter().filter(|r| r.horizon_min == horizon).collect();
        rows.sort_by_key(|r| r.issue_time);
        rows
    }

    pub fn index(&self) -> BTreeMap<(DateTime<Utc>, u32), &ForecastRow> {
        self.rows.iter().map(|r| (r.key(), r)).collect()
    }

    fn has_aux(&self) -> bool {
        self.rows.iter().any(|r| r.aux_irradiance.is_some())
    }

    fn has_probabilities(&self) -> bool {
        self.rows.iter().any(|r| r.probabilities.is_some())
    }

    /// Check the table-level invariants: unique keys, finite values, and
    /// normalized probability vectors.
    pub fn validate(&self) -> Result<()> {
        let schema = |i: usize, message: String| Error::Schema {
            path: "<table>".into(),
            line: i as u64 + 2,
            message,
        };
        let mut seen = std::collections::BTreeSet::new();
        for (i, r) in self.rows.iter().enumerate() {
            if !seen.insert(r.key()) {
                return Err(schema(i, "duplicate (issue_time, horizon) key".into()));
            }
            if !(r.y_true.is_finite() && r.y_pred.is_finite()) {
                return Err(schema(i, "non-finite irradiance".into()));
            }
            if let Some(p) = &r.probabilities {
                check_probabilities(p).map_err(|m| schema(i, m))?;
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let schema = |line: u64, message: String| Error::Schema {
            path: origin.to_string(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| schema(1, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.len() < 4 || headers[..4] != BASE_COLUMNS {
            return Err(schema(1, format!("header must start with {}", BASE_COLUMNS.join(","))));
        }
        let mut col = 4;
        let has_aux = headers.get(col).map(String::as_str) == Some(AUX_COLUMN);
        if has_aux {
            col += 1;
        }
        let prob_cols = &headers[col..];
        let has_probs = !prob_cols.is_empty();
        if has_probs {
            let expected: Vec<String> = (0..PROBABILITY_BINS).map(probability_column).collect();
            if prob_cols != expected.as_slice() {
                return Err(schema(
                    1,
                    format!("probability columns must be exactly p000..p{:03}", PROBABILITY_BINS - 1),
                ));
            }
        }

        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| schema(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let num = |i: usize, name: &str| -> Result<f64> {
                let v: f64 = rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| schema(line, format!("{name}: '{}' is not a number", &rec[i])))?;
                if !v.is_finite() {
                    return Err(schema(line, format!("{name} is not finite")));
                }
                Ok(v)
            };
            let issue_time = timefmt::parse_iso(&rec[0]).map_err(|m| schema(line, m))?;
            let horizon_min: u32 = rec[1]
                .trim()
                .parse()
                .map_err(|_| schema(line, format!("horizon_min: '{}' is not a non-negative integer", &rec[1])))?;
            let mut row = ForecastRow::new(issue_time, horizon_min, num(2, "y_true_wm2")?, num(3, "y_pred_wm2")?);
            if has_aux {
                row.aux_irradiance = Some(num(4, AUX_COLUMN)?);
            }
            if has_probs {
                let p = (0..PROBABILITY_BINS)
                    .map(|k| num(col + k, &probability_column(k)))
                    .collect::<Result<Vec<_>>>()?;
                check_probabilities(&p).map_err(|m| schema(line, m))?;
                row.probabilities = Some(p);
            }
            if !seen.insert(row.key()) {
                return Err(schema(line, "duplicate (issue_time, horizon) key".into()));
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn to_csv(&self) -> String {
        let has_aux = self.has_aux();
        let has_probs = self.has_probabilities();
        let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        if has_aux {
            header.push(AUX_COLUMN.into());
        }
        if has_probs {
            header.extend((0..PROBABILITY_BINS).map(probability_column));
        }
        let mut s = header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}",
                timefmt::format_iso(&r.issue_time),
                r.horizon_min,
                r.y_true,
                r.y_pred
            ));
            if has_aux {
                s.push_str(&format!(",{}", r.aux_irradiance.unwrap_or(f64::NAN)));
            }
            if has_probs {
                match &r.probabilities {
                    Some(p) => p.iter().for_each(|v| s.push_str(&format!(",{v}"))),
                    None => (0..PROBABILITY_BINS).for_each(|_| s.push_str(",NaN")),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.validate()?;
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }
}

fn check_probabilities(p: &[f64]) -> std::result::Result<(), String> {
    if p.len() != PROBABILITY_BINS {
        return Err(format!("expected {PROBABILITY_BINS} probabilities, got {}", p.len()));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err("probabilities must be finite and non-negative".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, expected 1 ± {PROBABILITY_TOLERANCE}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn row(m: u32, h: u32) -> ForecastRow {
        ForecastRow::new(Utc.with_ymd_and_hms(2019, 3, 5, 9, m, 0).unwrap(), h, 400.0, 380.5)
    }

    #[test]
    fn bins() {
        assert_eq!(probability_bin(0.0), 0);
        assert_eq!(probability_bin(12.99), 0);
        assert_eq!(probability_bin(13.0), 1);
        assert_eq!(probability_bin(1299.0), 99);
        assert_eq!(probability_bin(5000.0), 99);
        assert_eq!(probability_bin(-4.0), 0);
    }

    #[test]
    fn roundtrip_plain_and_full() {
        let plain = ForecastTable::new(vec![row(0, 2), row(2, 2), row(0, 10)]);
        assert_eq!(ForecastTable::parse_csv(&plain.to_csv(), "t").unwrap(), plain);

        let mut full = plain.clone();
        for (i, r) in full.rows.iter_mut().enumerate() {
            r.aux_irradiance = Some(100.0 + i as f64);
            let mut p = vec![0.0; PROBABILITY_BINS];
            p[i] = 0.25;
            p[i + 1] = 0.75;
            r.probabilities = Some(p);
        }
        let text = full.to_csv();
        assert!(text.starts_with("issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2,aux_irradiance_wm2,p000,p001"));
        assert!(text.lines().next().unwrap().ends_with(",p099"));
        assert_eq!(ForecastTable::parse_csv(&text, "t").unwrap(), full);
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let bad_header = "issue_time,horizon_min,y_true_wm2,y_pred_wm2\n";
        assert!(matches!(
            ForecastTable::parse_csv(bad_header, "t"),
            Err(Error::Schema { line: 1, .. })
        ));
        let bad_value = "issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2\n2019-01-01T10:00:00Z,2,1,2\n2019-01-01T10:02:00Z,2,x,2\n";
        assert!(matches!(
            ForecastTable::parse_csv(bad_value, "t"),
            Err(Error::Schema { line: 3, .. })
        ));
        let dup = "issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2\n2019-01-01T10:00:00Z,2,1,2\n2019-01-01T10:00:00Z,2,1,2\n";
        assert!(matches!(ForecastTable::parse_csv(dup, "t"), Err(Error::Schema { line: 3, .. })));
    }

    #[test]
    fn unnormalized_probabilities_rejected() {
        let mut header = BASE_COLUMNS.join(",");
        for k in 0..PROBABILITY_BINS {
            header.push_str(&format!(",{}", probability_column(k)));
        }
        let mut line = String::from("2019-01-01T10:00:00Z,2,1,2");
        for _ in 0..PROBABILITY_BINS {
            line.push_str(",0.0101");
        }
        let text = format!("{header}\n{line}\n");
        assert!(matches!(ForecastTable::parse_csv(&text, "t"), Err(Error::Schema { line: 2, .. })));
    }

    #[test]
    fn partial_probability_columns_rejected() {
        let text = "issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2,p000,p001\n";
        assert!(matches!(ForecastTable::parse_csv(text, "t"), Err(Error::Schema { line: 1, .. })));
    }
}

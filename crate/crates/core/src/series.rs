//! Uniformly sampled irradiance measurements.

use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use crate::error::{Error, Result};
use crate::timefmt;

/// GHI samples in W/m², strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IrradianceSeries {
    samples: Vec<(DateTime<Utc>, f64)>,
}

impl IrradianceSeries {
    pub fn new(mut samples: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        samples.sort_by_key(|s| s.0);
        if let Some(w) = samples.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain(format!(
                "duplicate timestamp {}",
                timefmt::format_iso(&w[0].0)
            )));
        }
        if let Some(s) = samples.iter().find(|s| !s.1.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at {}",
                timefmt::format_iso(&s.0)
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(DateTime<Utc>, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample closest to `t` within `tolerance`.
    pub fn nearest(&self, t: DateTime<Utc>, tolerance: Duration) -> Option<(DateTime<Utc>, f64)> {
        let idx = self.samples.partition_point(|s| s.0 < t);
        let mut best: Option<(DateTime<Utc>, f64)> = None;
        for i in [idx.wrapping_sub(1), idx] {
            if let Some(&(ts, v)) = self.samples.get(i) {
                let d = (ts - t).abs();
                if d <= tolerance && best.map_or(true, |b| d < (b.0 - t).abs()) {
                    best = Some((ts, v));
                }
            }
        }
        best
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Parse `timestamp_iso,ghi_wm2` CSV text.
    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let schema = |line: u64, message: String| Error::Schema {
            path: origin.to_string(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| schema(1, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["timestamp_iso", "ghi_wm2"] {
            return Err(schema(1, "expected header timestamp_iso,ghi_wm2".into()));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| schema(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let t = timefmt::parse_iso(&rec[0]).map_err(|m| schema(line, m))?;
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| schema(line, format!("bad irradiance '{}'", &rec[1])))?;
            samples.push((t, v));
        }
        Self::new(samples)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("timestamp_iso,ghi_wm2\n");
        for (t, v) in &self.samples {
            s.push_str(&format!("{},{v}\n", timefmt::format_iso(t)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t(m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 5, 2, 10, m, 0).unwrap()
    }

    #[test]
    fn nearest_within_tolerance() {
        let s = IrradianceSeries::new(vec![(t(0), 1.0), (t(1), 2.0), (t(3), 3.0)]).unwrap();
        let tol = Duration::seconds(60);
        assert_eq!(s.nearest(t(1) + Duration::seconds(20), tol), Some((t(1), 2.0)));
        assert_eq!(s.nearest(t(2) + Duration::seconds(40), tol), Some((t(3), 3.0)));
        assert_eq!(s.nearest(t(5) + Duration::seconds(1), tol), None);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let s = IrradianceSeries::new(vec![(t(0), 10.5), (t(1), 0.0)]).unwrap();
        assert_eq!(IrradianceSeries::parse_csv(&s.to_csv(), "x").unwrap(), s);
        let bad = "timestamp_iso,ghi_wm2\n2019-01-01T00:00:00Z,abc\n";
        match IrradianceSeries::parse_csv(bad, "x") {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(IrradianceSeries::new(vec![(t(0), 1.0), (t(0), 2.0)]).is_err());
    }
}

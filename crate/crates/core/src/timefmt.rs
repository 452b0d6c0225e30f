//! Timestamp parsing and formatting used by every CSV/filename interface.

use chrono::{DateTime, NaiveDateTime, Utc};

/// Parse an ISO-8601 timestamp. Strings without an offset are taken as UTC.
pub fn parse_iso(s: &str) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(format!("unparseable timestamp '{s}'"))
}

pub fn format_iso(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parse a compact `YYYYMMDDhhmm` or `YYYYMMDDhhmmss` stamp.
pub fn parse_compact(s: &str) -> Option<DateTime<Utc>> {
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let fmt = match s.len() {
        12 => "%Y%m%d%H%M",
        14 => "%Y%m%d%H%M%S",
        _ => return None,
    };
    NaiveDateTime::parse_from_str(s, fmt).ok().map(|t| t.and_utc())
}

pub fn format_compact(t: &DateTime<Utc>) -> String {
    t.format("%Y%m%d%H%M%S").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn iso_variants() {
        let t = Utc.with_ymd_and_hms(2019, 3, 4, 10, 2, 0).unwrap();
        for s in ["2019-03-04T10:02:00Z", "2019-03-04T11:02:00+01:00", "2019-03-04T10:02:00", "2019-03-04 10:02"] {
            assert_eq!(parse_iso(s).unwrap(), t, "{s}");
        }
        assert_eq!(format_iso(&t), "2019-03-04T10:02:00Z");
        assert!(parse_iso("yesterday").is_err());
    }

    #[test]
    fn compact_stamps() {
        let t = Utc.with_ymd_and_hms(2018, 7, 1, 16, 0, 0).unwrap();
        assert_eq!(parse_compact("201807011600"), Some(t));
        assert_eq!(parse_compact("20180701160000"), Some(t));
        assert_eq!(parse_compact("2018070116"), None);
        assert_eq!(parse_compact(&format_compact(&t)), Some(t));
    }
}

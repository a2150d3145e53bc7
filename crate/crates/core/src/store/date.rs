//! Civil dates as Int64 nanoseconds since the UNIX epoch (UTC midnight).

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const NANOS_PER_DAY: i64 = 86_400_000_000_000;

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Parses a strict `YYYY-MM-DD` date into epoch nanoseconds.
pub fn parse(text: &str) -> Result<i64> {
    let bytes = text.as_bytes();
    let shape_ok = bytes.len() == 10
        && bytes[4] == b'-'
        && bytes[7] == b'-'
        && bytes
            .iter()
            .enumerate()
            .all(|(i, b)| i == 4 || i == 7 || b.is_ascii_digit());
    if !shape_ok {
        return Err(Error::InvalidDate(text.to_string()));
    }
    let date = NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .map_err(|_| Error::InvalidDate(text.to_string()))?;
    from_civil(date).ok_or_else(|| Error::InvalidDate(format!("{text} (outside the nanosecond range)")))
}

pub fn from_civil(date: NaiveDate) -> Option<i64> {
    let days = date.signed_duration_since(epoch()).num_days();
    days.checked_mul(NANOS_PER_DAY)
}

pub fn to_civil(nanos: i64) -> Option<NaiveDate> {
    let days = nanos.div_euclid(NANOS_PER_DAY);
    epoch().checked_add_signed(chrono::Duration::days(days))
}

/// Renders epoch nanoseconds as `YYYY-MM-DD` (time of day is dropped).
pub fn render(nanos: i64) -> String {
    match to_civil(nanos) {
        Some(d) => d.format("%Y-%m-%d").to_string(),
        None => format!("<invalid date {nanos}>"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_examples() {
        assert_eq!(parse("1970-01-01").unwrap(), 0);
        assert_eq!(parse("1970-01-02").unwrap(), 86_400_000_000_000);
        // 8766 days: 24 years of 365 days plus 6 leap days (72,76,80,84,88,92).
        assert_eq!(parse("1994-01-01").unwrap(), 757_382_400_000_000_000);
        assert_eq!(parse("1969-12-31").unwrap(), -NANOS_PER_DAY);
    }

    #[test]
    fn rejects_malformed_and_out_of_range() {
        for bad in ["1994-1-01", "1994/01/01", "1994-02-30", "", "99999-01-01", "1994-01-01T"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
        assert!(parse("1600-01-01").is_err());
        assert!(parse("2300-01-01").is_err());
        assert!(parse("1678-01-01").is_ok());
        assert!(parse("2261-12-31").is_ok());
    }

    #[test]
    fn render_round_trips() {
        for s in ["1970-01-01", "1992-02-29", "1998-12-01", "1700-03-01"] {
            assert_eq!(render(parse(s).unwrap()), s);
        }
    }
}

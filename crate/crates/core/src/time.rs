//! UTC timestamps and the clock abstraction used by the service layer.

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc};

pub type Timestamp = DateTime<Utc>;

/// Canonical ISO 8601 rendering used in every persisted and exported form.
pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Accepts RFC 3339 timestamps, naive `YYYY-MM-DDTHH:MM:SS` (taken as UTC)
/// and bare dates (midnight UTC).
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    let text = text.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Some(ts.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S") {
        return Some(Utc.from_utc_datetime(&naive));
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .map(|d| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight")))
}

pub fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").ok()
}

/// Midnight UTC of the given calendar day. Panics on an invalid date, so only
/// use it with literal values.
pub fn utc_day(year: i32, month: u32, day: u32) -> Timestamp {
    utc_at(year, month, day, 0, 0)
}

pub fn utc_at(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Timestamp {
    Utc.with_ymd_and_hms(year, month, day, hour, minute, 0)
        .single()
        .expect("valid literal timestamp")
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub Timestamp);

impl Clock for FixedClock {
    fn now(&self) -> Timestamp {
        self.0
    }
}

/// A clock moved explicitly, for scripted runs.
#[derive(Debug)]
pub struct ManualClock(std::sync::Mutex<Timestamp>);

impl ManualClock {
    pub fn new(at: Timestamp) -> Self {
        ManualClock(std::sync::Mutex::new(at))
    }

    pub fn set(&self, at: Timestamp) {
        *self.0.lock().unwrap_or_else(|e| e.into_inner()) = at;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        *self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_accepted_forms() {
        let expected = utc_at(2009, 10, 8, 9, 30);
        assert_eq!(parse_timestamp("2009-10-08T09:30:00Z"), Some(expected));
        assert_eq!(parse_timestamp("2009-10-08T11:30:00+02:00"), Some(expected));
        assert_eq!(parse_timestamp("2009-10-08T09:30:00"), Some(expected));
        assert_eq!(parse_timestamp("2009-10-08"), Some(utc_day(2009, 10, 8)));
        assert_eq!(parse_timestamp("8-ott-2009"), None);
    }

    #[test]
    fn formatting_is_utc_with_z_suffix() {
        assert_eq!(format_timestamp(&utc_day(2010, 5, 9)), "2010-05-09T00:00:00Z");
    }
}

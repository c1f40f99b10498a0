use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in time at one-minute resolution, counted in minutes since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const MIN: Timestamp = Timestamp(i64::MIN / 4);
    pub const MAX: Timestamp = Timestamp(i64::MAX / 4);

    pub fn minutes(self) -> i64 {
        self.0
    }

    /// Parses an ISO-8601 date-time. Offsets are honoured; naive times are read
    /// as UTC. Seconds are truncated to the enclosing minute.
    pub fn parse_iso(s: &str) -> Result<Self> {
        let s = s.trim();
        let secs = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            dt.timestamp()
        } else if let Some(dt) = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        {
            dt.and_utc().timestamp()
        } else if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp()
        } else {
            return Err(Error::parse(None, format!("`{s}` is not an ISO-8601 date-time")));
        };
        Ok(Timestamp(secs.div_euclid(60)))
    }

    pub fn to_iso(self) -> String {
        match DateTime::from_timestamp(self.0 * 60, 0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%MZ").to_string(),
            None => format!("{}min", self.0),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

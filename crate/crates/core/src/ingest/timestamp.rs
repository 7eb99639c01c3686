use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub const MINUTES_PER_HOUR: i64 = 60;

/// A point on the data time axis, stored as whole minutes since
/// 1970-01-01T00:00Z.
///
/// Hourly tables only ever hold on-the-hour stamps; SuperDARN series carry
/// sub-hour stamps until they are resampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

fn epoch_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
}

impl Timestamp {
    /// Panics if `minute` is negative.
    pub fn from_epoch_minute(minute: i64) -> Self {
        assert!(minute >= 0, "timestamp before 1970: {minute}");
        Timestamp(minute)
    }

    /// Panics if `hour` is negative.
    pub fn from_epoch_hour(hour: i64) -> Self {
        Self::from_epoch_minute(hour * MINUTES_PER_HOUR)
    }

    /// `day_of_year` is 1-based.
    pub fn from_calendar(year: i32, day_of_year: u32, hour: u32) -> Result<Self> {
        Self::from_calendar_minute(year, day_of_year, hour, 0)
    }

    pub fn from_calendar_minute(year: i32, day_of_year: u32, hour: u32, minute: u32) -> Result<Self> {
        if year < 1970 {
            return Err(Error::Config(format!("year {year} precedes 1970")));
        }
        let date = NaiveDate::from_yo_opt(year, day_of_year)
            .ok_or_else(|| Error::Config(format!("day of year {day_of_year} invalid for {year}")))?;
        if hour > 23 {
            return Err(Error::Config(format!("hour {hour} out of range 0-23")));
        }
        if minute > 59 {
            return Err(Error::Config(format!("minute {minute} out of range 0-59")));
        }
        let days = (date - epoch_date()).num_days();
        Ok(Timestamp(days * 24 * MINUTES_PER_HOUR + hour as i64 * MINUTES_PER_HOUR + minute as i64))
    }

    pub fn epoch_minute(self) -> i64 {
        self.0
    }

    /// Whole hours since the epoch, truncating any minutes.
    pub fn epoch_hour(self) -> i64 {
        self.0.div_euclid(MINUTES_PER_HOUR)
    }

    pub fn minute_of_hour(self) -> u32 {
        self.0.rem_euclid(MINUTES_PER_HOUR) as u32
    }

    pub fn is_on_hour(self) -> bool {
        self.minute_of_hour() == 0
    }

    /// The top of the hour containing this timestamp.
    pub fn floor_hour(self) -> Self {
        Timestamp(self.epoch_hour() * MINUTES_PER_HOUR)
    }

    pub fn add_hours(self, hours: i64) -> Self {
        Self::from_epoch_minute(self.0 + hours * MINUTES_PER_HOUR)
    }

    pub fn add_minutes(self, minutes: i64) -> Self {
        Self::from_epoch_minute(self.0 + minutes)
    }

    fn date(self) -> NaiveDate {
        epoch_date() + chrono::Days::new(self.0.div_euclid(24 * MINUTES_PER_HOUR) as u64)
    }

    /// `(year, day_of_year, hour_of_day)`, inverse of [`Timestamp::from_calendar`].
    pub fn calendar(self) -> (i32, u32, u32) {
        let d = self.date();
        let hour = (self.0.rem_euclid(24 * MINUTES_PER_HOUR) / MINUTES_PER_HOUR) as u32;
        (d.year(), d.ordinal(), hour)
    }

    pub fn year(self) -> i32 {
        self.calendar().0
    }

    pub fn day_of_year(self) -> u32 {
        self.calendar().1
    }

    pub fn hour_of_day(self) -> u32 {
        self.calendar().2
    }

    /// Hours since the epoch as a real number; integral for on-the-hour stamps.
    pub fn fractional_hour(self) -> f64 {
        self.0 as f64 / MINUTES_PER_HOUR as f64
    }

    /// Inverse of [`Timestamp::fractional_hour`], rounding to the nearest minute.
    pub fn from_fractional_hour(hour: f64) -> Result<Self> {
        let minute = (hour * MINUTES_PER_HOUR as f64).round();
        if !minute.is_finite() || minute < 0.0 || minute > i64::MAX as f64 {
            return Err(Error::Config(format!("invalid epoch hour {hour}")));
        }
        Ok(Timestamp(minute as i64))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, doy, h) = self.calendar();
        write!(f, "{y:04}-{doy:03}T{h:02}:{:02}", self.minute_of_hour())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_on_hour() {
            s.serialize_i64(self.epoch_hour())
        } else {
            s.serialize_f64(self.fractional_hour())
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let hour = f64::deserialize(d)?;
        Timestamp::from_fractional_hour(hour).map_err(serde::de::Error::custom)
    }
}

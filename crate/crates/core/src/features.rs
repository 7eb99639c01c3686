//! Calendar sinusoids and per-column standardization.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::ingest::{TimeTable, Timestamp};
use crate::{Error, Result};

/// Years in one period of the year signal (about one solar cycle).
pub const SOLAR_CYCLE_YEARS: i32 = 11;
/// Phase origin of the year signal.
pub const SOLAR_CYCLE_EPOCH: i32 = 2000;

pub const CALENDAR_COLUMNS: [&str; 6] = ["year_sin", "year_cos", "doy_sin", "doy_cos", "hour_sin", "hour_cos"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalendarSignals {
    pub year_sin: f64,
    pub year_cos: f64,
    pub doy_sin: f64,
    pub doy_cos: f64,
    pub hour_sin: f64,
    pub hour_cos: f64,
}

impl CalendarSignals {
    pub fn as_array(&self) -> [f64; 6] {
        [self.year_sin, self.year_cos, self.doy_sin, self.doy_cos, self.hour_sin, self.hour_cos]
    }
}

/// Sinusoids with periods of 11 years, 365 days and 24 hours.
///
/// Day-of-year uses a fixed 365-day period, so Dec 31 of a leap year runs
/// one day past a full turn.
pub fn calendar_signals(ts: Timestamp) -> CalendarSignals {
    let (year, doy, hour) = ts.calendar();
    let year_phase = TAU * (year - SOLAR_CYCLE_EPOCH).rem_euclid(SOLAR_CYCLE_YEARS) as f64 / SOLAR_CYCLE_YEARS as f64;
    let doy_phase = TAU * (doy - 1) as f64 / 365.0;
    let hour_phase = TAU * hour as f64 / 24.0;
    CalendarSignals {
        year_sin: year_phase.sin(),
        year_cos: year_phase.cos(),
        doy_sin: doy_phase.sin(),
        doy_cos: doy_phase.cos(),
        hour_sin: hour_phase.sin(),
        hour_cos: hour_phase.cos(),
    }
}

/// Appends the six [`CALENDAR_COLUMNS`] computed from each row's timestamp.
pub fn add_calendar_columns(t: &TimeTable) -> Result<TimeTable> {
    let mut out = t.clone();
    let signals: Vec<[f64; 6]> = t.timestamps().iter().map(|&ts| calendar_signals(ts).as_array()).collect();
    for (k, name) in CALENDAR_COLUMNS.iter().enumerate() {
        out.push_column(*name, signals.iter().map(|s| Some(s[k])).collect())?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Per-column mean and population standard deviation, fitted on the
/// training partition and reused unchanged on validation and test data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ColumnStats>,
    pub fitted_range: (Timestamp, Timestamp),
}

impl Scaler {
    pub fn stats(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scaler = serde_json::from_str(text)?;
        if let Some(c) = s.columns.iter().find(|c| c.std.is_nan() || c.std <= 0.0 || !c.mean.is_finite()) {
            return Err(Error::ZeroVariance(c.name.clone()));
        }
        Ok(s)
    }
}

/// Fits mean and population std (divide by N) of each column over the
/// non-missing cells whose timestamps fall in `range` (inclusive).
pub fn fit_scaler<S: AsRef<str>>(t: &TimeTable, columns: &[S], range: (Timestamp, Timestamp)) -> Result<Scaler> {
    let rows: Vec<usize> = (0..t.len())
        .filter(|&i| (range.0..=range.1).contains(&t.timestamps()[i]))
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty("scaler fit range"));
    }
    let stats = columns
        .iter()
        .map(|name| {
            let name = name.as_ref();
            let idx = t.column_index(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            let vals: Vec<f64> = rows.iter().filter_map(|&i| t.value(i, idx)).collect();
            if vals.len() < 2 {
                return Err(Error::InsufficientData { column: name.to_string(), count: vals.len() });
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std.is_nan() || std <= f64::EPSILON * mean.abs().max(1.0) {
                return Err(Error::ZeroVariance(name.to_string()));
            }
            Ok(ColumnStats { name: name.to_string(), mean, std })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scaler { columns: stats, fitted_range: range })
}

fn map_columns(t: &TimeTable, s: &Scaler, f: impl Fn(f64, &ColumnStats) -> f64) -> Result<TimeTable> {
    let mut out = t.clone();
    for stats in &s.columns {
        let idx = t.column_index(&stats.name).ok_or_else(|| Error::UnknownColumn(stats.name.clone()))?;
        for v in out.column_mut(idx).values.iter_mut().flatten() {
            *v = f(*v, stats);
        }
    }
    Ok(out)
}

/// `(x - mean) / std` on every scaler column; other columns pass through.
pub fn standardize(t: &TimeTable, s: &Scaler) -> Result<TimeTable> {
    map_columns(t, s, |v, c| (v - c.mean) / c.std)
}

/// Inverse of [`standardize`].
pub fn destandardize(t: &TimeTable, s: &Scaler) -> Result<TimeTable> {
    map_columns(t, s, |v, c| v * c.std + c.mean)
}

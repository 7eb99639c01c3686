use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{TimeTable, Timestamp};
use crate::{Error, Result};

/// Where to find one column in a whitespace-delimited line, and which raw
/// values mean "missing".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// 0-based index into the whitespace-separated fields of a line,
    /// counting the leading year/day/hour fields.
    pub position: usize,
    pub name: String,
    #[serde(default)]
    pub sentinels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMap(pub Vec<ColumnSpec>);

impl ColumnMap {
    pub fn new(specs: Vec<ColumnSpec>) -> Result<Self> {
        let map = ColumnMap(specs);
        map.validate()?;
        Ok(map)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: ColumnMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for spec in &self.0 {
            if !names.insert(spec.name.as_str()) {
                return Err(Error::DuplicateColumn(spec.name.clone()));
            }
            if spec.position < 3 {
                return Err(Error::Config(format!(
                    "column `{}` maps to position {}, which holds the timestamp",
                    spec.name, spec.position
                )));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(|s| s.name.clone()).collect()
    }

    /// Layout of the OMNI2 low-resolution hourly export (55 words per line).
    ///
    /// Kp is kept in the file's native tenths (e.g. 37 for 3+). IMF By/Bz
    /// are the GSM components.
    pub fn omni2() -> Self {
        let spec = |position: usize, name: &str, sentinel: f64| ColumnSpec {
            position,
            name: name.to_string(),
            sentinels: vec![sentinel],
        };
        ColumnMap(vec![
            spec(24, "v", 9999.0),
            spec(23, "n", 999.9),
            spec(12, "bx", 999.9),
            spec(15, "by", 999.9),
            spec(16, "bz", 999.9),
            spec(41, "ae", 9999.0),
            spec(53, "au", 99999.0),
            spec(52, "al", 99999.0),
            spec(40, "dst", 99999.0),
            spec(50, "f107", 999.9),
            spec(38, "kp", 99.0),
        ])
    }
}

fn is_sentinel(v: f64, sentinels: &[f64]) -> bool {
    sentinels.iter().any(|&s| (v - s).abs() <= 1e-9 * s.abs().max(1.0))
}

fn parse_int<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .parse::<T>()
        .map_err(|_| Error::Parse { line, msg: format!("bad {what} `{field}`") })
}

fn parse_value(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("bad numeric field `{field}`") })
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

/// Parses whitespace-delimited hourly lines led by `year day-of-year hour`.
///
/// Fields equal to one of their column's sentinels, or NaN, become missing.
/// Rows come out sorted; a repeated hour keeps its last line.
pub fn parse_columnar(text: &str, map: &ColumnMap) -> Result<TimeTable> {
    map.validate()?;
    let needed = map.0.iter().map(|s| s.position + 1).max().unwrap_or(3).max(3);
    let mut rows = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() < needed {
            return Err(Error::Parse { line, msg: format!("expected at least {needed} fields, found {}", fields.len()) });
        }
        let year: i32 = parse_int(fields[0], "year", line)?;
        let doy: u32 = parse_int(fields[1], "day of year", line)?;
        let hour: u32 = parse_int(fields[2], "hour", line)?;
        let ts = Timestamp::from_calendar(year, doy, hour).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let cells = map
            .0
            .iter()
            .map(|spec| {
                let v = parse_value(fields[spec.position], line)?;
                Ok((v.is_finite() && !is_sentinel(v, &spec.sentinels)).then_some(v))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((ts, cells));
    }
    TimeTable::from_rows(map.names(), rows)
}

/// Missing-value markers in SuperDARN-derived series.
pub const SUPERDARN_SENTINELS: [f64; 2] = [999.9, 9999.9];

/// Parses SuperDARN-derived lines `year day-of-year hour minute cpp pcr`
/// (CPP in kV, PCR in degrees colatitude) into a table with columns `cpp`
/// and `pcr` at the native cadence. `NA`, NaN and [`SUPERDARN_SENTINELS`]
/// mark missing values.
pub fn parse_superdarn(text: &str) -> Result<TimeTable> {
    let mut rows = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() != 6 {
            return Err(Error::Parse { line, msg: format!("expected 6 fields, found {}", fields.len()) });
        }
        let year: i32 = parse_int(fields[0], "year", line)?;
        let doy: u32 = parse_int(fields[1], "day of year", line)?;
        let hour: u32 = parse_int(fields[2], "hour", line)?;
        let minute: u32 = parse_int(fields[3], "minute", line)?;
        let ts = Timestamp::from_calendar_minute(year, doy, hour, minute)
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let cells = fields[4..]
            .iter()
            .map(|f| {
                if f.eq_ignore_ascii_case("na") {
                    return Ok(None);
                }
                let v = parse_value(f, line)?;
                Ok((v.is_finite() && !is_sentinel(v, &SUPERDARN_SENTINELS)).then_some(v))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((ts, cells));
    }
    TimeTable::from_rows(vec!["cpp".into(), "pcr".into()], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_col_map() -> ColumnMap {
        ColumnMap::new(vec![
            ColumnSpec { position: 3, name: "v".into(), sentinels: vec![9999.9] },
            ColumnSpec { position: 4, name: "n".into(), sentinels: vec![9999.9] },
        ])
        .unwrap()
    }

    #[test]
    fn sentinel_marks_missing() {
        let t = parse_columnar("2014 1 0 420.0 9999.9\n", &two_col_map()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.timestamps()[0], Timestamp::from_calendar(2014, 1, 0).unwrap());
        assert_eq!(t.column("v").unwrap(), &[Some(420.0)]);
        assert_eq!(t.column("n").unwrap(), &[None]);
    }

    #[test]
    fn empty_input() {
        let t = parse_columnar("", &two_col_map()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.column_names().collect::<Vec<_>>(), ["v", "n"]);
    }

    #[test]
    fn consecutive_lines_are_one_hour_apart() {
        let t = parse_columnar("2014 1 0 1 2\n2014 1 1 3 4\n", &two_col_map()).unwrap();
        let h: Vec<i64> = t.timestamps().iter().map(|t| t.epoch_hour()).collect();
        assert_eq!(h[1] - h[0], 1);
    }

    #[test]
    fn malformed_field_reports_line() {
        let err = parse_columnar("2014 1 0 1 2\n\n2014 1 1 x 4\n", &two_col_map()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_columnar("2014 1 0 1\n", &two_col_map()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_columnar("2014 400 0 1 2\n", &two_col_map()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn unsorted_and_duplicate_lines() {
        let t = parse_columnar("2014 1 2 5 5\n2014 1 0 1 1\n2014 1 2 6 6\n", &two_col_map()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.column("v").unwrap(), &[Some(1.0), Some(6.0)]);
    }

    #[test]
    fn column_map_json() {
        let map = ColumnMap::from_json(r#"[{"position": 3, "name": "v", "sentinels": [9999.9]}, {"position": 5, "name": "bz"}]"#)
            .unwrap();
        assert_eq!(map.0[1].sentinels, Vec::<f64>::new());
        assert!(ColumnMap::from_json(r#"[{"position": 3, "name": "v"}, {"position": 4, "name": "v"}]"#).is_err());
        assert!(ColumnMap::from_json(r#"[{"position": 1, "name": "v"}]"#).is_err());
    }

    #[test]
    fn omni2_layout_reads_a_record() {
        // One OMNI2 hourly record (2014 day 1 hour 0), trimmed of nothing.
        let line = "2014   1  0 2459 51 51  60  60   5.3   4.9  -23.8 270.9   0.1  -4.5  -1.9  -4.6  -1.6  1.2  1.3  1.1  1.5  1.3  71460.   3.9  372.  -1.3  -1.5 .026 1.07  23130.   0.8    5.   0.8   0.8 .004  0.60   0.52  9.4  13   92  -11   63 999999.99 99999.99 99999.99 99999.99 99999.99 99999.99  0   5 151.6  0.8  -46   21  6.1";
        let t = parse_columnar(line, &ColumnMap::omni2()).unwrap();
        let get = |c: &str| t.column(c).unwrap()[0];
        assert_eq!(get("v"), Some(372.0));
        assert_eq!(get("n"), Some(3.9));
        assert_eq!(get("bx"), Some(0.1));
        assert_eq!(get("by"), Some(-4.6));
        assert_eq!(get("bz"), Some(-1.6));
        assert_eq!(get("kp"), Some(13.0));
        assert_eq!(get("dst"), Some(-11.0));
        assert_eq!(get("ae"), Some(63.0));
        assert_eq!(get("f107"), Some(151.6));
        assert_eq!(get("al"), Some(-46.0));
        assert_eq!(get("au"), Some(21.0));
    }

    #[test]
    fn superdarn_rows() {
        let mut text = String::new();
        for k in (0..12).rev() {
            text.push_str(&format!("2014 10 3 {} {} 20.0\n", k * 5, 30 + k));
        }
        let t = parse_superdarn(&text).unwrap();
        assert_eq!(t.len(), 12);
        for w in t.timestamps().windows(2) {
            assert_eq!(w[1].epoch_minute() - w[0].epoch_minute(), 5);
        }
        assert_eq!(t.column("cpp").unwrap()[0], Some(30.0));

        let t = parse_superdarn("2014 10 3 0 9999.9 20.0\n2014 10 3 5 NA 21.0\n").unwrap();
        assert_eq!(t.column("cpp").unwrap(), &[None, None]);
        assert_eq!(t.column("pcr").unwrap(), &[Some(20.0), Some(21.0)]);
        assert!(parse_superdarn("2014 10 3 0 1.0\n").is_err());
    }
}

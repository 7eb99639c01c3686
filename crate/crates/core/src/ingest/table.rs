use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use super::Timestamp;
use crate::{Error, Result};

/// One named series; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Timestamp-indexed multivariate series with per-cell missing markers.
///
/// Timestamps are strictly increasing but need not be contiguous; every
/// column has one cell per timestamp.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeTable {
    timestamps: Vec<Timestamp>,
    columns: Vec<Column>,
}

impl TimeTable {
    pub fn new(timestamps: Vec<Timestamp>, columns: Vec<Column>) -> Result<Self> {
        if let Some(w) = timestamps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "timestamps not strictly increasing at {}",
                w[1]
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.values.len() != timestamps.len() {
                return Err(Error::Shape(format!(
                    "column `{}` has {} cells for {} timestamps",
                    c.name,
                    c.values.len(),
                    timestamps.len()
                )));
            }
        }
        Ok(TimeTable { timestamps, columns })
    }

    /// A table with the given columns and no rows.
    pub fn empty<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| Column { name: n.as_ref().to_string(), values: Vec::new() })
            .collect();
        Self::new(Vec::new(), columns)
    }

    /// Builds a table from unordered rows. Rows are sorted by timestamp; for
    /// duplicate timestamps the last row wins, with a warning when the
    /// duplicates disagree.
    pub fn from_rows(names: Vec<String>, rows: Vec<(Timestamp, Vec<Option<f64>>)>) -> Result<Self> {
        let width = names.len();
        let mut by_time: BTreeMap<Timestamp, Vec<Option<f64>>> = BTreeMap::new();
        for (ts, row) in rows {
            if row.len() != width {
                return Err(Error::Shape(format!("row at {ts} has {} cells, expected {width}", row.len())));
            }
            if let Some(prev) = by_time.insert(ts, row) {
                if !rows_equal(&prev, &by_time[&ts]) {
                    log::warn!("conflicting duplicate rows at {ts}; keeping the last one");
                }
            }
        }
        let mut columns: Vec<Column> = names
            .into_iter()
            .map(|name| Column { name, values: Vec::with_capacity(by_time.len()) })
            .collect();
        let mut timestamps = Vec::with_capacity(by_time.len());
        for (ts, row) in by_time {
            timestamps.push(ts);
            for (col, v) in columns.iter_mut().zip(row) {
                col.values.push(v);
            }
        }
        Self::new(timestamps, columns)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.column_index(name).map(|i| self.columns[i].values.as_slice())
    }

    pub(crate) fn column_mut(&mut self, idx: usize) -> &mut Column {
        &mut self.columns[idx]
    }

    pub fn value(&self, row: usize, column: usize) -> Option<f64> {
        self.columns[column].values[row]
    }

    pub fn is_missing(&self, row: usize, column: usize) -> bool {
        self.value(row, column).is_none()
    }

    /// Appends a column, failing on a name clash or a length mismatch.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        let name = name.into();
        if self.column_index(&name).is_some() {
            return Err(Error::DuplicateColumn(name));
        }
        if values.len() != self.len() {
            return Err(Error::Shape(format!(
                "column `{name}` has {} cells for {} timestamps",
                values.len(),
                self.len()
            )));
        }
        self.columns.push(Column { name, values });
        Ok(())
    }

    /// Rows `range` as a new table.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> TimeTable {
        TimeTable {
            timestamps: self.timestamps[range.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), values: c.values[range.clone()].to_vec() })
                .collect(),
        }
    }

    /// Keeps only the rows whose timestamp satisfies `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(Timestamp) -> bool) -> TimeTable {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(self.timestamps[i])).collect();
        TimeTable {
            timestamps: rows.iter().map(|&i| self.timestamps[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), values: rows.iter().map(|&i| c.values[i]).collect() })
                .collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<TimeTable> {
        let columns = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.column_index(n)
                    .map(|i| self.columns[i].clone())
                    .ok_or_else(|| Error::UnknownColumn(n.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        TimeTable::new(self.timestamps.clone(), columns)
    }

    /// Shifts every timestamp by `hours`.
    pub fn shift_hours(&self, hours: i64) -> TimeTable {
        TimeTable {
            timestamps: self.timestamps.iter().map(|t| t.add_hours(hours)).collect(),
            columns: self.columns.clone(),
        }
    }

    /// Writes the canonical CSV form: header `epoch_hour,<col>...`, `NA`
    /// for missing cells. Sub-hour timestamps are written as fractional hours.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["epoch_hour".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (i, ts) in self.timestamps.iter().enumerate() {
            record.clear();
            record.push(if ts.is_on_hour() {
                ts.epoch_hour().to_string()
            } else {
                ts.fractional_hour().to_string()
            });
            for c in &self.columns {
                record.push(match c.values[i] {
                    Some(v) => v.to_string(),
                    None => "NA".to_string(),
                });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<TimeTable> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("epoch_hour") {
            return Err(Error::Parse { line: 1, msg: "first column must be `epoch_hour`".into() });
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != names.len() + 1 {
                return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", names.len() + 1, rec.len()) });
            }
            let hour: f64 = rec[0]
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad epoch_hour `{}`", &rec[0]) })?;
            let ts = Timestamp::from_fractional_hour(hour).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let cells = rec
                .iter()
                .skip(1)
                .map(|f| match f {
                    "NA" | "" => Ok(None),
                    f => f
                        .parse::<f64>()
                        .map(|v| v.is_finite().then_some(v))
                        .map_err(|_| Error::Parse { line, msg: format!("bad value `{f}`") }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((ts, cells));
        }
        Self::from_rows(names, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TimeTable> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn rows_equal(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

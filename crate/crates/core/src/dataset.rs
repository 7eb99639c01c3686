//! Sliding history/lead windows and causal train/validation/test splits.
//!
//! For an anchor hour `t`, the input covers `[t - T_h, t]` (`T_h + 1`
//! rows) and the target covers `(t, t + T_p]` (`T_p` rows). Anchors whose
//! span is not a run of consecutive hours, or which touch a missing cell
//! in a needed column, are skipped.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::features::CALENDAR_COLUMNS;
use crate::ingest::{TimeTable, Timestamp, MINUTES_PER_HOUR};
use crate::{Error, Result, Scalar};

pub const SOLAR_WIND_COLUMNS: [&str; 5] = ["v", "n", "bx", "by", "bz"];
pub const INDEX_COLUMNS: [&str; 6] = ["ae", "au", "al", "dst", "f107", "kp"];
pub const SUPERDARN_COLUMNS: [&str; 2] = ["cpp", "pcr"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturePreset {
    /// Solar wind, historical indices and calendar signals.
    Base,
    /// Solar wind, SuperDARN CPP/PCR and calendar signals.
    Sdrn,
    /// Solar wind and calendar signals only.
    Sw,
    Custom,
}

impl std::str::FromStr for FeaturePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(FeaturePreset::Base),
            "sdrn" => Ok(FeaturePreset::Sdrn),
            "sw" => Ok(FeaturePreset::Sw),
            "custom" => Ok(FeaturePreset::Custom),
            _ => Err(Error::Config(format!("unknown feature set `{s}` (base, sdrn, sw, custom)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub input_columns: Vec<String>,
    pub target_columns: Vec<String>,
    pub preset: FeaturePreset,
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl FeatureSpec {
    pub fn preset(preset: FeaturePreset) -> Result<Self> {
        let mut inputs = owned(&SOLAR_WIND_COLUMNS);
        match preset {
            FeaturePreset::Base => inputs.extend(owned(&INDEX_COLUMNS)),
            FeaturePreset::Sdrn => inputs.extend(owned(&SUPERDARN_COLUMNS)),
            FeaturePreset::Sw => {}
            FeaturePreset::Custom => {
                return Err(Error::Config("custom feature set needs explicit column lists".into()));
            }
        }
        inputs.extend(owned(&CALENDAR_COLUMNS));
        Ok(FeatureSpec { input_columns: inputs, target_columns: owned(&INDEX_COLUMNS), preset })
    }

    pub fn base() -> Self {
        Self::preset(FeaturePreset::Base).unwrap()
    }

    pub fn custom(input_columns: Vec<String>, target_columns: Vec<String>) -> Result<Self> {
        let spec = FeatureSpec { input_columns, target_columns, preset: FeaturePreset::Custom };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_columns.is_empty() || self.target_columns.is_empty() {
            return Err(Error::Config("input and target column lists must be non-empty".into()));
        }
        for list in [&self.input_columns, &self.target_columns] {
            for (i, c) in list.iter().enumerate() {
                if list[..i].contains(c) {
                    return Err(Error::DuplicateColumn(c.clone()));
                }
            }
        }
        Ok(())
    }

    /// True if any input column is a calendar signal.
    pub fn uses_calendar(&self) -> bool {
        self.input_columns.iter().any(|c| CALENDAR_COLUMNS.contains(&c.as_str()))
    }

    /// Columns that get standardized: every input and target except the
    /// calendar signals, which are already bounded.
    pub fn scaled_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in self.input_columns.iter().chain(&self.target_columns) {
            if !CALENDAR_COLUMNS.contains(&c.as_str()) && !out.contains(c) {
                out.push(c.clone());
            }
        }
        out
    }
}

/// `history` is `T_h`, the number of past samples before the anchor;
/// `lead` is `T_p`, the number of future samples predicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub history: usize,
    pub lead: usize,
}

impl WindowConfig {
    pub fn new(history: usize, lead: usize) -> Result<Self> {
        if lead < 1 {
            return Err(Error::Config("lead must be at least 1".into()));
        }
        Ok(WindowConfig { history, lead })
    }

    /// Rows in one input window.
    pub fn input_len(&self) -> usize {
        self.history + 1
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { history: 6, lead: 6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let s = SplitSpec { train, val, test };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("split fractions {f:?} must lie in (0, 1) and sum to 1")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.6, val: 0.1, test: 0.3 }
    }
}

/// Splits rows by position into contiguous train, validation and test
/// blocks. Validation and test get `round(N * f)` rows; train takes the rest.
pub fn sequential_split(t: &TimeTable, s: &SplitSpec) -> Result<(TimeTable, TimeTable, TimeTable)> {
    s.validate()?;
    let n = t.len();
    if n == 0 {
        return Err(Error::Empty("table"));
    }
    let n_val = (n as f64 * s.val).round() as usize;
    let n_test = (n as f64 * s.test).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    for (size, name) in [(n_train, "train"), (n_val, "validation"), (n_test, "test")] {
        if size == 0 {
            return Err(Error::Config(format!("{name} block is empty for {n} rows")));
        }
    }
    Ok((
        t.slice_rows(0..n_train),
        t.slice_rows(n_train..n_train + n_val),
        t.slice_rows(n_train + n_val..n),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowItem<T> {
    pub anchor: Timestamp,
    /// `(T_h + 1) x D_in`, oldest row first.
    pub input: Array2<T>,
    /// `T_p x K`, horizon 1 first.
    pub target: Array2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet<T> {
    pub input_columns: Vec<String>,
    pub target_columns: Vec<String>,
    pub config: WindowConfig,
    pub items: Vec<WindowItem<T>>,
}

impl<T: Scalar> WindowSet<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_columns.len()
    }

    pub fn output_dim(&self) -> usize {
        self.target_columns.len()
    }

    pub fn anchors(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.items.iter().map(|i| i.anchor)
    }

    pub fn cast<U: Scalar>(&self) -> WindowSet<U> {
        let conv = |a: &Array2<T>| a.mapv(|v| U::from_f64_lossy(v.to_f64_lossy()));
        WindowSet {
            input_columns: self.input_columns.clone(),
            target_columns: self.target_columns.clone(),
            config: self.config,
            items: self
                .items
                .iter()
                .map(|i| WindowItem { anchor: i.anchor, input: conv(&i.input), target: conv(&i.target) })
                .collect(),
        }
    }

    /// Flat debugging export: anchor hour, then the input matrix row by row,
    /// then the target matrix row by row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["anchor".to_string()];
        for lag in (0..=self.config.history).rev() {
            header.extend(self.input_columns.iter().map(|c| format!("{c}_t-{lag}")));
        }
        for h in 1..=self.config.lead {
            header.extend(self.target_columns.iter().map(|c| format!("{c}_t+{h}")));
        }
        w.write_record(&header)?;
        for item in &self.items {
            let mut rec = vec![item.anchor.epoch_hour().to_string()];
            rec.extend(item.input.iter().chain(item.target.iter()).map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn column_indices(t: &TimeTable, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| t.column_index(n).ok_or_else(|| Error::UnknownColumn(n.clone())))
        .collect()
}

/// Running count of rows satisfying `bad`, with a leading zero.
fn prefix_count(n: usize, bad: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0);
    for i in 0..n {
        out.push(out[i] + bad(i) as usize);
    }
    out
}

/// Slides the window over every row of `t` one hour at a time.
pub fn assemble_windows<T: Scalar>(t: &TimeTable, f: &FeatureSpec, w: &WindowConfig) -> Result<WindowSet<T>> {
    f.validate()?;
    let inputs = column_indices(t, &f.input_columns)?;
    let targets = column_indices(t, &f.target_columns)?;
    let (th, tp) = (w.history, w.lead);
    let n = t.len();
    let ts = t.timestamps();

    // breaks[i + 1] - breaks[j + 1]: hour gaps between rows j..=i.
    let breaks = prefix_count(n, |i| i > 0 && ts[i].epoch_minute() - ts[i - 1].epoch_minute() != MINUTES_PER_HOUR);
    let bad_input = prefix_count(n, |i| inputs.iter().any(|&c| t.is_missing(i, c)));
    let bad_target = prefix_count(n, |i| targets.iter().any(|&c| t.is_missing(i, c)));

    let mut items = Vec::new();
    if n > th + tp {
        for a in th..n - tp {
            let (first, last) = (a - th, a + tp);
            if breaks[last + 1] - breaks[first + 1] != 0
                || bad_input[a + 1] - bad_input[first] != 0
                || bad_target[last + 1] - bad_target[a + 1] != 0
            {
                continue;
            }
            let input = Array2::from_shape_fn((th + 1, inputs.len()), |(r, c)| {
                T::from_f64_lossy(t.value(first + r, inputs[c]).unwrap())
            });
            let target = Array2::from_shape_fn((tp, targets.len()), |(r, c)| {
                T::from_f64_lossy(t.value(a + 1 + r, targets[c]).unwrap())
            });
            items.push(WindowItem { anchor: ts[a], input, target });
        }
    }
    Ok(WindowSet {
        input_columns: f.input_columns.clone(),
        target_columns: f.target_columns.clone(),
        config: *w,
        items,
    })
}

/// Splits first, then windows each partition independently, so no window
/// straddles a partition boundary.
pub fn split_then_window<T: Scalar>(
    t: &TimeTable,
    f: &FeatureSpec,
    w: &WindowConfig,
    s: &SplitSpec,
) -> Result<[WindowSet<T>; 3]> {
    let (train, val, test) = sequential_split(t, s)?;
    window_partitions([&train, &val, &test], f, w)
}

pub(crate) fn window_partitions<T: Scalar>(
    parts: [&TimeTable; 3],
    f: &FeatureSpec,
    w: &WindowConfig,
) -> Result<[WindowSet<T>; 3]> {
    let names = ["train", "validation", "test"];
    let mut out = Vec::with_capacity(3);
    for (part, name) in parts.into_iter().zip(names) {
        let set = assemble_windows(part, f, w)?;
        if set.is_empty() {
            return Err(Error::NoWindows { partition: name, rows: part.len() });
        }
        out.push(set);
    }
    Ok(out.try_into().map_err(|_| ()).unwrap())
}

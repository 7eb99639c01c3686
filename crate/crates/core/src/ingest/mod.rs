//! Reading hourly OMNI-style exports and SuperDARN-derived series into
//! [`TimeTable`]s.

mod parse;
mod resample;
mod table;
mod timestamp;

pub use parse::{parse_columnar, parse_superdarn, ColumnMap, ColumnSpec, SUPERDARN_SENTINELS};
pub use resample::{align, infer_cadence_minutes, resample_hourly, resample_hourly_with_cadence};
pub use table::{Column, TimeTable};
pub use timestamp::{Timestamp, MINUTES_PER_HOUR};

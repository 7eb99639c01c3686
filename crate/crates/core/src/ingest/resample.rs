use std::collections::HashSet;

use super::timestamp::MINUTES_PER_HOUR;
use super::{table::Column, TimeTable, Timestamp};
use crate::{Error, Result};

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

/// Sampling interval in minutes: the gcd of all consecutive gaps and one
/// hour, so it always divides 60.
pub fn infer_cadence_minutes(t: &TimeTable) -> i64 {
    t.timestamps()
        .windows(2)
        .map(|w| w[1].epoch_minute() - w[0].epoch_minute())
        .chain(t.timestamps().iter().map(|ts| ts.minute_of_hour() as i64))
        .fold(MINUTES_PER_HOUR, gcd)
}

/// Averages sub-hourly samples into hourly rows over `[H:00, H+1:00)`.
///
/// A cell is kept only when at least half of the samples expected at the
/// inferred cadence are present in that hour; hours with no samples at all
/// produce no row.
pub fn resample_hourly(t: &TimeTable) -> TimeTable {
    resample_hourly_with_cadence(t, infer_cadence_minutes(t))
}

pub fn resample_hourly_with_cadence(t: &TimeTable, cadence_minutes: i64) -> TimeTable {
    assert!(
        cadence_minutes > 0 && MINUTES_PER_HOUR % cadence_minutes == 0,
        "cadence {cadence_minutes} min does not divide one hour"
    );
    let expected = (MINUTES_PER_HOUR / cadence_minutes) as usize;
    let mut hours = Vec::new();
    let mut cols: Vec<Column> =
        t.columns().iter().map(|c| Column { name: c.name.clone(), values: Vec::new() }).collect();

    let ts = t.timestamps();
    let mut start = 0;
    while start < ts.len() {
        let hour = ts[start].floor_hour();
        let end = start + ts[start..].iter().take_while(|s| s.floor_hour() == hour).count();
        hours.push(hour);
        for (out, src) in cols.iter_mut().zip(t.columns()) {
            let present: Vec<f64> = src.values[start..end].iter().flatten().copied().collect();
            out.values.push(hour_mean(&present, expected));
        }
        start = end;
    }
    TimeTable::new(hours, cols).expect("hour bins are increasing")
}

fn hour_mean(samples: &[f64], expected: usize) -> Option<f64> {
    if samples.is_empty() || 2 * samples.len() < expected {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Some(mean.clamp(lo, hi))
}

/// Inner-joins tables on timestamp: the output keeps only timestamps present
/// in every input and concatenates their columns in input order.
pub fn align(tables: &[TimeTable]) -> Result<TimeTable> {
    let Some(first) = tables.first() else {
        return Err(Error::Empty("table list"));
    };
    let mut names = HashSet::new();
    for name in tables.iter().flat_map(|t| t.column_names()) {
        if !names.insert(name) {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
    }
    let mut common: HashSet<Timestamp> = first.timestamps().iter().copied().collect();
    for t in &tables[1..] {
        let other: HashSet<Timestamp> = t.timestamps().iter().copied().collect();
        common.retain(|ts| other.contains(ts));
    }
    let mut out = first.filter_rows(|ts| common.contains(&ts));
    for t in &tables[1..] {
        for c in t.filter_rows(|ts| common.contains(&ts)).columns() {
            out.push_column(c.name.clone(), c.values.clone())?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five_minute(hour: i64, values: &[Option<f64>]) -> TimeTable {
        let ts = (0..values.len()).map(|k| Timestamp::from_epoch_minute(hour * 60 + 5 * k as i64)).collect();
        TimeTable::new(ts, vec![Column { name: "cpp".into(), values: values.to_vec() }]).unwrap()
    }

    fn hourly(hours: &[i64], name: &str) -> TimeTable {
        TimeTable::new(
            hours.iter().map(|&h| Timestamp::from_epoch_hour(h)).collect(),
            vec![Column { name: name.into(), values: hours.iter().map(|&h| Some(h as f64)).collect() }],
        )
        .unwrap()
    }

    #[test]
    fn mean_of_one_through_twelve() {
        let vals: Vec<_> = (1..=12).map(|v| Some(v as f64)).collect();
        let r = resample_hourly(&five_minute(100, &vals));
        assert_eq!(r.len(), 1);
        assert_eq!(r.timestamps()[0], Timestamp::from_epoch_hour(100));
        assert_eq!(r.column("cpp").unwrap(), &[Some(6.5)]);
    }

    #[test]
    fn constant_hour() {
        let r = resample_hourly(&five_minute(7, &[Some(40.0); 12]));
        assert_eq!(r.column("cpp").unwrap(), &[Some(40.0)]);
    }

    #[test]
    fn coverage_threshold() {
        let mut vals = vec![None; 12];
        for v in vals.iter_mut().take(5) {
            *v = Some(1.0);
        }
        assert_eq!(resample_hourly(&five_minute(7, &vals)).column("cpp").unwrap(), &[None]);
        vals[5] = Some(1.0);
        assert_eq!(resample_hourly(&five_minute(7, &vals)).column("cpp").unwrap(), &[Some(1.0)]);
    }

    #[test]
    fn sparse_rows_still_use_five_minute_cadence() {
        // Only 3 of 12 slots present, but the cadence is recoverable from the gaps.
        let ts = [0, 5, 10].map(|m| Timestamp::from_epoch_minute(600 + m)).to_vec();
        let t = TimeTable::new(ts, vec![Column { name: "cpp".into(), values: vec![Some(1.0); 3] }]).unwrap();
        assert_eq!(infer_cadence_minutes(&t), 5);
        assert_eq!(resample_hourly(&t).column("cpp").unwrap(), &[None]);
    }

    #[test]
    fn empty_hours_are_omitted() {
        let mut t = five_minute(0, &[Some(1.0); 12]);
        let later = five_minute(3, &[Some(2.0); 12]);
        t = TimeTable::from_rows(
            vec!["cpp".into()],
            t.timestamps()
                .iter()
                .chain(later.timestamps())
                .zip(t.column("cpp").unwrap().iter().chain(later.column("cpp").unwrap()))
                .map(|(&ts, &v)| (ts, vec![v]))
                .collect(),
        )
        .unwrap();
        let r = resample_hourly(&t);
        assert_eq!(r.timestamps(), &[Timestamp::from_epoch_hour(0), Timestamp::from_epoch_hour(3)]);
    }

    #[test]
    fn align_intersects() {
        let a = hourly(&[1, 2, 3], "a");
        let b = hourly(&[2, 3, 4], "b");
        let out = align(&[a.clone(), b]).unwrap();
        assert_eq!(out.timestamps(), &[Timestamp::from_epoch_hour(2), Timestamp::from_epoch_hour(3)]);
        assert_eq!(out.column_names().collect::<Vec<_>>(), ["a", "b"]);

        let c = hourly(&[1, 2, 3], "c");
        let out = align(&[a.clone(), c]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.columns().len(), 2);

        let empty = TimeTable::empty(&["e"]).unwrap();
        assert!(align(&[a.clone(), empty]).unwrap().is_empty());

        assert!(matches!(align(&[a.clone(), a]), Err(Error::DuplicateColumn(_))));
    }

    fn arb_table(name: &'static str) -> impl Strategy<Value = TimeTable> {
        proptest::collection::btree_map(0i64..60, proptest::option::weighted(0.8, -50.0f64..50.0), 0..40).prop_map(
            move |rows| {
                TimeTable::from_rows(
                    vec![name.into()],
                    rows.into_iter().map(|(h, v)| (Timestamp::from_epoch_hour(h), vec![v])).collect(),
                )
                .unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn align_commutes_and_restricts(a in arb_table("a"), b in arb_table("b")) {
            let ab = align(&[a.clone(), b.clone()]).unwrap();
            let ba = align(&[b.clone(), a.clone()]).unwrap();
            prop_assert_eq!(ab.timestamps(), ba.timestamps());

            let keep: HashSet<_> = b.timestamps().iter().copied().collect();
            let restricted = a.filter_rows(|t| keep.contains(&t));
            let renamed = TimeTable::new(restricted.timestamps().to_vec(), vec![Column { name: "a2".into(), values: restricted.column("a").unwrap().to_vec() }]).unwrap();
            let out = align(&[a.clone(), renamed]).unwrap();
            prop_assert_eq!(out.timestamps(), restricted.timestamps());
            // Missing cells never become present.
            prop_assert_eq!(out.column("a").unwrap(), restricted.column("a").unwrap());
        }

        #[test]
        fn resample_bounds(
            samples in proptest::collection::btree_map(0i64..(12 * 30), proptest::option::weighted(0.7, -100.0f64..100.0), 1..200)
        ) {
            let t = TimeTable::from_rows(
                vec!["x".into()],
                samples.iter().map(|(&k, &v)| (Timestamp::from_epoch_minute(6000 + 5 * k), vec![v])).collect(),
            ).unwrap();
            let r = resample_hourly_with_cadence(&t, 5);
            let span_min = t.timestamps().last().unwrap().epoch_minute() - t.timestamps()[0].epoch_minute();
            prop_assert!(r.len() as i64 <= (span_min + 59) / 60 + 1);
            for (i, hour) in r.timestamps().iter().enumerate() {
                let inputs: Vec<f64> = samples.iter()
                    .filter(|(k, _)| Timestamp::from_epoch_minute(6000 + 5 * **k).floor_hour() == *hour)
                    .filter_map(|(_, v)| *v)
                    .collect();
                match r.column("x").unwrap()[i] {
                    Some(m) => {
                        prop_assert!(2 * inputs.len() >= 12);
                        let lo = inputs.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = inputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(lo <= m && m <= hi);
                    }
                    None => prop_assert!(2 * inputs.len() < 12),
                }
            }
        }
    }
}

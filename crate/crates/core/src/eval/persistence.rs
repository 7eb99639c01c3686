use ndarray::Array2;

use crate::dataset::WindowItem;
use crate::{Error, Result, Scalar};

/// Positions of each target column among the input columns.
pub fn persistence_columns(input_columns: &[String], target_columns: &[String]) -> Result<Vec<usize>> {
    target_columns
        .iter()
        .map(|t| input_columns.iter().position(|c| c == t).ok_or_else(|| Error::NoPersistence(t.clone())))
        .collect()
}

/// Repeats the anchor-time value of every target for all `lead` horizons.
pub fn persistence_forecast<T: Scalar>(
    item: &WindowItem<T>,
    input_columns: &[String],
    target_columns: &[String],
    lead: usize,
) -> Result<Array2<T>> {
    let cols = persistence_columns(input_columns, target_columns)?;
    let last = item.input.row(item.input.nrows() - 1);
    Ok(Array2::from_shape_fn((lead, cols.len()), |(_, k)| last[cols[k]]))
}

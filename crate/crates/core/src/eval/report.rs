use std::io::Write;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{pearson, persistence_columns, r_squared};
use crate::dataset::WindowSet;
use crate::features::Scaler;
use crate::ingest::Timestamp;
use crate::nn::{predict_items, LstmParams};
use crate::{Error, Result, Scalar};

/// Metrics for one target at one horizon. A metric is `None` when it is
/// undefined (a constant series) or, for persistence, when the inputs do
/// not carry the historical target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub model_pearson: Option<f64>,
    pub persistence_pearson: Option<f64>,
    pub model_r2: Option<f64>,
    pub persistence_r2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub name: String,
    pub horizons: Vec<HorizonMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_points: usize,
    pub indices: Vec<IndexReport>,
}

impl EvalReport {
    pub fn index(&self, name: &str) -> Option<&IndexReport> {
        self.indices.iter().find(|i| i.name == name)
    }

    /// Metrics for `name` at 1-based `horizon`.
    pub fn get(&self, name: &str, horizon: usize) -> Option<&HorizonMetrics> {
        self.index(name)?.horizons.get(horizon.checked_sub(1)?)
    }

    /// Pearson table: one row per horizon, a `<index>_mnet`/`<index>_pers`
    /// column pair per target.
    pub fn write_pearson_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.3}"));
        let mut header = vec!["hrs".to_string()];
        for idx in &self.indices {
            header.push(format!("{}_mnet", idx.name));
            header.push(format!("{}_pers", idx.name));
        }
        writeln!(w, "{}", header.join(","))?;
        let lead = self.indices.first().map_or(0, |i| i.horizons.len());
        for h in 0..lead {
            let mut row = vec![(h + 1).to_string()];
            for idx in &self.indices {
                row.push(fmt(idx.horizons[h].model_pearson));
                row.push(fmt(idx.horizons[h].persistence_pearson));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Every metric in long form: `index,horizon,metric,model,persistence`.
    pub fn write_long_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| v.to_string());
        writeln!(w, "index,horizon,metric,model,persistence")?;
        for idx in &self.indices {
            for m in &idx.horizons {
                writeln!(w, "{},{},pearson,{},{}", idx.name, m.horizon, fmt(m.model_pearson), fmt(m.persistence_pearson))?;
                writeln!(w, "{},{},r2,{},{}", idx.name, m.horizon, fmt(m.model_r2), fmt(m.persistence_r2))?;
            }
        }
        Ok(())
    }
}

fn defined<T: Scalar>(r: Result<T>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v.to_f64_lossy())),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores forecasts already in physical units. All matrices are
/// `N x (T_p * K)` with column `h * K + k`.
pub fn report_from_forecasts<T: Scalar>(
    target_columns: &[String],
    lead: usize,
    model: &Array2<T>,
    actual: &Array2<T>,
    persistence: Option<&Array2<T>>,
) -> Result<EvalReport> {
    let k = target_columns.len();
    if model.dim() != actual.dim() || model.ncols() != lead * k || persistence.is_some_and(|p| p.dim() != actual.dim()) {
        return Err(Error::Shape(format!("forecast {:?} vs actual {:?}", model.dim(), actual.dim())));
    }
    if actual.nrows() == 0 {
        return Err(Error::Empty("test set"));
    }
    let col = |m: &Array2<T>, c: usize| m.index_axis(Axis(1), c).to_vec();
    let mut indices = Vec::with_capacity(k);
    for (j, name) in target_columns.iter().enumerate() {
        let mut horizons = Vec::with_capacity(lead);
        for h in 0..lead {
            let c = h * k + j;
            let (y, p) = (col(actual, c), col(model, c));
            let pers = persistence.map(|m| col(m, c));
            horizons.push(HorizonMetrics {
                horizon: h + 1,
                model_pearson: defined(pearson(&p, &y))?,
                model_r2: defined(r_squared(&p, &y))?,
                persistence_pearson: match &pers {
                    Some(q) => defined(pearson(q, &y))?,
                    None => None,
                },
                persistence_r2: match &pers {
                    Some(q) => defined(r_squared(q, &y))?,
                    None => None,
                },
            });
        }
        indices.push(IndexReport { name: name.clone(), horizons });
    }
    Ok(EvalReport { n_points: actual.nrows(), indices })
}

fn unscale_columns<T: Scalar>(m: &mut Array2<T>, stats: &[(f64, f64)]) {
    let k = stats.len();
    for (c, mut column) in m.axis_iter_mut(Axis(1)).enumerate() {
        let (mean, std) = stats[c % k];
        let (mean, std) = (T::from_f64_lossy(mean), T::from_f64_lossy(std));
        column.mapv_inplace(|v| v * std + mean);
    }
}

/// Model, observed and (when available) persistence forecasts for a
/// window set, destandardized to physical units.
pub struct Forecasts<T> {
    pub anchors: Vec<Timestamp>,
    pub model: Array2<T>,
    pub actual: Array2<T>,
    pub persistence: Option<Array2<T>>,
}

pub fn forecasts<T: Scalar>(model: &LstmParams<T>, set: &WindowSet<T>, scaler: &Scaler) -> Result<Forecasts<T>> {
    if set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let d = model.dims;
    if set.input_dim() != d.input || set.output_dim() != d.outputs || set.config.lead != d.lead {
        return Err(Error::Shape(format!("window set does not fit model {d:?}")));
    }
    let stats: Vec<(f64, f64)> = set
        .target_columns
        .iter()
        .map(|c| scaler.stats(c).map_or((0.0, 1.0), |s| (s.mean, s.std)))
        .collect();
    let n = set.len();
    let width = d.head_out();

    let mut pred = predict_items(&set.items, model)?;
    let mut actual = Array2::zeros((n, width));
    for (mut row, item) in actual.rows_mut().into_iter().zip(&set.items) {
        row.iter_mut().zip(item.target.iter()).for_each(|(dst, &v)| *dst = v);
    }
    let mut persistence = match persistence_columns(&set.input_columns, &set.target_columns) {
        Ok(cols) => {
            let mut p = Array2::zeros((n, width));
            for (mut row, item) in p.rows_mut().into_iter().zip(&set.items) {
                let last = item.input.row(item.input.nrows() - 1);
                for (c, v) in row.iter_mut().enumerate() {
                    *v = last[cols[c % cols.len()]];
                }
            }
            Some(p)
        }
        Err(Error::NoPersistence(_)) => None,
        Err(e) => return Err(e),
    };
    unscale_columns(&mut pred, &stats);
    unscale_columns(&mut actual, &stats);
    if let Some(p) = persistence.as_mut() {
        unscale_columns(p, &stats);
    }
    Ok(Forecasts { anchors: set.anchors().collect(), model: pred, actual, persistence })
}

/// Pearson and R² per target and horizon for the model and for
/// persistence, computed in physical units over every window in `test`.
pub fn evaluate<T: Scalar>(model: &LstmParams<T>, test: &WindowSet<T>, scaler: &Scaler) -> Result<EvalReport> {
    let f = forecasts(model, test, scaler)?;
    report_from_forecasts(&test.target_columns, test.config.lead, &f.model, &f.actual, f.persistence.as_ref())
}

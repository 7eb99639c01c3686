//! End-to-end glue: table to standardized window sets, and a saved model
//! bundle that carries everything needed to forecast again.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{sequential_split, window_partitions, FeatureSpec, SplitSpec, WindowConfig, WindowSet};
use crate::features::{add_calendar_columns, fit_scaler, standardize, Scaler, CALENDAR_COLUMNS};
use crate::ingest::{TimeTable, Timestamp, MINUTES_PER_HOUR};
use crate::nn::{forward, load_params, save_params, LstmParams};
use crate::search::HyperParams;
use crate::{Error, Result, Scalar};

/// Features, window shape and split of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub features: FeatureSpec,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub split: SplitSpec,
}

impl ExperimentConfig {
    pub fn new(features: FeatureSpec) -> Self {
        ExperimentConfig { features, window: WindowConfig::default(), split: SplitSpec::default() }
    }
}

/// Standardized train/validation/test windows plus the scaler fitted on
/// the training rows.
pub struct Prepared<T> {
    pub scaler: Scaler,
    pub train: WindowSet<T>,
    pub val: WindowSet<T>,
    pub test: WindowSet<T>,
}

/// Adds the calendar columns when the features use them and the table
/// does not have them yet.
pub fn with_calendar(t: &TimeTable, f: &FeatureSpec) -> Result<TimeTable> {
    if f.uses_calendar() && CALENDAR_COLUMNS.iter().any(|c| t.column_index(c).is_none()) {
        add_calendar_columns(t)
    } else {
        Ok(t.clone())
    }
}

pub fn prepare<T: Scalar>(t: &TimeTable, cfg: &ExperimentConfig) -> Result<Prepared<T>> {
    cfg.features.validate()?;
    let t = with_calendar(t, &cfg.features)?;
    let (train, val, test) = sequential_split(&t, &cfg.split)?;
    let ts = train.timestamps();
    let scaler = fit_scaler(&train, &cfg.features.scaled_columns(), (ts[0], ts[ts.len() - 1]))?;
    let parts = [standardize(&train, &scaler)?, standardize(&val, &scaler)?, standardize(&test, &scaler)?];
    let [train, val, test] = window_partitions([&parts[0], &parts[1], &parts[2]], &cfg.features, &cfg.window)?;
    Ok(Prepared { scaler, train, val, test })
}

/// Everything saved alongside the parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentConfig,
    pub scaler: Scaler,
    pub hyperparams: HyperParams,
    pub best_val_loss: f64,
}

pub struct ModelBundle {
    pub params: LstmParams<f64>,
    pub manifest: Manifest,
}

pub const PARAMS_FILE: &str = "model.bin";
pub const MANIFEST_FILE: &str = "model.json";

impl ModelBundle {
    pub fn params_path(dir: &Path) -> PathBuf {
        dir.join(PARAMS_FILE)
    }

    /// Writes `model.bin`, its sidecar and `model.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_params(&self.params, self.manifest.hyperparams.seed, &Self::params_path(dir))?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let params: LstmParams<f64> = load_params(&Self::params_path(dir))?;
        let f = &manifest.experiment.features;
        if params.dims.input != f.input_columns.len()
            || params.dims.outputs != f.target_columns.len()
            || params.dims.lead != manifest.experiment.window.lead
        {
            return Err(Error::ModelFormat(format!("parameters {:?} do not match the manifest", params.dims)));
        }
        Ok(ModelBundle { params, manifest })
    }

    /// Standardized windows of `t` under the bundle's scaler and features.
    pub fn windows(&self, t: &TimeTable) -> Result<WindowSet<f64>> {
        let f = &self.manifest.experiment.features;
        let t = standardize(&with_calendar(t, f)?, &self.manifest.scaler)?;
        crate::dataset::assemble_windows(&t, f, &self.manifest.experiment.window)
    }

    /// Forecast from the last row of `t`: returns the anchor and a
    /// `T_p x K` matrix in physical units.
    pub fn predict_latest(&self, t: &TimeTable) -> Result<(Timestamp, Array2<f64>)> {
        let exp = &self.manifest.experiment;
        let t = standardize(&with_calendar(t, &exp.features)?, &self.manifest.scaler)?;
        let rows = exp.window.input_len();
        if t.len() < rows {
            return Err(Error::InsufficientData { column: "history".into(), count: t.len() });
        }
        let first = t.len() - rows;
        let ts = &t.timestamps()[first..];
        if ts.windows(2).any(|w| w[1].epoch_minute() - w[0].epoch_minute() != MINUTES_PER_HOUR) {
            return Err(Error::Config(format!("the last {rows} rows are not consecutive hours")));
        }
        let cols = exp
            .features
            .input_columns
            .iter()
            .map(|c| t.column_index(c).ok_or_else(|| Error::UnknownColumn(c.clone())))
            .collect::<Result<Vec<_>>>()?;
        let mut input = Array2::zeros((rows, cols.len()));
        for r in 0..rows {
            for (k, &c) in cols.iter().enumerate() {
                input[[r, k]] = t.value(first + r, c).ok_or_else(|| {
                    Error::Config(format!("missing `{}` at {} in the input window", exp.features.input_columns[k], ts[r]))
                })?;
            }
        }
        let (mut pred, _) = forward(input.view(), &self.params)?;
        for (k, name) in exp.features.target_columns.iter().enumerate() {
            if let Some(s) = self.manifest.scaler.stats(name) {
                pred.column_mut(k).mapv_inplace(|v| v * s.std + s.mean);
            }
        }
        Ok((ts[rows - 1], pred))
    }
}

//! Forecast scoring against a persistence baseline, and a synthetic
//! coupled-series generator.

mod metrics;
mod persistence;
mod report;
mod synth;

pub use metrics::{pearson, r_squared};
pub use persistence::{persistence_columns, persistence_forecast};
pub use report::{evaluate, forecasts, report_from_forecasts, EvalReport, Forecasts, HorizonMetrics, IndexReport};
pub use synth::{generate_synthetic, SynthConfig, AR_COEFFICIENT, MAX_LAG};

//! Multi-horizon forecasting of geomagnetic indices (AE, AU, AL, Dst, F10.7, Kp)
//! from solar wind, IMF, historical-index, calendar and SuperDARN inputs.
//!
//! The pipeline runs in this order:
//!
//! 1. [`ingest`] parses columnar hourly data and 5-minute SuperDARN series
//!    into [`TimeTable`]s, resamples and aligns them.
//! 2. [`features`] adds calendar sinusoids and fits a per-column [`Scaler`]
//!    on the training partition.
//! 3. [`dataset`] splits the table sequentially and slides the
//!    history/lead window over each partition.
//! 4. [`nn`] and [`optim`] train an LSTM encoder with a linear head under
//!    Adam with coupled weight decay.
//! 5. [`search`] runs a random hyperparameter search with median early
//!    stopping and picks the trial with the lowest validation loss.
//! 6. [`eval`] scores the model against a persistence baseline.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix it to `f64`, which is what the CLI trains with.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod nn;
pub mod optim;
pub mod pipeline;
mod scalar;
pub mod search;

pub use error::{Error, Result};
pub use features::Scaler;
pub use ingest::{Timestamp, TimeTable};
pub use scalar::Scalar;

pub type LstmParams = nn::LstmParams<f64>;
pub type LstmParams32 = nn::LstmParams<f32>;
pub type WindowSet = dataset::WindowSet<f64>;
pub type WindowSet32 = dataset::WindowSet<f32>;
pub type AdamState = optim::AdamState<LstmParams>;
pub type EvalReport = eval::EvalReport;

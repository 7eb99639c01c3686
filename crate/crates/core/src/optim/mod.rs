//! Loss, optimizer and the epoch loop.

mod adam;
mod loss;
mod train;

pub use adam::{adam_step, AdamState, Parameters, BETA1, BETA2, EPSILON};
pub use loss::{mse, mse_grad};
pub use train::{dataset_loss, train, EpochRecord, StopDecision, TrainHistory, TrainOutcome, DEFAULT_MAX_EPOCHS};

//! Stacked LSTM encoder with a linear head on the final hidden state, and
//! its exact gradients by backpropagation through time.

pub mod io;
mod lstm;
mod params;

pub use lstm::{
    backward, backward_batch, cell_forward, forward, forward_batch, predict_items, stack_items, stack_steps,
    ForwardCache,
};
pub use io::{load_params, save_params};
pub use params::{LstmDims, LstmLayerParams, LstmParams};

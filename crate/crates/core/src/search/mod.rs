//! Random hyperparameter search with the median stopping rule.

mod ledger;
mod runner;
mod space;

pub use ledger::{
    median_stop_decision, read_events, write_event, LedgerEvent, TrialLedger, TrialRecord, TrialStatus,
    DEFAULT_GRACE_EPOCHS,
};
pub use runner::{dims_for, run_search, run_trials, train_with, SearchConfig, SearchOutcome, TrialContext, TrialRun};
pub use space::{sample_hyperparams, trial_seed, Bounds, HyperParams, SearchSpace};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ledger::{median_stop_decision, write_event, DEFAULT_GRACE_EPOCHS};
use super::{sample_hyperparams, trial_seed, HyperParams, LedgerEvent, SearchSpace, TrialLedger, TrialStatus};
use crate::dataset::WindowSet;
use crate::nn::{LstmDims, LstmParams};
use crate::optim::{train, EpochRecord, StopDecision, TrainOutcome, DEFAULT_MAX_EPOCHS};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n_trials: usize,
    pub seed: u64,
    /// 1 runs trials sequentially and reproducibly; more runs them
    /// concurrently, with stopping decisions made against whatever the
    /// ledger holds at the time.
    pub workers: usize,
    pub grace_epochs: usize,
    pub max_epochs: usize,
    /// JSON-lines file that receives every ledger event as it happens.
    pub ledger_path: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_trials: 100,
            seed: 0,
            workers: 1,
            grace_epochs: DEFAULT_GRACE_EPOCHS,
            max_epochs: DEFAULT_MAX_EPOCHS,
            ledger_path: None,
        }
    }
}

struct Shared<M> {
    ledger: TrialLedger,
    events: Vec<LedgerEvent>,
    sink: Option<BufWriter<File>>,
    best: Option<(f64, usize, M)>,
}

impl<M> Shared<M> {
    fn push(&mut self, e: LedgerEvent) -> Result<()> {
        if let Some(w) = self.sink.as_mut() {
            write_event(&mut *w, &e)?;
            w.flush().map_err(|err| Error::io("<ledger>", err))?;
        }
        self.events.push(e);
        Ok(())
    }
}

/// Handle a running trial uses to report epochs to the shared ledger.
pub struct TrialContext<'a, M> {
    pub trial: usize,
    grace_epochs: usize,
    shared: &'a Mutex<Shared<M>>,
    error: Mutex<Option<Error>>,
}

impl<M> TrialContext<'_, M> {
    /// Records one epoch and applies the median stopping rule, atomically
    /// with respect to other trials.
    pub fn report(&self, record: &EpochRecord) -> StopDecision {
        let mut s = self.shared.lock().unwrap();
        let step = (|| {
            let avg = s.ledger.record_epoch(self.trial, record.epoch, record.val_loss)?;
            let decision = median_stop_decision(&s.ledger, self.trial, record.epoch, self.grace_epochs);
            s.push(LedgerEvent::Epoch {
                trial: self.trial,
                epoch: record.epoch,
                train_loss: record.train_loss,
                val_loss: record.val_loss,
                running_avg: avg,
                stop: decision == StopDecision::Stop,
            })?;
            Ok(decision)
        })();
        match step {
            Ok(d) => d,
            Err(e) => {
                self.error.lock().unwrap().get_or_insert(e);
                StopDecision::Stop
            }
        }
    }
}

/// What a trial objective hands back.
pub struct TrialRun<M> {
    pub model: M,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

pub struct SearchOutcome<M> {
    pub best_model: M,
    pub best_hyperparams: HyperParams,
    pub best_trial: usize,
    pub best_val_loss: f64,
    pub ledger: TrialLedger,
    /// Every ledger event in the order it was recorded.
    pub events: Vec<LedgerEvent>,
}

/// Runs `cfg.n_trials` trials of `objective`, each with hyperparameters
/// drawn from `space` by an RNG seeded with [`trial_seed`], and keeps the
/// model with the lowest best validation loss.
///
/// An objective returning [`Error::Diverged`] marks its trial diverged; any
/// other error aborts the search.
pub fn run_trials<M, F>(space: &SearchSpace, cfg: &SearchConfig, objective: F) -> Result<SearchOutcome<M>>
where
    M: Send,
    F: Fn(&HyperParams, &TrialContext<M>) -> Result<TrialRun<M>> + Sync,
{
    space.validate()?;
    if cfg.n_trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let sink = match &cfg.ledger_path {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => None,
    };
    let shared = Mutex::new(Shared::<M> { ledger: TrialLedger::default(), events: Vec::new(), sink, best: None });
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let worker = || {
        loop {
            if failure.lock().unwrap().is_some() {
                return;
            }
            let trial = next.fetch_add(1, Ordering::SeqCst);
            if trial >= cfg.n_trials {
                return;
            }
            if let Err(e) = run_one(trial, space, cfg, &shared, &objective) {
                failure.lock().unwrap().get_or_insert(e);
                return;
            }
        }
    };
    let workers = cfg.workers.clamp(1, cfg.n_trials);
    if workers == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let shared = shared.into_inner().unwrap();
    let Some((best_val_loss, best_trial, best_model)) = shared.best else {
        return Err(Error::AllDiverged(cfg.n_trials));
    };
    Ok(SearchOutcome {
        best_model,
        best_hyperparams: shared.ledger.get(best_trial).unwrap().hyperparams.clone(),
        best_trial,
        best_val_loss,
        ledger: shared.ledger,
        events: shared.events,
    })
}

fn run_one<M, F>(trial: usize, space: &SearchSpace, cfg: &SearchConfig, shared: &Mutex<Shared<M>>, objective: &F) -> Result<()>
where
    F: Fn(&HyperParams, &TrialContext<M>) -> Result<TrialRun<M>>,
{
    let seed = trial_seed(cfg.seed, trial);
    let hp = sample_hyperparams(space, seed, &mut ChaCha8Rng::seed_from_u64(seed));
    {
        let mut s = shared.lock().unwrap();
        s.ledger.start(trial, hp.clone())?;
        s.push(LedgerEvent::Start { trial, hyperparams: hp.clone() })?;
    }
    log::debug!("trial {trial}: {hp:?}");
    let ctx = TrialContext { trial, grace_epochs: cfg.grace_epochs, shared, error: Mutex::new(None) };
    let result = objective(&hp, &ctx);
    if let Some(e) = ctx.error.into_inner().unwrap() {
        return Err(e);
    }
    let (status, run) = match result {
        Ok(run) if run.stopped_early => (TrialStatus::Stopped, Some(run)),
        Ok(run) => (TrialStatus::Completed, Some(run)),
        Err(Error::Diverged { epoch }) => {
            log::info!("trial {trial} diverged at epoch {epoch}");
            (TrialStatus::Diverged, None)
        }
        Err(e) => return Err(e),
    };
    let mut s = shared.lock().unwrap();
    s.ledger.finish(trial, status)?;
    let rec = s.ledger.get(trial).unwrap();
    let (best_epoch, best_val_loss) = (rec.best_epoch, rec.best_val_loss);
    s.push(LedgerEvent::End { trial, status, best_epoch, best_val_loss })?;
    if let Some(run) = run {
        log::info!("trial {trial} {status:?}: best val loss {}", run.best_val_loss);
        let better = s.best.as_ref().is_none_or(|(loss, idx, _)| (run.best_val_loss, trial) < (*loss, *idx));
        if better {
            s.best = Some((run.best_val_loss, trial, run.model));
        }
    }
    Ok(())
}

/// Model shape implied by a trial's hyperparameters and the data.
pub fn dims_for<T: Scalar>(hp: &HyperParams, data: &WindowSet<T>) -> LstmDims {
    LstmDims {
        input: data.input_dim(),
        hidden: hp.hidden_dim,
        layers: hp.num_layers,
        lead: data.config.lead,
        outputs: data.output_dim(),
    }
}

/// Trains one model with `hp`: parameters initialised from `hp.seed`,
/// batches shuffled by a second ChaCha8 stream of the same seed.
pub fn train_with<T: Scalar>(
    hp: &HyperParams,
    train_set: &WindowSet<T>,
    val_set: &WindowSet<T>,
    max_epochs: usize,
    stopper: impl FnMut(&EpochRecord, &crate::optim::TrainHistory) -> StopDecision,
) -> Result<TrainOutcome<T>> {
    let model = LstmParams::init(dims_for(hp, train_set), hp.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(1);
    train(model, train_set, val_set, hp, max_epochs, stopper, &mut rng)
}

/// Random search over LSTM configurations with median early stopping.
pub fn run_search<T: Scalar>(
    train_set: &WindowSet<T>,
    val_set: &WindowSet<T>,
    space: &SearchSpace,
    cfg: &SearchConfig,
) -> Result<SearchOutcome<LstmParams<T>>> {
    run_trials(space, cfg, |hp, ctx| {
        let out = train_with(hp, train_set, val_set, cfg.max_epochs, |rec, _| ctx.report(rec))?;
        Ok(TrialRun { model: out.params, best_val_loss: out.best_val_loss, stopped_early: out.stopped_early })
    })
}

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::HyperParams;
use crate::optim::StopDecision;
use crate::{Error, Result};

pub const DEFAULT_GRACE_EPOCHS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Running,
    Completed,
    Stopped,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub hyperparams: HyperParams,
    pub status: TrialStatus,
    pub val_losses: Vec<f64>,
    /// `running_avg[e - 1]` is the mean of validation losses for epochs `1..=e`.
    pub running_avg: Vec<f64>,
    pub best_val_loss: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// One line of the persisted ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerEvent {
    Start {
        trial: usize,
        hyperparams: HyperParams,
    },
    Epoch {
        trial: usize,
        epoch: usize,
        train_loss: f64,
        val_loss: f64,
        running_avg: f64,
        stop: bool,
    },
    End {
        trial: usize,
        status: TrialStatus,
        best_epoch: Option<usize>,
        best_val_loss: Option<f64>,
    },
}

/// Cross-trial state for median stopping and final selection.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialLedger {
    pub trials: BTreeMap<usize, TrialRecord>,
}

impl TrialLedger {
    pub fn get(&self, trial: usize) -> Option<&TrialRecord> {
        self.trials.get(&trial)
    }

    pub fn start(&mut self, trial: usize, hyperparams: HyperParams) -> Result<()> {
        if self.trials.contains_key(&trial) {
            return Err(Error::Config(format!("trial {trial} already started")));
        }
        self.trials.insert(
            trial,
            TrialRecord {
                trial,
                hyperparams,
                status: TrialStatus::Running,
                val_losses: Vec::new(),
                running_avg: Vec::new(),
                best_val_loss: None,
                best_epoch: None,
            },
        );
        Ok(())
    }

    fn running(&mut self, trial: usize) -> Result<&mut TrialRecord> {
        match self.trials.get_mut(&trial) {
            Some(r) if r.status == TrialStatus::Running => Ok(r),
            Some(r) => Err(Error::Config(format!("trial {trial} already finished as {:?}", r.status))),
            None => Err(Error::Config(format!("trial {trial} not started"))),
        }
    }

    /// Appends the validation loss for the next epoch and returns the
    /// updated running average.
    pub fn record_epoch(&mut self, trial: usize, epoch: usize, val_loss: f64) -> Result<f64> {
        let r = self.running(trial)?;
        if epoch != r.val_losses.len() + 1 {
            return Err(Error::Config(format!("trial {trial}: epoch {epoch} out of order")));
        }
        r.val_losses.push(val_loss);
        let avg = r.val_losses.iter().sum::<f64>() / epoch as f64;
        r.running_avg.push(avg);
        if r.best_val_loss.is_none_or(|b| val_loss < b) {
            r.best_val_loss = Some(val_loss);
            r.best_epoch = Some(epoch);
        }
        Ok(avg)
    }

    /// Moves a running trial to a terminal status.
    pub fn finish(&mut self, trial: usize, status: TrialStatus) -> Result<()> {
        if status == TrialStatus::Running {
            return Err(Error::Config("cannot finish a trial as running".into()));
        }
        self.running(trial)?.status = status;
        Ok(())
    }

    pub fn running_average_at(&self, trial: usize, epoch: usize) -> Option<f64> {
        epoch.checked_sub(1).and_then(|i| self.trials.get(&trial)?.running_avg.get(i).copied())
    }

    /// Applies one persisted event.
    pub fn apply(&mut self, event: &LedgerEvent) -> Result<()> {
        match event {
            LedgerEvent::Start { trial, hyperparams } => self.start(*trial, hyperparams.clone()),
            LedgerEvent::Epoch { trial, epoch, val_loss, .. } => self.record_epoch(*trial, *epoch, *val_loss).map(drop),
            LedgerEvent::End { trial, status, .. } => self.finish(*trial, *status),
        }
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a LedgerEvent>) -> Result<Self> {
        let mut l = TrialLedger::default();
        for e in events {
            l.apply(e)?;
        }
        Ok(l)
    }

    /// Trial with the lowest best validation loss among completed and
    /// stopped trials; the lower index wins ties.
    pub fn best_trial(&self) -> Option<&TrialRecord> {
        self.trials
            .values()
            .filter(|r| matches!(r.status, TrialStatus::Completed | TrialStatus::Stopped))
            .filter(|r| r.best_val_loss.is_some())
            .fold(None, |best: Option<&TrialRecord>, r| match best {
                Some(b) if b.best_val_loss <= r.best_val_loss => Some(b),
                _ => Some(r),
            })
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median stopping rule: stop `trial` at `epoch` when its running-average
/// validation loss is strictly above the median of the other trials'
/// running averages at the same epoch. Never stops before `grace_epochs`
/// or when no other trial has reached `epoch`.
pub fn median_stop_decision(ledger: &TrialLedger, trial: usize, epoch: usize, grace_epochs: usize) -> StopDecision {
    if epoch < grace_epochs {
        return StopDecision::Continue;
    }
    let Some(current) = ledger.running_average_at(trial, epoch) else {
        return StopDecision::Continue;
    };
    let mut others: Vec<f64> = ledger
        .trials
        .keys()
        .filter(|&&t| t != trial)
        .filter_map(|&t| ledger.running_average_at(t, epoch))
        .collect();
    if others.is_empty() {
        return StopDecision::Continue;
    }
    if current > median(&mut others) {
        StopDecision::Stop
    } else {
        StopDecision::Continue
    }
}

pub fn write_event<W: Write>(mut w: W, e: &LedgerEvent) -> Result<()> {
    serde_json::to_writer(&mut w, e)?;
    w.write_all(b"\n").map_err(|e| Error::io("<ledger>", e))
}

pub fn read_events<R: BufRead>(r: R) -> Result<Vec<LedgerEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<ledger>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> HyperParams {
        HyperParams { lr: 1e-3, weight_decay: 1e-6, batch_size: 64, hidden_dim: 8, num_layers: 1, seed: 0 }
    }

    /// Ledger whose trials have constant validation loss for `epochs` epochs.
    fn flat(losses: &[f64], epochs: usize) -> TrialLedger {
        let mut l = TrialLedger::default();
        for (t, &v) in losses.iter().enumerate() {
            l.start(t, hp()).unwrap();
            for e in 1..=epochs {
                l.record_epoch(t, e, v).unwrap();
            }
        }
        l
    }

    #[test]
    fn running_average() {
        let mut l = TrialLedger::default();
        l.start(0, hp()).unwrap();
        for (e, v) in [4.0, 2.0, 3.0].into_iter().enumerate() {
            l.record_epoch(0, e + 1, v).unwrap();
        }
        assert_eq!(l.get(0).unwrap().running_avg, vec![4.0, 3.0, 3.0]);
        assert_eq!(l.get(0).unwrap().best_epoch, Some(2));
        assert!(l.record_epoch(0, 5, 1.0).is_err());
    }

    #[test]
    fn stops_above_median_after_grace() {
        let l = flat(&[0.5, 0.7, 0.9, 0.8], 60);
        assert_eq!(median_stop_decision(&l, 3, 50, 50), StopDecision::Stop);
        assert_eq!(median_stop_decision(&l, 3, 49, 50), StopDecision::Continue);
        assert_eq!(median_stop_decision(&l, 0, 55, 50), StopDecision::Continue);
    }

    #[test]
    fn lone_trial_continues() {
        let l = flat(&[100.0], 60);
        assert_eq!(median_stop_decision(&l, 0, 60, 50), StopDecision::Continue);
    }

    #[test]
    fn tie_with_median_continues() {
        let l = flat(&[0.5, 0.7, 0.9, 0.7], 60);
        assert_eq!(median_stop_decision(&l, 3, 50, 50), StopDecision::Continue);
    }

    #[test]
    fn only_trials_reaching_the_epoch_count() {
        let mut l = flat(&[0.1], 10);
        l.start(1, hp()).unwrap();
        for e in 1..=60 {
            l.record_epoch(1, e, 1.0).unwrap();
        }
        assert_eq!(median_stop_decision(&l, 1, 55, 50), StopDecision::Continue);
    }

    #[test]
    fn status_is_one_way() {
        let mut l = flat(&[1.0], 1);
        l.finish(0, TrialStatus::Stopped).unwrap();
        assert!(l.finish(0, TrialStatus::Completed).is_err());
        assert!(l.record_epoch(0, 2, 1.0).is_err());
    }

    #[test]
    fn best_trial_skips_diverged_and_is_scale_invariant() {
        let mut l = flat(&[0.4, 0.2, 0.3], 3);
        l.finish(0, TrialStatus::Completed).unwrap();
        l.finish(1, TrialStatus::Diverged).unwrap();
        l.finish(2, TrialStatus::Stopped).unwrap();
        assert_eq!(l.best_trial().unwrap().trial, 2);

        let mut scaled = l.clone();
        for r in scaled.trials.values_mut() {
            r.best_val_loss = r.best_val_loss.map(|v| v * 17.5);
        }
        assert_eq!(scaled.best_trial().unwrap().trial, 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let events = vec![
            LedgerEvent::Start { trial: 0, hyperparams: hp() },
            LedgerEvent::Epoch { trial: 0, epoch: 1, train_loss: 1.5, val_loss: 2.0, running_avg: 2.0, stop: false },
            LedgerEvent::End { trial: 0, status: TrialStatus::Completed, best_epoch: Some(1), best_val_loss: Some(2.0) },
        ];
        let mut buf = Vec::new();
        for e in &events {
            write_event(&mut buf, e).unwrap();
        }
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with(r#"{"event":"start","trial":0"#));
        let back = read_events(buf.as_slice()).unwrap();
        assert_eq!(back, events);
        let l = TrialLedger::replay(&back).unwrap();
        assert_eq!(l.get(0).unwrap().status, TrialStatus::Completed);
    }
}

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, mse, mse_grad, AdamState};
use crate::dataset::{WindowItem, WindowSet};
use crate::nn::{backward_batch, forward_batch, predict_items, stack_items, LstmParams};
use crate::search::HyperParams;
use crate::{Error, Result, Scalar};

pub const DEFAULT_MAX_EPOCHS: usize = 1350;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn val_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_loss).collect()
    }

    /// Epoch record with the lowest validation loss; the earliest wins ties.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().fold(None, |best: Option<&EpochRecord>, e| match best {
            Some(b) if b.val_loss <= e.val_loss => Some(b),
            _ => Some(e),
        })
    }

    pub fn write_csv_header<W: Write>(mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")
    }

    pub fn write_csv_row<W: Write>(mut w: W, e: &EpochRecord) -> std::io::Result<()> {
        writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Snapshot from the epoch with the lowest validation loss.
    pub params: LstmParams<T>,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn batch_targets<T: Scalar>(items: &[&WindowItem<T>], width: usize) -> Array2<T> {
    let mut y = Array2::zeros((items.len(), width));
    for (b, item) in items.iter().enumerate() {
        for (dst, &src) in y.row_mut(b).iter_mut().zip(item.target.iter()) {
            *dst = src;
        }
    }
    y
}

/// Mean squared error of `p` over every window in `set`.
pub fn dataset_loss<T: Scalar>(p: &LstmParams<T>, set: &WindowSet<T>) -> Result<f64> {
    let pred = predict_items(&set.items, p)?;
    let refs: Vec<&WindowItem<T>> = set.items.iter().collect();
    let y = batch_targets(&refs, p.dims.head_out());
    Ok(mse(pred.view(), y.view())?.to_f64_lossy())
}

fn check_compatible<T: Scalar>(p: &LstmParams<T>, set: &WindowSet<T>, what: &'static str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty(what));
    }
    let d = p.dims;
    if set.input_dim() != d.input || set.output_dim() != d.outputs || set.config.lead != d.lead {
        return Err(Error::Shape(format!(
            "{what} windows ({} inputs, {} targets, lead {}) do not fit model {d:?}",
            set.input_dim(),
            set.output_dim(),
            set.config.lead
        )));
    }
    Ok(())
}

/// Mini-batch Adam training on batch-mean MSE.
///
/// Each epoch shuffles the training windows with `rng`, takes one Adam
/// step per batch of `hp.batch_size` (the last batch may be smaller), then
/// computes the full validation loss and asks `stopper` whether to go on.
/// Runs at most `max_epochs` epochs and returns the snapshot with the lowest
/// validation loss. A non-finite loss aborts with [`Error::Diverged`].
pub fn train<T, F, R>(
    model: LstmParams<T>,
    train_set: &WindowSet<T>,
    val_set: &WindowSet<T>,
    hp: &HyperParams,
    max_epochs: usize,
    mut stopper: F,
    rng: &mut R,
) -> Result<TrainOutcome<T>>
where
    T: Scalar,
    F: FnMut(&EpochRecord, &TrainHistory) -> StopDecision,
    R: Rng + ?Sized,
{
    check_compatible(&model, train_set, "training set")?;
    check_compatible(&model, val_set, "validation set")?;
    if hp.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let lr = T::from_f64_lossy(hp.lr);
    let wd = T::from_f64_lossy(hp.weight_decay);
    let width = model.dims.head_out();

    let mut params = model;
    let mut adam = AdamState::new(&params);
    let mut history = TrainHistory::default();
    let mut best: Option<(LstmParams<T>, usize, f64)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let items: Vec<&WindowItem<T>> = chunk.iter().map(|&i| &train_set.items[i]).collect();
            let y = batch_targets(&items, width);
            let (pred, cache) = forward_batch(&stack_items(&items)?, &params)?;
            let loss = mse(pred.view(), y.view())?.to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            let grad = backward_batch(&cache, mse_grad(pred.view(), y.view()).view(), &params)?;
            adam_step(&mut params, &grad, &mut adam, lr, wd).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { epoch },
                e => e,
            })?;
        }
        let val_loss = dataset_loss(&params, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let record = EpochRecord { epoch, train_loss: loss_sum / train_set.len() as f64, val_loss };
        history.epochs.push(record);
        if best.as_ref().is_none_or(|b| val_loss < b.2) {
            best = Some((params.clone(), epoch, val_loss));
        }
        if stopper(&record, &history) == StopDecision::Stop {
            stopped_early = epoch < max_epochs;
            break;
        }
    }
    let (params, best_epoch, best_val_loss) = best.ok_or(Error::Config("max_epochs must be positive".into()))?;
    Ok(TrainOutcome { params, history, best_epoch, best_val_loss, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{assemble_windows, FeatureSpec, WindowConfig};
    use crate::ingest::{Column, TimeTable, Timestamp};
    use crate::nn::LstmDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_sets() -> (WindowSet<f64>, WindowSet<f64>) {
        let n = 120;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { 0.8 * x[i - 1] }).collect();
        let t = TimeTable::new(
            (0..n as i64).map(Timestamp::from_epoch_hour).collect(),
            vec![
                Column { name: "x".into(), values: x.into_iter().map(Some).collect() },
                Column { name: "y".into(), values: y.into_iter().map(Some).collect() },
            ],
        )
        .unwrap();
        let f = FeatureSpec::custom(vec!["x".into(), "y".into()], vec!["y".into()]).unwrap();
        let w = WindowConfig::new(3, 2).unwrap();
        let all: WindowSet<f64> = assemble_windows(&t, &f, &w).unwrap();
        let mut train = all.clone();
        let mut val = all;
        val.items = train.items.split_off(90);
        (train, val)
    }

    fn hp(batch_size: usize) -> HyperParams {
        HyperParams { lr: 1e-2, weight_decay: 0.0, batch_size, hidden_dim: 6, num_layers: 1, seed: 1 }
    }

    fn model(seed: u64) -> LstmParams<f64> {
        LstmParams::init(LstmDims { input: 2, hidden: 6, layers: 1, lead: 2, outputs: 1 }, seed).unwrap()
    }

    #[test]
    fn one_step_per_epoch_with_full_batch() {
        let (tr, va) = toy_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = model(0);
        let out = train(m.clone(), &tr, &va, &hp(10_000), 1, |_, _| StopDecision::Continue, &mut rng).unwrap();
        // Reproduce the single full-batch step by hand.
        let items: Vec<&WindowItem<f64>> = tr.items.iter().collect();
        let y = batch_targets(&items, 2);
        let (pred, cache) = forward_batch(&stack_items(&items).unwrap(), &m).unwrap();
        let g = backward_batch(&cache, mse_grad(pred.view(), y.view()).view(), &m).unwrap();
        let mut expect = m.clone();
        let mut s = AdamState::new(&expect);
        adam_step(&mut expect, &g, &mut s, 1e-2, 0.0).unwrap();
        for ((_, a), (_, b)) in out.params.tensors().into_iter().zip(expect.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (tr, va) = toy_sets();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            train(model(3), &tr, &va, &hp(16), 15, |_, _| StopDecision::Continue, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn loss_falls_and_best_snapshot_is_returned() {
        let (tr, va) = toy_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = train(model(1), &tr, &va, &hp(16), 40, |_, _| StopDecision::Continue, &mut rng).unwrap();
        let h = &out.history.epochs;
        assert_eq!(h.len(), 40);
        assert!(h[39].train_loss < h[0].train_loss);
        let min = h.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_loss, min);
        assert_eq!(dataset_loss(&out.params, &va).unwrap(), min);
        assert!(!out.stopped_early);
    }

    #[test]
    fn stopper_ends_training() {
        let (tr, va) = toy_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = train(
            model(1),
            &tr,
            &va,
            &hp(32),
            100,
            |e, _| if e.epoch == 7 { StopDecision::Stop } else { StopDecision::Continue },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.history.len(), 7);
        assert!(out.stopped_early);
    }

    #[test]
    fn divergence_is_reported() {
        let (tr, va) = toy_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = model(1);
        m.head_b[0] = f64::INFINITY;
        let err = train(m, &tr, &va, &hp(32), 5, |_, _| StopDecision::Continue, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1 }), "{err}");
    }

    #[test]
    fn rejects_mismatched_windows() {
        let (tr, va) = toy_sets();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = LstmParams::init(LstmDims { input: 3, hidden: 6, layers: 1, lead: 2, outputs: 1 }, 0).unwrap();
        assert!(train(m, &tr, &va, &hp(8), 1, |_, _| StopDecision::Continue, &mut rng).is_err());
    }
}

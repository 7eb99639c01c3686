use geomag::dataset::FeatureSpec;
use geomag::eval::{generate_synthetic, SynthConfig};
use geomag::optim::StopDecision;
use geomag::pipeline::{prepare, ExperimentConfig, Prepared};
use geomag::search::{train_with, HyperParams};

fn synth_prepared(seed: u64) -> Prepared<f64> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let f = FeatureSpec::custom(names(&["x1", "x2", "x3", "y1", "y2"]), names(&["y1", "y2"])).unwrap();
    let table = generate_synthetic(&SynthConfig::standard_with_snr(800, 5.0, seed)).unwrap();
    prepare(&table, &ExperimentConfig::new(f)).unwrap()
}

fn hp(seed: u64) -> HyperParams {
    HyperParams { lr: 1e-3, weight_decay: 1e-6, batch_size: 64, hidden_dim: 8, num_layers: 1, seed }
}

#[test]
fn training_loss_falls_by_epoch_50_for_most_seeds() {
    let p = synth_prepared(1);
    let mut improved = 0;
    for seed in 0..20 {
        let out = train_with(&hp(seed), &p.train, &p.val, 50, |_, _| StopDecision::Continue).unwrap();
        let e = &out.history.epochs;
        assert_eq!(e.len(), 50);
        if e[49].train_loss < e[0].train_loss {
            improved += 1;
        }
    }
    assert!(improved >= 19, "only {improved} of 20 seeds improved");
}

#[test]
fn training_is_reproducible_and_keeps_best_snapshot() {
    let p = synth_prepared(2);
    let a = train_with(&hp(3), &p.train, &p.val, 15, |_, _| StopDecision::Continue).unwrap();
    let b = train_with(&hp(3), &p.train, &p.val, 15, |_, _| StopDecision::Continue).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
    let best = a.history.best().unwrap();
    assert_eq!((best.epoch, best.val_loss), (a.best_epoch, a.best_val_loss));
    let loss = geomag::optim::dataset_loss(&a.params, &p.val).unwrap();
    assert!((loss - a.best_val_loss).abs() < 1e-12);
}

#[test]
fn stopper_ends_training_early() {
    let p = synth_prepared(3);
    let out = train_with(&hp(0), &p.train, &p.val, 40, |r, _| {
        if r.epoch == 4 {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    })
    .unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.history.len(), 4);
}

#[test]
fn single_precision_training_tracks_double() {
    let p = synth_prepared(4);
    let (train32, val32) = (p.train.cast::<f32>(), p.val.cast::<f32>());
    let a = train_with(&hp(5), &p.train, &p.val, 5, |_, _| StopDecision::Continue).unwrap();
    let b = train_with(&hp(5), &train32, &val32, 5, |_, _| StopDecision::Continue).unwrap();
    for (x, y) in a.history.epochs.iter().zip(&b.history.epochs) {
        assert!((x.train_loss - y.train_loss).abs() < 1e-3 * x.train_loss.max(1.0), "{x:?} vs {y:?}");
    }
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let p = synth_prepared(5);
    let wild = HyperParams { lr: 1e6, ..hp(0) };
    match train_with(&wild, &p.train, &p.val, 30, |_, _| StopDecision::Continue) {
        Err(geomag::Error::Diverged { .. }) | Ok(_) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

use std::io::BufReader;

use geomag::dataset::FeatureSpec;
use geomag::eval::{generate_synthetic, SynthConfig};
use geomag::nn::io::sidecar_path;
use geomag::nn::{load_params, save_params, LstmDims, LstmParams};
use geomag::pipeline::{prepare, ExperimentConfig, Prepared};
use geomag::search::{read_events, run_search, Bounds, SearchConfig, SearchSpace, TrialLedger};
use geomag::TimeTable;

#[test]
fn table_survives_a_csv_round_trip() {
    let t = generate_synthetic(&SynthConfig::standard(50, 0.3, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    t.save(&path).unwrap();
    assert_eq!(TimeTable::load(&path).unwrap(), t);
}

#[test]
fn params_survive_a_file_round_trip() {
    let dims = LstmDims { input: 17, hidden: 5, layers: 2, lead: 6, outputs: 6 };
    let p = LstmParams::<f64>::init(dims, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_params(&p, 12, &path).unwrap();
    assert_eq!(load_params::<f64>(&path).unwrap(), p);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(side["gate_order"], "IFGO");
    assert_eq!(side["seed"], 12);
}

#[test]
fn ledger_file_replays_to_the_search_ledger() {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let f = FeatureSpec::custom(names(&["x1", "x2", "x3", "y1", "y2"]), names(&["y1", "y2"])).unwrap();
    let table = generate_synthetic(&SynthConfig::standard_with_snr(400, 5.0, 6)).unwrap();
    let p: Prepared<f64> = prepare(&table, &ExperimentConfig::new(f)).unwrap();
    let space = SearchSpace { hidden_dim: Bounds::new(4, 8), num_layers: Bounds::new(1, 1), ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.jsonl");
    let cfg = SearchConfig {
        n_trials: 3,
        seed: 1,
        workers: 2,
        grace_epochs: 2,
        max_epochs: 6,
        ledger_path: Some(path.clone()),
    };
    let out = run_search(&p.train, &p.val, &space, &cfg).unwrap();
    let events = read_events(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(events, out.events);
    assert_eq!(TrialLedger::replay(&events).unwrap(), out.ledger);
    let best = out.ledger.best_trial().unwrap();
    assert_eq!(best.trial, out.best_trial);
}

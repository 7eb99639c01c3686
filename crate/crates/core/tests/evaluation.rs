use ndarray::Array2;

use geomag::dataset::{FeatureSpec, WindowSet};
use geomag::eval::{evaluate, generate_synthetic, pearson, persistence_forecast, report_from_forecasts, SynthConfig};
use geomag::features::Scaler;
use geomag::nn::{LstmDims, LstmParams};
use geomag::pipeline::{prepare, ExperimentConfig, Prepared};

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn prepared() -> Prepared<f64> {
    let f = FeatureSpec::custom(names(&["x1", "x2", "x3", "y1", "y2"]), names(&["y1", "y2"])).unwrap();
    let table = generate_synthetic(&SynthConfig::standard_with_snr(1500, 5.0, 21)).unwrap();
    prepare(&table, &ExperimentConfig::new(f)).unwrap()
}

fn unscale(v: f64, scaler: &Scaler, name: &str) -> f64 {
    let s = scaler.stats(name).unwrap();
    v * s.std + s.mean
}

fn zero_model(set: &WindowSet<f64>) -> LstmParams<f64> {
    let dims = LstmDims { input: set.input_dim(), hidden: 3, layers: 1, lead: set.config.lead, outputs: set.output_dim() };
    LstmParams::zeros(dims).unwrap()
}

#[test]
fn persistence_pearson_is_lag_autocorrelation_of_the_raw_series() {
    let p = prepared();
    let report = evaluate(&zero_model(&p.test), &p.test, &p.scaler).unwrap();
    for (k, name) in ["y1", "y2"].iter().enumerate() {
        let col = 3 + k;
        for h in 1..=6 {
            // Pair y(t) with y(t + h) for every valid anchor t, in physical units.
            let now: Vec<f64> = p.test.items.iter().map(|i| unscale(i.input[[6, col]], &p.scaler, name)).collect();
            let later: Vec<f64> = p.test.items.iter().map(|i| unscale(i.target[[h - 1, k]], &p.scaler, name)).collect();
            let oracle = pearson(&now, &later).unwrap();
            let got = report.get(name, h).unwrap().persistence_pearson.unwrap();
            assert!((got - oracle).abs() < 1e-12, "{name} h={h}: {got} vs {oracle}");
        }
    }
    assert_eq!(report.n_points, p.test.len());
}

#[test]
fn zero_model_has_undefined_correlation() {
    let p = prepared();
    let report = evaluate(&zero_model(&p.test), &p.test, &p.scaler).unwrap();
    let m = report.get("y1", 1).unwrap();
    assert_eq!(m.model_pearson, None);
    assert!(m.model_r2.unwrap() <= 0.0);
}

#[test]
fn oracle_forecasts_score_one() {
    let p = prepared();
    let n = p.test.len();
    let actual = Array2::from_shape_fn((n, 12), |(i, c)| p.test.items[i].target[[c / 2, c % 2]]);
    let r = report_from_forecasts(&p.test.target_columns, 6, &actual, &actual, None).unwrap();
    for idx in &r.indices {
        for m in &idx.horizons {
            assert_eq!(m.model_r2, Some(1.0));
            assert!((m.model_pearson.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(m.persistence_pearson, None);
        }
    }
}

#[test]
fn metrics_survive_destandardization() {
    let p = prepared();
    let model = LstmParams::init(LstmDims { input: 5, hidden: 6, layers: 2, lead: 6, outputs: 2 }, 3).unwrap();
    let physical = evaluate(&model, &p.test, &p.scaler).unwrap();
    let identity = Scaler {
        columns: p
            .scaler
            .columns
            .iter()
            .map(|c| geomag::features::ColumnStats { name: c.name.clone(), mean: 0.0, std: 1.0 })
            .collect(),
        fitted_range: p.scaler.fitted_range,
    };
    let standardized = evaluate(&model, &p.test, &identity).unwrap();
    for (a, b) in physical.indices.iter().zip(&standardized.indices) {
        for (x, y) in a.horizons.iter().zip(&b.horizons) {
            for (u, v) in [
                (x.model_pearson, y.model_pearson),
                (x.model_r2, y.model_r2),
                (x.persistence_pearson, y.persistence_pearson),
                (x.persistence_r2, y.persistence_r2),
            ] {
                assert!((u.unwrap() - v.unwrap()).abs() < 1e-12, "{u:?} vs {v:?}");
            }
        }
    }
}

#[test]
fn persistence_is_exact_on_a_constant_series() {
    let p = prepared();
    let mut item = p.test.items[0].clone();
    item.input.column_mut(3).fill(2.5);
    item.target.column_mut(0).fill(2.5);
    let f = persistence_forecast(&item, &p.test.input_columns, &p.test.target_columns, 6).unwrap();
    for h in 0..6 {
        assert_eq!(f[[h, 0]] - item.target[[h, 0]], 0.0);
    }
}

#[test]
fn empty_test_set_is_an_error() {
    let p = prepared();
    let mut empty = p.test.clone();
    empty.items.clear();
    assert!(evaluate(&zero_model(&p.test), &empty, &p.scaler).is_err());
}

#[test]
fn solar_wind_only_features_have_no_persistence() {
    let f = FeatureSpec::custom(names(&["x1", "x2", "x3"]), names(&["y1", "y2"])).unwrap();
    let table = generate_synthetic(&SynthConfig::standard_with_snr(600, 5.0, 1)).unwrap();
    let p: Prepared<f64> = prepare(&table, &ExperimentConfig::new(f)).unwrap();
    let r = evaluate(&zero_model(&p.test), &p.test, &p.scaler).unwrap();
    assert!(r.indices.iter().all(|i| i.horizons.iter().all(|m| m.persistence_pearson.is_none())));
}

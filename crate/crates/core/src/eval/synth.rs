use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{Column, TimeTable, Timestamp};
use crate::{Error, Result};

/// AR(1) coefficient of every synthetic input column.
pub const AR_COEFFICIENT: f64 = 0.8;
/// Number of input lags feeding each target.
pub const MAX_LAG: usize = 3;

/// Coupled series: inputs `x1..xD` follow independent unit-variance AR(1)
/// processes and target `yk(t) = sum_j sum_l c[k][3j + l - 1] * xj(t - l)
/// + noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub length: usize,
    /// `K` rows of `D * 3` coefficients, lags 1..3 for each input in turn.
    pub coefficients: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Three inputs and two targets with memory across all three lags.
    pub fn standard(length: usize, noise_std: f64, seed: u64) -> Self {
        SynthConfig {
            length,
            coefficients: vec![
                vec![0.9, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -0.4],
                vec![0.0, -0.6, 0.0, 0.8, 0.0, 0.0, 0.3, 0.0, 0.3],
            ],
            noise_std,
            seed,
        }
    }

    /// [`SynthConfig::standard`] with the noise scaled so that every target
    /// has signal std / noise std of at least `snr`.
    pub fn standard_with_snr(length: usize, snr: f64, seed: u64) -> Self {
        let mut cfg = Self::standard(length, 0.0, seed);
        let min_std = (0..cfg.num_targets()).map(|k| cfg.signal_std(k)).fold(f64::INFINITY, f64::min);
        cfg.noise_std = min_std / snr;
        cfg
    }

    pub fn num_inputs(&self) -> usize {
        self.coefficients.first().map_or(0, |r| r.len() / MAX_LAG)
    }

    pub fn num_targets(&self) -> usize {
        self.coefficients.len()
    }

    pub fn input_columns(&self) -> Vec<String> {
        (1..=self.num_inputs()).map(|j| format!("x{j}")).collect()
    }

    pub fn target_columns(&self) -> Vec<String> {
        (1..=self.num_targets()).map(|k| format!("y{k}")).collect()
    }

    /// Standard deviation of the noiseless part of target `k`.
    pub fn signal_std(&self, k: usize) -> f64 {
        let c = &self.coefficients[k];
        let mut var = 0.0;
        for j in 0..self.num_inputs() {
            for l in 0..MAX_LAG {
                for m in 0..MAX_LAG {
                    let lag = (l as i32 - m as i32).unsigned_abs();
                    var += c[j * MAX_LAG + l] * c[j * MAX_LAG + m] * AR_COEFFICIENT.powi(lag as i32);
                }
            }
        }
        var.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("synthetic length must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be finite and >= 0, got {}", self.noise_std)));
        }
        let width = self.coefficients.first().map_or(0, Vec::len);
        if width == 0 || !width.is_multiple_of(MAX_LAG) {
            return Err(Error::Config(format!("coefficient rows need a positive multiple of {MAX_LAG} entries")));
        }
        if self.coefficients.iter().any(|r| r.len() != width || r.iter().any(|c| !c.is_finite())) {
            return Err(Error::Config("coefficient rows must have equal length and finite values".into()));
        }
        Ok(())
    }
}

/// Hourly table starting at 2000-001T00 with columns `x1..xD, y1..yK`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<TimeTable> {
    cfg.validate()?;
    let (d, n) = (cfg.num_inputs(), cfg.length);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let innovation = (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();

    let total = n + MAX_LAG;
    let mut xs = vec![vec![0.0; total]; d];
    for x in &mut xs {
        x[0] = unit.sample(&mut rng);
        for t in 1..total {
            x[t] = AR_COEFFICIENT * x[t - 1] + innovation * unit.sample(&mut rng);
        }
    }
    let mut columns: Vec<Column> = xs
        .iter()
        .enumerate()
        .map(|(j, x)| Column { name: format!("x{}", j + 1), values: x[MAX_LAG..].iter().map(|&v| Some(v)).collect() })
        .collect();
    for (k, c) in cfg.coefficients.iter().enumerate() {
        let mut y = Vec::with_capacity(n);
        for t in MAX_LAG..total {
            let mut v = 0.0;
            for (j, x) in xs.iter().enumerate() {
                for l in 1..=MAX_LAG {
                    v += c[j * MAX_LAG + l - 1] * x[t - l];
                }
            }
            if cfg.noise_std > 0.0 {
                v += cfg.noise_std * unit.sample(&mut rng);
            }
            y.push(Some(v));
        }
        columns.push(Column { name: format!("y{}", k + 1), values: y });
    }
    let start = Timestamp::from_calendar(2000, 1, 0)?;
    let timestamps = (0..n as i64).map(|h| start.add_hours(h)).collect();
    TimeTable::new(timestamps, columns)
}

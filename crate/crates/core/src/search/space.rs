use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One training configuration. `seed` drives parameter init and batch
/// shuffling for the trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub seed: u64,
}

/// Inclusive `[lo, hi]` bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: PartialOrd + Copy> Bounds<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Bounds { lo, hi }
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Learning rate and weight decay are sampled log-uniformly, the integer
/// parameters uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lr: Bounds<f64>,
    pub weight_decay: Bounds<f64>,
    pub batch_size: Bounds<usize>,
    pub hidden_dim: Bounds<usize>,
    pub num_layers: Bounds<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lr: Bounds::new(1e-6, 1e-1),
            weight_decay: Bounds::new(1e-9, 1e-1),
            batch_size: Bounds::new(64, 2048),
            hidden_dim: Bounds::new(16, 128),
            num_layers: Bounds::new(1, 3),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.lo > 0.0
            && self.lr.lo <= self.lr.hi
            && self.weight_decay.lo > 0.0
            && self.weight_decay.lo <= self.weight_decay.hi
            && self.batch_size.lo >= 1
            && self.batch_size.lo <= self.batch_size.hi
            && self.hidden_dim.lo >= 1
            && self.hidden_dim.lo <= self.hidden_dim.hi
            && self.num_layers.lo >= 1
            && self.num_layers.lo <= self.num_layers.hi;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid search space {self:?}")))
        }
    }

    /// True if `hp` lies inside every bound (the seed is unconstrained).
    pub fn contains(&self, hp: &HyperParams) -> bool {
        self.lr.contains(hp.lr)
            && self.weight_decay.contains(hp.weight_decay)
            && self.batch_size.contains(hp.batch_size)
            && self.hidden_dim.contains(hp.hidden_dim)
            && self.num_layers.contains(hp.num_layers)
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, b: Bounds<f64>) -> f64 {
    let (lo, hi) = (b.lo.log10(), b.hi.log10());
    if lo == hi {
        return b.lo;
    }
    10f64.powf(rng.random_range(lo..=hi)).clamp(b.lo, b.hi)
}

/// Draws one configuration. The draw order is lr, weight decay, batch size,
/// hidden dim, layers.
pub fn sample_hyperparams<R: Rng + ?Sized>(space: &SearchSpace, seed: u64, rng: &mut R) -> HyperParams {
    HyperParams {
        lr: log_uniform(rng, space.lr),
        weight_decay: log_uniform(rng, space.weight_decay),
        batch_size: rng.random_range(space.batch_size.lo..=space.batch_size.hi),
        hidden_dim: rng.random_range(space.hidden_dim.lo..=space.hidden_dim.hi),
        num_layers: rng.random_range(space.num_layers.lo..=space.num_layers.hi),
        seed,
    }
}

/// Seed of trial `index` under `master`: SplitMix64 of
/// `master + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn published_configurations_are_inside_default_space() {
        let space = SearchSpace::default();
        // (layers, weight decay, hidden, batch, lr)
        let published = [
            (1, 4.21e-8, 59, 1731, 4.73e-2),
            (1, 2.31e-7, 44, 1032, 4.79e-2),
            (1, 4.21e-2, 48, 1060, 2.87e-6),
            (1, 9.7e-8, 58, 502, 3.68e-3),
        ];
        for (layers, wd, hidden, batch, lr) in published {
            let hp = HyperParams { lr, weight_decay: wd, batch_size: batch, hidden_dim: hidden, num_layers: layers, seed: 0 };
            assert!(space.contains(&hp), "{hp:?}");
        }
    }

    #[test]
    fn samples_in_bounds_with_log_uniform_median() {
        let space = SearchSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut logs: Vec<f64> = (0..10_000)
            .map(|_| {
                let hp = sample_hyperparams(&space, 0, &mut rng);
                assert!(space.contains(&hp));
                hp.lr.log10()
            })
            .collect();
        logs.sort_by(f64::total_cmp);
        let median = (logs[4999] + logs[5000]) / 2.0;
        assert!((median + 3.5).abs() < 0.1, "{median}");
    }

    #[test]
    fn point_space_is_constant() {
        let space = SearchSpace {
            lr: Bounds::new(1e-3, 1e-3),
            weight_decay: Bounds::new(1e-5, 1e-5),
            batch_size: Bounds::new(32, 32),
            hidden_dim: Bounds::new(8, 8),
            num_layers: Bounds::new(2, 2),
        };
        space.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let hp = sample_hyperparams(&space, 7, &mut rng);
            assert_eq!(hp, HyperParams { lr: 1e-3, weight_decay: 1e-5, batch_size: 32, hidden_dim: 8, num_layers: 2, seed: 7 });
        }
    }

    #[test]
    fn trial_seeds_are_distinct_and_pure() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }
}

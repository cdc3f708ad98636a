//! Repeated runs with per-iteration seeds and the aggregate metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::run::run_with_keys;
use crate::sim::scenario::ScenarioConfig;
use crate::stats::mean_std;
use crate::witness::derive_witness_keys;

/// Per-claim confusion counts over all iterations. A claim is positive when
/// the prover is honest and inside the zone disc.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, admitted: u64, rejected: u64, positive: bool) {
        if positive {
            self.tp += admitted;
            self.fn_ += rejected;
        } else {
            self.fp += admitted;
            self.tn += rejected;
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub iterations: usize,
    pub claims_per_run: usize,
    pub success_rate_mean: f64,
    pub success_rate_std: f64,
    /// `None` when nothing was admitted.
    pub precision: Option<f64>,
    /// `None` when there were no positive claims.
    pub recall: Option<f64>,
    pub admitted_mean: f64,
    pub confusion: Confusion,
}

/// Aggregates per-run admitted counts, given in iteration order.
pub fn summarize(config: &ScenarioConfig, admitted: &[usize]) -> Summary {
    let claims = config.zone.claim_count().expect("validated scenario");
    let positive = config.claims_are_legitimate();
    let mut confusion = Confusion::default();
    for &a in admitted {
        confusion.add(a as u64, (claims - a) as u64, positive);
    }
    let rates: Vec<f64> = admitted.iter().map(|&a| a as f64 / claims as f64).collect();
    let (success_rate_mean, success_rate_std) = mean_std(&rates);
    let counts: Vec<f64> = admitted.iter().map(|&a| a as f64).collect();
    Summary {
        scenario: config.name.clone(),
        seed: config.seed,
        iterations: admitted.len(),
        claims_per_run: claims,
        success_rate_mean,
        success_rate_std,
        precision: confusion.precision(),
        recall: confusion.recall(),
        admitted_mean: mean_std(&counts).0,
        confusion,
    }
}

/// Admitted counts of `iterations` runs. Iteration `i` uses seed
/// `config.seed + i`; witness keys come from `config.seed`. The result is
/// independent of `jobs`.
pub fn admitted_counts(config: &ScenarioConfig, iterations: usize, jobs: usize) -> Vec<usize> {
    let keys = derive_witness_keys(config.seed, &config.zone);
    let one = |i: usize| {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(i as u64);
        run_with_keys(&cfg, &keys).admitted_count
    };
    if jobs <= 1 {
        return (0..iterations).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| (0..iterations).into_par_iter().map(one).collect())
}

pub fn monte_carlo(config: &ScenarioConfig, iterations: usize, jobs: usize) -> Summary {
    assert!(iterations >= 1, "at least one iteration");
    summarize(config, &admitted_counts(config, iterations, jobs))
}

//! Monte Carlo ensembles over independent seeded runs.
//!
//! Each run owns a ChaCha stream seeded from `(master_seed, run_index)`, runs
//! execute on a rayon pool and are reduced in index order, so results do not
//! depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{linear_to_db, Averaging, ScenarioConfig, SimParams, SnrAveraging};
use crate::error::{Result, SimError};
use crate::lifetime::{simulate, DeathCause, LifetimeTrace};

/// Seed of run `index` under `master`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    // splitmix64 finaliser over the combined key
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_rng(master: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(run_seed(master, index))
}

/// Ensemble means at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRound {
    pub round: u64,
    pub alive_fraction: f64,
    pub snr_db: f64,
    pub rate_bits: f64,
    pub residual_total_j: f64,
    /// Runs whose cluster was still alive at this round.
    pub surviving_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    pub lifetime: u64,
    pub wasted_j: f64,
    pub wasted_pct: f64,
    pub cause: DeathCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl LifetimeStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std,
            min: sorted[0],
            p10: quantile(&sorted, 0.10),
            p50: quantile(&sorted, 0.50),
            p90: quantile(&sorted, 0.90),
            max: sorted[sorted.len() - 1],
        }
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub name: String,
    pub rounds: Vec<EnsembleRound>,
    pub lifetime: LifetimeStats,
    pub wasted_j_mean: f64,
    pub wasted_pct_mean: f64,
    pub runs: Vec<RunSummary>,
}

/// Runs `runs` independent lifetimes on `workers` threads (0 = rayon
/// default) and returns the traces in run order.
pub fn run_traces(params: &SimParams, runs: usize, master_seed: u64, workers: usize) -> Result<Vec<LifetimeTrace>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| simulate(params, &mut run_rng(master_seed, i)))
            .collect()
    })
}

/// Runs an ensemble of `runs` lifetimes of `config`.
pub fn run_ensemble(config: &ScenarioConfig, runs: usize, master_seed: u64, workers: usize) -> Result<EnsembleResult> {
    if runs == 0 {
        return Err(SimError::InvalidConfig("run.runs must be >= 1".into()));
    }
    let params = config.resolve()?;
    let traces = run_traces(&params, runs, master_seed, workers)?;
    Ok(summarize(config, master_seed, &traces))
}

/// Reduces run traces, in order, into ensemble statistics.
pub fn summarize(config: &ScenarioConfig, master_seed: u64, traces: &[LifetimeTrace]) -> EnsembleResult {
    let max_len = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let zero_fill = config.run.averaging == Averaging::ZeroFill;
    let db_mode = config.run.snr_average == SnrAveraging::Db;
    let mut rounds = Vec::with_capacity(max_len);
    for r in 0..max_len {
        let (mut alive, mut snr, mut rate, mut resid) = (0.0, 0.0, 0.0, 0.0);
        let mut surviving = 0usize;
        let mut db_count = 0usize;
        for t in traces {
            match t.records.get(r) {
                Some(rec) => {
                    surviving += 1;
                    alive += rec.alive_fraction;
                    rate += rec.total_rate_bits;
                    resid += rec.residual_total_j;
                    let s = rec.mean_snr();
                    if db_mode {
                        if s > 0.0 {
                            snr += linear_to_db(s);
                            db_count += 1;
                        }
                    } else {
                        snr += s;
                    }
                }
                None if zero_fill => resid += t.wasted.joules,
                None => {}
            }
        }
        let denom = if zero_fill { traces.len() } else { surviving } as f64;
        let snr_db = if db_mode {
            if db_count > 0 {
                snr / db_count as f64
            } else {
                f64::NEG_INFINITY
            }
        } else {
            linear_to_db(snr / denom)
        };
        rounds.push(EnsembleRound {
            round: r as u64 + 1,
            alive_fraction: alive / denom,
            snr_db,
            rate_bits: rate / denom,
            residual_total_j: resid / denom,
            surviving_runs: surviving,
        });
    }
    let runs: Vec<RunSummary> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| RunSummary {
            index: i,
            seed: run_seed(master_seed, i),
            lifetime: t.lifetime,
            wasted_j: t.wasted.joules,
            wasted_pct: t.wasted.percent,
            cause: t.cause,
        })
        .collect();
    let n = runs.len() as f64;
    let lifetimes: Vec<f64> = runs.iter().map(|r| r.lifetime as f64).collect();
    EnsembleResult {
        name: config.name.clone(),
        rounds,
        lifetime: LifetimeStats::from_samples(&lifetimes),
        wasted_j_mean: runs.iter().map(|r| r.wasted_j).sum::<f64>() / n,
        wasted_pct_mean: runs.iter().map(|r| r.wasted_pct).sum::<f64>() / n,
        runs,
    }
}

/// One row of a paired-seed comparison against the first scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub lifetime_mean: f64,
    /// Mean lifetime over the baseline's mean lifetime.
    pub lifetime_ratio: f64,
    pub wasted_pct_mean: f64,
    /// `wasted_pct_mean` minus the baseline's.
    pub wasted_pct_delta: f64,
    /// Fraction of paired seeds on which this scenario outlives the baseline
    /// (ties count as wins).
    pub paired_win_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ensembles: Vec<EnsembleResult>,
    pub rows: Vec<ComparisonRow>,
}

/// Runs every scenario on the same per-run seeds and tabulates lifetimes and
/// wasted energy against the first one.
pub fn compare_strategies(
    scenarios: &[ScenarioConfig],
    runs: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Comparison> {
    if scenarios.len() < 2 {
        return Err(SimError::InvalidConfig("a comparison needs at least two scenarios".into()));
    }
    let n = scenarios[0].nodes;
    if let Some(bad) = scenarios.iter().find(|s| s.nodes != n) {
        return Err(SimError::InvalidConfig(format!(
            "paired scenarios must share the cluster size: '{}' has {} nodes, '{}' has {n}",
            bad.name, bad.nodes, scenarios[0].name
        )));
    }
    let ensembles = scenarios
        .iter()
        .map(|s| run_ensemble(s, runs, master_seed, workers))
        .collect::<Result<Vec<_>>>()?;
    let base = &ensembles[0];
    let rows = ensembles
        .iter()
        .map(|e| {
            let wins = e.runs.iter().zip(&base.runs).filter(|(a, b)| a.lifetime >= b.lifetime).count();
            ComparisonRow {
                name: e.name.clone(),
                lifetime_mean: e.lifetime.mean,
                lifetime_ratio: e.lifetime.mean / base.lifetime.mean,
                wasted_pct_mean: e.wasted_pct_mean,
                wasted_pct_delta: e.wasted_pct_mean - base.wasted_pct_mean,
                paired_win_fraction: wins as f64 / e.runs.len() as f64,
            }
        })
        .collect();
    Ok(Comparison { ensembles, rows })
}

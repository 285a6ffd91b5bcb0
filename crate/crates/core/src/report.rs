//! Output tables and the run manifest.
//!
//! A run directory holds `rounds.csv`, `summary.csv`, `runs.csv` and
//! `manifest.json`. Feeding the manifest back in as a config reproduces the
//! same files byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::montecarlo::{compare_strategies, run_ensemble, run_seed, Comparison, EnsembleResult};

pub const ARTIFACT: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeed {
    pub index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    /// Fully resolved scenario, including run count and master seed.
    pub config: ScenarioConfig,
    pub runs: Vec<RunSeed>,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            artifact: ARTIFACT.into(),
            version: VERSION.into(),
            config: config.clone(),
            runs: (0..config.run.runs)
                .map(|i| RunSeed { index: i, seed: run_seed(config.run.master_seed, i) })
                .collect(),
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(r) = self.runs {
            config.run.runs = r;
        }
        if let Some(s) = self.seed {
            config.run.master_seed = s;
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        SimError::Io(std::io::Error::new(e.kind(), format!("cannot create output directory {}: {e}", dir.display())))
    })
}

/// Runs one scenario and writes its tables into `out_dir`.
pub fn run_command(config: &ScenarioConfig, out_dir: &Path, workers: usize) -> Result<EnsembleResult> {
    config.validate()?;
    let result = run_ensemble(config, config.run.runs, config.run.master_seed, workers)?;
    write_run_outputs(config, &result, out_dir)?;
    Ok(result)
}

pub fn write_run_outputs(config: &ScenarioConfig, result: &EnsembleResult, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    write_rounds(result, &out_dir.join("rounds.csv"))?;
    write_summary(result, &out_dir.join("summary.csv"))?;
    write_runs(result, &out_dir.join("runs.csv"))?;
    let manifest = serde_json::to_string_pretty(&Manifest::new(config))?;
    fs::write(out_dir.join("manifest.json"), manifest + "\n")?;
    Ok(())
}

pub fn write_rounds(result: &EnsembleResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["round", "alive_fraction", "snr_db", "rate_bits", "residual_total_j", "surviving_runs"])?;
    for r in &result.rounds {
        w.write_record([
            r.round.to_string(),
            r.alive_fraction.to_string(),
            r.snr_db.to_string(),
            r.rate_bits.to_string(),
            r.residual_total_j.to_string(),
            r.surviving_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 11] = [
    "scenario",
    "runs",
    "lifetime_mean_rounds",
    "lifetime_std_rounds",
    "lifetime_min_rounds",
    "lifetime_p10_rounds",
    "lifetime_p50_rounds",
    "lifetime_p90_rounds",
    "lifetime_max_rounds",
    "wasted_mean_j",
    "wasted_mean_pct",
];

fn summary_fields(result: &EnsembleResult) -> Vec<String> {
    let l = &result.lifetime;
    vec![
        result.name.clone(),
        result.runs.len().to_string(),
        l.mean.to_string(),
        l.std.to_string(),
        l.min.to_string(),
        l.p10.to_string(),
        l.p50.to_string(),
        l.p90.to_string(),
        l.max.to_string(),
        result.wasted_j_mean.to_string(),
        result.wasted_pct_mean.to_string(),
    ]
}

pub fn write_summary(result: &EnsembleResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record(summary_fields(result))?;
    w.flush()?;
    Ok(())
}

pub fn write_runs(result: &EnsembleResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "seed", "lifetime_rounds", "wasted_j", "wasted_pct", "death_cause"])?;
    for r in &result.runs {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.lifetime.to_string(),
            r.wasted_j.to_string(),
            r.wasted_pct.to_string(),
            r.cause.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs several scenarios on shared seeds. Each scenario gets its own
/// subdirectory; `summary.csv` at the top compares them to the first.
pub fn compare_command(scenarios: &[ScenarioConfig], out_dir: &Path, workers: usize) -> Result<Comparison> {
    let first = scenarios
        .first()
        .ok_or_else(|| SimError::InvalidConfig("a comparison needs at least two scenarios".into()))?;
    for s in scenarios {
        s.validate()?;
    }
    let cmp = compare_strategies(scenarios, first.run.runs, first.run.master_seed, workers)?;
    ensure_dir(out_dir)?;
    for (cfg, e) in scenarios.iter().zip(&cmp.ensembles) {
        let mut cfg = cfg.clone();
        cfg.run.runs = first.run.runs;
        cfg.run.master_seed = first.run.master_seed;
        write_run_outputs(&cfg, e, &out_dir.join(&e.name))?;
    }
    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
    header.extend(["lifetime_ratio", "wasted_delta_pct", "paired_win_fraction"]);
    w.write_record(&header)?;
    for (e, row) in cmp.ensembles.iter().zip(&cmp.rows) {
        let mut fields = summary_fields(e);
        fields.extend([
            row.lifetime_ratio.to_string(),
            row.wasted_pct_delta.to_string(),
            row.paired_win_fraction.to_string(),
        ]);
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(cmp)
}

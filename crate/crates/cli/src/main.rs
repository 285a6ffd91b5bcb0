use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use cbsim_core::config::{load_config, preset, preset_group, preset_groups, presets};
use cbsim_core::{compare_command, run_command, Overrides, ScenarioConfig, SimError};
use clap::{Args, Parser, Subcommand};

/// Lifetime simulator for collaborative beamforming clusters.
#[derive(Parser)]
#[command(name = "cbsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its tables.
    Run {
        /// TOML config, or a manifest.json from an earlier run.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset name (see `cbsim presets`).
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run scenarios on shared seeds and compare them to the first.
    Compare {
        /// Two or more configs; the first is the baseline.
        #[arg(long, num_args = 1.., conflicts_with = "preset")]
        config: Vec<PathBuf>,
        /// A preset group (e.g. paper-ex3) or a comma-separated preset list.
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// List built-in presets and comparison groups.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 uses all cores). Does not affect results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { runs: self.runs, seed: self.seed }
    }
}

fn named_preset(name: &str) -> anyhow::Result<ScenarioConfig> {
    preset(name).with_context(|| format!("unknown preset '{name}'; run `cbsim presets` for the list"))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, preset, common } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => load_config(&path).with_context(|| format!("loading {}", path.display()))?,
                (None, Some(name)) => named_preset(&name)?,
                (None, None) => ScenarioConfig::default(),
            };
            common.overrides().apply(&mut cfg);
            let res = run_command(&cfg, &common.out, common.workers)?;
            println!(
                "{}: {} runs, mean lifetime {:.2} rounds, wasted energy {:.2}%",
                res.name,
                res.runs.len(),
                res.lifetime.mean,
                res.wasted_pct_mean
            );
        }
        Command::Compare { config, preset, common } => {
            let mut cfgs = if !config.is_empty() {
                config
                    .iter()
                    .map(|p| load_config(p).with_context(|| format!("loading {}", p.display())))
                    .collect::<anyhow::Result<Vec<_>>>()?
            } else if let Some(spec) = preset {
                match preset_group(&spec) {
                    Some(group) => group,
                    None => spec.split(',').map(|s| named_preset(s.trim())).collect::<anyhow::Result<_>>()?,
                }
            } else {
                bail!("compare needs --config files or --preset");
            };
            if cfgs.len() < 2 {
                bail!("compare needs at least two scenarios, got {}", cfgs.len());
            }
            for c in &mut cfgs {
                common.overrides().apply(c);
            }
            let cmp = compare_command(&cfgs, &common.out, common.workers)?;
            for row in &cmp.rows {
                println!(
                    "{}: mean lifetime {:.2} rounds (ratio {:.3}), wasted energy {:.2}%",
                    row.name, row.lifetime_mean, row.lifetime_ratio, row.wasted_pct_mean
                );
            }
        }
        Command::Presets => {
            for p in presets() {
                println!("{}", p.name);
            }
            println!();
            for (group, members) in preset_groups() {
                println!("{group}: {}", members.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<SimError>() {
                Some(SimError::Infeasible(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

//! Lifetime simulation of collaborative beamforming clusters.
//!
//! Nodes in a disk beamform toward one or more far-field destinations each
//! time slot. Transmit weights come from one of several allocation rules,
//! batteries drain slot by slot, and a cluster dies when too few nodes remain
//! or the received SNR sags below its target.

// `!(x > 0.0)` is how inputs are checked throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod config;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod lifetime;
pub mod montecarlo;
pub mod report;

pub use config::{load_config, preset, presets, ScenarioConfig, SimParams};
pub use error::{Result, SimError};
pub use lifetime::{simulate, DeathCause, LifetimeTrace, Strategy, StrategyKind};
pub use montecarlo::{compare_strategies, run_ensemble, Comparison, EnsembleResult};
pub use report::{compare_command, run_command, Manifest, Overrides};

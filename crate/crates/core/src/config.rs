//! Scenario configuration: TOML ingestion, validation, presets and the
//! resolved parameter set consumed by the round engine.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{ChannelStats, QuantizationGrid};
use crate::energy::{EnergyDistribution, LinkBudget, WastedNormalization};
use crate::error::{Result, SimError};
use crate::geometry::ShadowingModel;
use crate::lifetime::{DeathCriteria, PartitionPolicy, Strategy, StrategyKind};

/// Default per-node power cap, watts.
pub const DEFAULT_P_MAX_W: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub nodes: usize,
    pub disk_radius_wavelengths: f64,
    /// Carrier wavelength used to express the destination range in
    /// wavelengths.
    pub carrier_wavelength_m: f64,
    pub destinations: DestinationsConfig,
    pub link: LinkConfig,
    pub channel: ChannelConfig,
    pub energy: EnergyConfig,
    pub strategy: StrategyConfig,
    pub death: DeathCriteria,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DestinationsConfig {
    pub range_m: f64,
    /// Number of simultaneous links `K`.
    pub count: usize,
    /// Explicit azimuths; evenly spaced from 0° when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuths_deg: Option<Vec<f64>>,
    pub partition: PartitionPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Total cluster bit rate, bits/s/Hz. Mutually exclusive with
    /// `target_snr_db`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rate_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_snr_db: Option<f64>,
    pub noise_db: f64,
    pub pl0_db: f64,
    pub d0_m: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub shadowing_sigma2_db: f64,
    /// Divisor in `a_i = 10^(A_i / divisor)`.
    pub amplitude_divisor: f64,
    pub phase_error_deg_bound: f64,
    /// Re-draw the channel every this many rounds; 0 keeps it fixed.
    pub redraw_period: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub kind: EnergyKind,
    pub e_max_j: f64,
    /// Distribution mean. Must equal `e_max_j / 2` for the uniform law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_j: Option<f64>,
    /// Gaussian standard deviation; defaults to `0.15·e_max_j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_j: Option<f64>,
    pub wasted_normalization: WastedNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Quantisation levels `L` of the normalised weights; 0 = continuous.
    pub levels: u32,
    /// Reallocation period in slots.
    pub period: u64,
    pub grid: QuantizationGrid,
    pub scaling: ScaleRule,
    pub feedback_step_db: f64,
    pub feedback_tolerance_db: f64,
    pub equal_power_sizing: EqualPowerSizing,
    pub weight_stats: WeightStats,
}

/// Where CB-PA takes `m_u` and `σ_u²` from when sizing `w_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStats {
    /// Moments of `e_i/E_max` over the alive nodes, before quantisation.
    Rei,
    /// Moments of the quantised weights actually transmitted.
    #[default]
    Quantized,
}

/// How CB-PA obtains its common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// Closed form from the average-SNR expression.
    #[default]
    Analytic,
    /// Receiver-driven step adjustment, started from the closed form.
    Feedback,
}

/// Node count used in the equal-power weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualPowerSizing {
    /// Sized once for the full link membership; dead nodes leave a gap.
    #[default]
    Initial,
    /// Re-sized every allocation to the alive count.
    Alive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Per-round means over runs still alive at that round.
    #[default]
    Surviving,
    /// Dead runs contribute zeros.
    ZeroFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrAveraging {
    #[default]
    Linear,
    Db,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub runs: usize,
    pub master_seed: u64,
    pub t_slot_s: f64,
    pub p_max_w: f64,
    pub max_rounds: u64,
    pub averaging: Averaging,
    pub snr_average: SnrAveraging,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "paper-ex1-uniform".into(),
            nodes: 100,
            disk_radius_wavelengths: 250.0,
            carrier_wavelength_m: 0.125,
            destinations: DestinationsConfig::default(),
            link: LinkConfig::default(),
            channel: ChannelConfig::default(),
            energy: EnergyConfig::default(),
            strategy: StrategyConfig::default(),
            death: DeathCriteria::default(),
            run: RunConfig::default(),
        }
    }
}

impl Default for DestinationsConfig {
    fn default() -> Self {
        Self { range_m: 1000.0, count: 1, azimuths_deg: None, partition: PartitionPolicy::RoundRobin }
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            target_rate_bits: None,
            target_snr_db: None,
            noise_db: -100.0,
            pl0_db: 40.0,
            d0_m: 1.0,
            alpha: 2.0,
        }
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { shadowing_sigma2_db: 16.0, amplitude_divisor: 10.0, phase_error_deg_bound: 5.0, redraw_period: 0 }
    }
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            kind: EnergyKind::Uniform,
            e_max_j: 1.0,
            mean_j: None,
            sigma_j: None,
            wasted_normalization: WastedNormalization::DistributionMean,
        }
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::CbPa,
            levels: 8,
            period: 1,
            grid: QuantizationGrid::IncludeZero,
            scaling: ScaleRule::Analytic,
            feedback_step_db: 0.5,
            feedback_tolerance_db: 0.25,
            equal_power_sizing: EqualPowerSizing::Initial,
            weight_stats: WeightStats::Quantized,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            runs: 200,
            master_seed: 1,
            t_slot_s: 1.0,
            p_max_w: DEFAULT_P_MAX_W,
            max_rounds: 1_000_000,
            averaging: Averaging::Surviving,
            snr_average: SnrAveraging::Linear,
        }
    }
}

/// Bit rate `log2(1 + γ)` for a linear SNR.
pub fn rate_from_snr(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Linear SNR needed for `rate` bits/s/Hz.
pub fn snr_from_rate(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{key} must be a positive finite number, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// Total cluster rate implied by the target, bits/s/Hz.
    pub fn total_rate_bits(&self) -> f64 {
        match (self.link.target_rate_bits, self.link.target_snr_db) {
            (_, Some(db)) => rate_from_snr(db_to_linear(db)),
            (Some(r), None) => r,
            (None, None) => 4.0,
        }
    }

    /// Per-link linear SNR target. The total rate is split evenly over the
    /// `K` links, so a single link targets the full rate.
    pub fn link_target_snr(&self) -> f64 {
        let k = self.destinations.count.max(1) as f64;
        match (self.destinations.count, self.link.target_snr_db) {
            (1, Some(db)) => db_to_linear(db),
            _ => snr_from_rate(self.total_rate_bits() / k),
        }
    }

    pub fn link_budget(&self) -> LinkBudget {
        LinkBudget {
            pl0_db: self.link.pl0_db,
            alpha: self.link.alpha,
            distance_m: self.destinations.range_m,
            d0_m: self.link.d0_m,
            noise_db: self.link.noise_db,
        }
    }

    pub fn energy_distribution(&self) -> EnergyDistribution {
        let cap = self.energy.e_max_j;
        match self.energy.kind {
            EnergyKind::Uniform => EnergyDistribution::Uniform { capacity: cap },
            EnergyKind::Gaussian => EnergyDistribution::Gaussian {
                mean: self.energy.mean_j.unwrap_or(cap / 2.0),
                sigma: self.energy.sigma_j.unwrap_or(0.15 * cap),
                capacity: cap,
            },
        }
    }

    pub fn azimuths_rad(&self) -> Vec<f64> {
        let k = self.destinations.count;
        match &self.destinations.azimuths_deg {
            Some(v) => v.iter().map(|d| d.to_radians()).collect(),
            None => (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(invalid("nodes must be >= 1"));
        }
        positive("disk_radius_wavelengths", self.disk_radius_wavelengths)?;
        positive("carrier_wavelength_m", self.carrier_wavelength_m)?;
        positive("destinations.range_m", self.destinations.range_m)?;
        let k = self.destinations.count;
        if k == 0 {
            return Err(invalid("destinations.count must be >= 1"));
        }
        if k > self.nodes {
            return Err(invalid(format!("destinations.count ({k}) exceeds nodes ({})", self.nodes)));
        }
        if let Some(az) = &self.destinations.azimuths_deg {
            if az.len() != k {
                return Err(invalid(format!(
                    "destinations.azimuths_deg has {} entries, expected count = {k}",
                    az.len()
                )));
            }
            if az.iter().any(|a| !a.is_finite()) {
                return Err(invalid("destinations.azimuths_deg must be finite"));
            }
        }
        match (self.link.target_rate_bits, self.link.target_snr_db) {
            (Some(_), Some(_)) => {
                return Err(invalid("set exactly one of link.target_rate_bits and link.target_snr_db"))
            }
            (Some(r), None) if !(r >= 0.0 && r.is_finite()) => {
                return Err(invalid(format!("link.target_rate_bits must be >= 0, got {r}")))
            }
            (None, Some(db)) if !db.is_finite() => return Err(invalid("link.target_snr_db must be finite")),
            _ => {}
        }
        self.link_budget().validate()?;
        let range_wl = self.destinations.range_m / self.carrier_wavelength_m;
        if range_wl <= self.disk_radius_wavelengths {
            return Err(invalid(format!(
                "destination range ({range_wl} wavelengths) must exceed the disk radius ({})",
                self.disk_radius_wavelengths
            )));
        }
        ShadowingModel::new(self.channel.shadowing_sigma2_db, self.channel.amplitude_divisor)
            .map_err(|e| invalid(format!("channel: {e}")))?;
        let b = self.channel.phase_error_deg_bound;
        if !(0.0..=180.0).contains(&b) {
            return Err(invalid(format!("channel.phase_error_deg_bound must lie in [0, 180], got {b}")));
        }
        positive("energy.e_max_j", self.energy.e_max_j)?;
        if self.energy.kind == EnergyKind::Uniform {
            if let Some(m) = self.energy.mean_j {
                if (m - self.energy.e_max_j / 2.0).abs() > 1e-12 * self.energy.e_max_j {
                    return Err(invalid(format!(
                        "energy.mean_j = {m} is incompatible with the uniform law on [0, e_max_j]"
                    )));
                }
            }
        }
        self.energy_distribution().validate()?;
        if self.strategy.period == 0 {
            return Err(invalid("strategy.period must be >= 1"));
        }
        if self.strategy.scaling == ScaleRule::Feedback {
            positive("strategy.feedback_step_db", self.strategy.feedback_step_db)?;
            positive("strategy.feedback_tolerance_db", self.strategy.feedback_tolerance_db)?;
        }
        let f = self.death.max_dead_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid(format!("death.max_dead_fraction must lie in (0, 1], got {f}")));
        }
        positive("death.snr_drop_db", self.death.snr_drop_db)?;
        if self.run.runs == 0 {
            return Err(invalid("run.runs must be >= 1"));
        }
        positive("run.t_slot_s", self.run.t_slot_s)?;
        if !(self.run.p_max_w > 0.0) {
            return Err(invalid(format!("run.p_max_w must be > 0, got {}", self.run.p_max_w)));
        }
        if self.run.max_rounds == 0 {
            return Err(invalid("run.max_rounds must be >= 1"));
        }
        Ok(())
    }

    /// Validates and derives the numeric parameters of one scenario.
    pub fn resolve(&self) -> Result<SimParams> {
        self.validate()?;
        let shadowing = ShadowingModel::new(self.channel.shadowing_sigma2_db, self.channel.amplitude_divisor)?;
        let target = self.link_target_snr();
        Ok(SimParams {
            nodes: self.nodes,
            disk_radius: self.disk_radius_wavelengths,
            dest_range: self.destinations.range_m / self.carrier_wavelength_m,
            azimuths: self.azimuths_rad(),
            partition: self.destinations.partition,
            link_target_snr: target,
            noise_power: self.link_budget().effective_noise_power(),
            shadowing,
            channel_stats: shadowing.channel_stats(),
            redraw_period: self.channel.redraw_period,
            phase_error_bound: self.channel.phase_error_deg_bound.to_radians(),
            energy: self.energy_distribution(),
            wasted_normalization: self.energy.wasted_normalization,
            slot_length: self.run.t_slot_s,
            p_max: self.run.p_max_w,
            strategy: Strategy {
                kind: self.strategy.kind,
                quantization_levels: self.strategy.levels,
                reallocation_period: self.strategy.period,
                grid: self.strategy.grid,
                scaling: self.strategy.scaling,
                feedback_step_db: self.strategy.feedback_step_db,
                feedback_tolerance_db: self.strategy.feedback_tolerance_db,
                equal_power_sizing: self.strategy.equal_power_sizing,
                weight_stats: self.strategy.weight_stats,
            },
            death: self.death,
            max_rounds: self.run.max_rounds,
        })
    }
}

/// Numeric parameters of one scenario, derived from a validated
/// [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub nodes: usize,
    /// Wavelengths.
    pub disk_radius: f64,
    /// Wavelengths.
    pub dest_range: f64,
    /// Radians, one per link.
    pub azimuths: Vec<f64>,
    pub partition: PartitionPolicy,
    /// Linear SNR target of every link.
    pub link_target_snr: f64,
    /// Noise referred to the transmitter, linear.
    pub noise_power: f64,
    pub shadowing: ShadowingModel,
    pub channel_stats: ChannelStats,
    pub redraw_period: u64,
    /// Radians.
    pub phase_error_bound: f64,
    pub energy: EnergyDistribution,
    pub wasted_normalization: WastedNormalization,
    pub slot_length: f64,
    pub p_max: f64,
    pub strategy: Strategy,
    pub death: DeathCriteria,
    pub max_rounds: u64,
}

/// Reads a scenario from a TOML file, or from the `config` field of a run
/// manifest when the extension is `.json`.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: crate::report::Manifest = serde_json::from_str(&text)?;
        manifest.config.validate()?;
        return Ok(manifest.config);
    }
    ScenarioConfig::from_toml_str(&text).map_err(|e| match e {
        SimError::Parse(m) => SimError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn named(name: &str, f: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut cfg = ScenarioConfig { name: name.into(), ..ScenarioConfig::default() };
    f(&mut cfg);
    cfg
}

fn equal_power(cfg: &mut ScenarioConfig) {
    cfg.strategy.kind = StrategyKind::CbEpa;
    cfg.strategy.levels = 0;
}

fn gaussian(cfg: &mut ScenarioConfig) {
    cfg.energy.kind = EnergyKind::Gaussian;
}

/// Every single-scenario preset.
pub fn presets() -> Vec<ScenarioConfig> {
    vec![
        named("paper-ex1-uniform", |_| {}),
        named("paper-ex1-uniform-epa", equal_power),
        named("paper-ex1-gaussian", gaussian),
        named("paper-ex1-gaussian-epa", |c| {
            gaussian(c);
            equal_power(c);
        }),
        named("paper-ex2-single-link", gaussian),
        named("paper-ex2-multi-link", |c| {
            gaussian(c);
            c.destinations.count = 2;
        }),
        named("paper-ex3-rate4", |c| c.link.target_rate_bits = Some(4.0)),
        named("paper-ex3-rate3", |c| c.link.target_rate_bits = Some(3.0)),
        named("paper-ex4-levels2", |c| c.strategy.levels = 2),
        named("paper-ex4-levels4", |c| c.strategy.levels = 4),
        named("paper-ex4-levels8", |c| c.strategy.levels = 8),
    ]
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    presets().into_iter().find(|p| p.name == name)
}

/// Named comparison groups; the first scenario is the baseline.
pub fn preset_groups() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        (
            "paper-ex1",
            vec!["paper-ex1-uniform-epa", "paper-ex1-uniform", "paper-ex1-gaussian-epa", "paper-ex1-gaussian"],
        ),
        ("paper-ex2", vec!["paper-ex2-single-link", "paper-ex2-multi-link"]),
        ("paper-ex3", vec!["paper-ex3-rate4", "paper-ex3-rate3"]),
        ("paper-ex4", vec!["paper-ex4-levels2", "paper-ex4-levels4", "paper-ex4-levels8"]),
    ]
}

pub fn preset_group(name: &str) -> Option<Vec<ScenarioConfig>> {
    let (_, members) = preset_groups().into_iter().find(|(g, _)| *g == name)?;
    members.into_iter().map(preset).collect()
}

//! The time-slotted round engine.
//!
//! Each round: reallocate weights on period boundaries, gate nodes that
//! cannot fund their slot, evaluate the realised SNR per link, charge the
//! energies and test the death criteria. With `K > 1` destinations the
//! cluster is split into disjoint sub-clusters that beamform independently;
//! inter-link interference is not modelled.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    cbepa_weight, cbpa_normalized_weights, compute_wmax, quantize_weights_on, rei_stats, solve_max_gain,
    solve_min_power, QuantizationGrid, WmaxController,
};
use crate::config::{EqualPowerSizing, ScaleRule, WeightStats, ScenarioConfig, SimParams};
use crate::energy::{sample_initial_energies, wasted_energy, EnergyState, WastedEnergy};
use crate::error::{Result, SimError};
use crate::geometry::{deploy_cluster, received_snr, residual_phase, Destination, PhaseErrors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    CbEpa,
    CbPa,
    CentralizedMinPower,
    CentralizedMaxGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub quantization_levels: u32,
    pub reallocation_period: u64,
    pub grid: QuantizationGrid,
    pub scaling: ScaleRule,
    pub feedback_step_db: f64,
    pub feedback_tolerance_db: f64,
    pub equal_power_sizing: EqualPowerSizing,
    pub weight_stats: WeightStats,
}

/// When a link (sub-cluster) is declared dead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeathCriteria {
    /// Dead once strictly more than this fraction of nodes has died.
    #[serde(rename = "fraction")]
    pub max_dead_fraction: f64,
    /// Dead once the realised SNR falls more than this far below nominal.
    pub snr_drop_db: f64,
}

impl Default for DeathCriteria {
    fn default() -> Self {
        Self { max_dead_fraction: 0.9, snr_drop_db: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    NodeCount,
    Snr,
    MaxRounds,
}

impl DeathCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NodeCount => "node_count",
            Self::Snr => "snr",
            Self::MaxRounds => "max_rounds",
        }
    }
}

/// Snapshot of one link used by [`evaluate_death`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStatus {
    pub alive_nodes: usize,
    pub total_nodes: usize,
    /// Realised linear SNR this round.
    pub snr: f64,
}

/// Returns the cause of death, or `None` while the link is alive. The node
/// count criterion is checked first.
pub fn evaluate_death(status: &LinkStatus, criteria: &DeathCriteria, nominal_snr: f64) -> Option<DeathCause> {
    let dead = status.total_nodes.saturating_sub(status.alive_nodes) as f64;
    if dead > criteria.max_dead_fraction * status.total_nodes as f64 {
        return Some(DeathCause::NodeCount);
    }
    let floor = nominal_snr * 10f64.powf(-criteria.snr_drop_db / 10.0);
    if status.snr < floor {
        return Some(DeathCause::Snr);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPolicy {
    #[default]
    RoundRobin,
    Random,
}

/// Disjoint assignment of nodes to links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Link index of every node.
    pub assignments: Vec<usize>,
    pub k: usize,
    /// `k` does not divide `n`; the last link took the extra nodes.
    pub remainder_absorbed: bool,
}

impl ClusterPartition {
    pub fn members(&self, link: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &l)| l == link).map(|(i, _)| i).collect()
    }
}

/// Splits `n` nodes into `k` links of `n / k` nodes each; the last link
/// absorbs any remainder.
pub fn partition_cluster<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    policy: PartitionPolicy,
    rng: &mut R,
) -> Result<ClusterPartition> {
    if k == 0 || k > n {
        return Err(SimError::InvalidConfig(format!("cannot split {n} nodes into {k} links")));
    }
    let per = n / k;
    let mut order: Vec<usize> = (0..n).collect();
    if policy == PartitionPolicy::Random {
        order.shuffle(rng);
    }
    let mut assignments = vec![0; n];
    for (slot, &node) in order.iter().enumerate() {
        assignments[node] = match policy {
            _ if slot >= per * k => k - 1,
            PartitionPolicy::RoundRobin => slot % k,
            PartitionPolicy::Random => slot / per,
        };
    }
    Ok(ClusterPartition { assignments, k, remainder_absorbed: !n.is_multiple_of(k) })
}

/// Spectral efficiency `log2(1 + γ)`, bits/s/Hz.
pub fn bit_rate(snr: f64) -> f64 {
    crate::config::rate_from_snr(snr.max(0.0))
}

/// Sum rate of simultaneously active links.
pub fn multi_link_rate(link_snrs: &[f64]) -> f64 {
    link_snrs.iter().map(|&s| bit_rate(s)).sum()
}

/// `E_b/N_0 = (B / f_b)·γ`.
pub fn ebn0_from_snr(snr: f64, bandwidth_hz: f64, bit_rate_bps: f64) -> Result<f64> {
    if bit_rate_bps == 0.0 {
        return Err(SimError::UndefinedRatio("bit rate is zero".into()));
    }
    Ok(bandwidth_hz / bit_rate_bps * snr)
}

/// One round of a lifetime trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub alive_fraction: f64,
    /// Realised linear SNR per link, `None` once the link is dead.
    pub link_snr: Vec<Option<f64>>,
    pub total_rate_bits: f64,
    pub residual_total_j: f64,
}

impl RoundRecord {
    /// Mean linear SNR over the links alive this round.
    pub fn mean_snr(&self) -> f64 {
        let alive: Vec<f64> = self.link_snr.iter().flatten().copied().collect();
        if alive.is_empty() {
            0.0
        } else {
            alive.iter().sum::<f64>() / alive.len() as f64
        }
    }
}

/// Per-round history plus the terminal summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeTrace {
    /// Rounds in which at least one link met its criteria.
    pub records: Vec<RoundRecord>,
    /// `τ`, in slots; equals `records.len()`.
    pub lifetime: u64,
    pub wasted: WastedEnergy,
    /// Cause of the last link's death.
    pub cause: DeathCause,
    pub link_lifetimes: Vec<u64>,
    pub link_causes: Vec<DeathCause>,
    pub initial_total_j: f64,
}

/// State handed to an observer after every charged round.
pub struct RoundView<'a> {
    pub round: u64,
    pub energy: &'a EnergyState,
    pub weights: &'a [f64],
}

struct Link {
    members: Vec<usize>,
    gains: Vec<f64>,
    phases: Vec<f64>,
    alive: bool,
    lifetime: u64,
    cause: Option<DeathCause>,
    weights: Vec<f64>,
    controller: Option<WmaxController>,
}

impl Link {
    fn alive_members(&self, state: &EnergyState) -> Vec<usize> {
        (0..self.members.len()).filter(|&j| state.alive[self.members[j]]).collect()
    }

    /// New member-indexed weights for this link. `first` marks the opening
    /// allocation, where an unreachable target is an error rather than a
    /// gradual death.
    fn allocate(&mut self, p: &SimParams, state: &EnergyState, first: bool) -> Result<Vec<f64>> {
        let m = self.members.len();
        let alive = self.alive_members(state);
        let mut w = vec![0.0; m];
        if alive.is_empty() {
            return Ok(w);
        }
        let cap = p.p_max.sqrt();
        let target = p.link_target_snr;
        let s = &p.strategy;
        let grid = s.grid;
        let levels = s.quantization_levels;
        let unreachable = |what: &str, value: f64| {
            SimError::Infeasible(format!(
                "target SNR {:.2} dB unreachable: {what} = {value:.4e} exceeds sqrt(P_max) = {cap:.4e}",
                crate::config::linear_to_db(target)
            ))
        };
        match s.kind {
            StrategyKind::CbEpa => {
                let n = match s.equal_power_sizing {
                    EqualPowerSizing::Initial => m,
                    EqualPowerSizing::Alive => alive.len(),
                };
                let mut weight = cbepa_weight(target, n, &p.channel_stats, p.noise_power)?;
                if weight > cap {
                    if first {
                        return Err(unreachable("equal-power weight", weight));
                    }
                    weight = cap;
                }
                let u = quantize_weights_on(&vec![1.0; alive.len()], levels, grid);
                for (&j, uj) in alive.iter().zip(u) {
                    w[j] = weight * uj;
                }
            }
            StrategyKind::CbPa => {
                let residuals: Vec<f64> = alive.iter().map(|&j| state.residual[self.members[j]]).collect();
                let u = quantize_weights_on(&cbpa_normalized_weights(&residuals, state.capacity)?, levels, grid);
                let stats = match s.weight_stats {
                    WeightStats::Rei => rei_stats(&residuals, state.capacity)?,
                    WeightStats::Quantized => rei_stats(&u, 1.0)?,
                };
                let analytic = match compute_wmax(target, alive.len(), &stats, &p.channel_stats, p.noise_power, p.p_max) {
                    Ok(sol) => {
                        if sol.exceeds_cap && first {
                            return Err(unreachable("w_max", sol.w_max));
                        }
                        sol.w_max.min(cap)
                    }
                    // fully depleted cluster: nothing left to transmit
                    Err(SimError::Infeasible(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                let scale = match (s.scaling, self.controller.as_ref()) {
                    (ScaleRule::Analytic, _) => analytic,
                    (ScaleRule::Feedback, Some(c)) => c.w_max,
                    (ScaleRule::Feedback, None) => {
                        let c = WmaxController::new(analytic, s.feedback_step_db, s.feedback_tolerance_db, p.p_max);
                        self.controller = Some(c);
                        c.w_max
                    }
                };
                for (&j, uj) in alive.iter().zip(u) {
                    w[j] = scale * uj;
                }
            }
            StrategyKind::CentralizedMinPower | StrategyKind::CentralizedMaxGain => {
                let a: Vec<f64> = alive.iter().map(|&j| self.gains[j]).collect();
                let solved = if s.kind == StrategyKind::CentralizedMinPower {
                    solve_min_power(&a, target * p.noise_power, p.p_max)
                } else {
                    let w_eq = cbepa_weight(target, m, &p.channel_stats, p.noise_power)?;
                    let p_tot = (m as f64 * w_eq * w_eq).min(alive.len() as f64 * p.p_max);
                    solve_max_gain(&a, p_tot, p.p_max)
                };
                let wv = match solved {
                    Ok(wv) => wv,
                    Err(SimError::Infeasible(msg)) if first => return Err(SimError::Infeasible(msg)),
                    // best effort once the cluster can no longer reach the target
                    Err(SimError::Infeasible(_)) => {
                        crate::allocation::WeightVector::from_amplitudes(vec![cap; a.len()], p.p_max)
                    }
                    Err(e) => return Err(e),
                };
                let u = quantize_weights_on(&wv.normalized, levels, grid);
                for (&j, uj) in alive.iter().zip(u) {
                    w[j] = wv.scale * uj;
                }
            }
        }
        Ok(w)
    }
}

/// Runs one lifetime simulation of `config`.
pub fn run_lifetime<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<LifetimeTrace> {
    simulate(&config.resolve()?, rng)
}

pub fn simulate<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<LifetimeTrace> {
    simulate_observed(params, rng, |_| {})
}

/// [`simulate`] with a callback after every charged round.
pub fn simulate_observed<R: Rng + ?Sized>(
    p: &SimParams,
    rng: &mut R,
    mut observer: impl FnMut(&RoundView<'_>),
) -> Result<LifetimeTrace> {
    let n = p.nodes;
    let k = p.azimuths.len();
    let nodes = deploy_cluster(n, p.disk_radius, rng)?;
    let initial = sample_initial_energies(&p.energy, n, rng)?;
    let phase_errors = PhaseErrors::sample_uniform(n, p.phase_error_bound, rng)?;
    let channels: Vec<Vec<f64>> = (0..k).map(|_| p.shadowing.sample(n, rng).gains).collect();
    let partition = partition_cluster(n, k, p.partition, rng)?;

    let destinations: Vec<Destination> = p
        .azimuths
        .iter()
        .enumerate()
        .map(|(i, &az)| Destination::new(i, p.dest_range, az))
        .collect::<Result<_>>()?;

    let mut links: Vec<Link> = (0..k)
        .map(|l| {
            let members = partition.members(l);
            let dest = &destinations[l];
            let phases = members.iter().map(|&i| residual_phase(nodes[i], dest, phase_errors.errors[i])).collect();
            let gains = members.iter().map(|&i| channels[l][i]).collect();
            let m = members.len();
            Link {
                members,
                gains,
                phases,
                alive: true,
                lifetime: 0,
                cause: None,
                weights: vec![0.0; m],
                controller: None,
            }
        })
        .collect();

    let mut state = EnergyState::new(initial, p.slot_length, p.energy.capacity())?;
    let initial_total_j = state.initial.iter().sum();
    let nominal = p.link_target_snr;
    let mut records = Vec::new();
    let mut weights = vec![0.0; n];
    let mut member_w: Vec<f64> = Vec::with_capacity(n);

    for round in 1..=p.max_rounds {
        if p.redraw_period > 0 && round > 1 && (round - 1) % p.redraw_period == 0 {
            for link in &mut links {
                let fresh = p.shadowing.sample(n, rng).gains;
                link.gains = link.members.iter().map(|&i| fresh[i]).collect();
            }
        }
        let reallocate = (round - 1) % p.strategy.reallocation_period == 0;
        weights.iter_mut().for_each(|w| *w = 0.0);
        for link in links.iter_mut().filter(|l| l.alive) {
            if reallocate {
                link.weights = link.allocate(p, &state, round == 1)?;
            }
            for (&i, &w) in link.members.iter().zip(&link.weights) {
                weights[i] = w;
            }
        }
        state.gate(&mut weights);

        let mut link_snr = vec![None; k];
        for (l, link) in links.iter().enumerate().filter(|(_, l)| l.alive) {
            member_w.clear();
            member_w.extend(link.members.iter().map(|&i| weights[i]));
            link_snr[l] = Some(received_snr(&member_w, &link.gains, &link.phases, p.noise_power)?);
        }
        state.charge(&weights);
        observer(&RoundView { round, energy: &state, weights: &weights });

        for (l, link) in links.iter_mut().enumerate().filter(|(_, l)| l.alive) {
            let snr = link_snr[l].expect("alive link has an SNR");
            let status = LinkStatus {
                alive_nodes: link.members.iter().filter(|&&i| state.alive[i]).count(),
                total_nodes: link.members.len(),
                snr,
            };
            if let Some(cause) = evaluate_death(&status, &p.death, nominal) {
                link.alive = false;
                link.lifetime = round - 1;
                link.cause = Some(cause);
                link_snr[l] = None;
            } else if let Some(c) = link.controller.as_mut() {
                c.update(snr, nominal);
            }
        }
        if links.iter().all(|l| !l.alive) {
            break;
        }
        let alive_snrs: Vec<f64> = link_snr.iter().flatten().copied().collect();
        records.push(RoundRecord {
            round,
            alive_fraction: state.alive_count() as f64 / n as f64,
            total_rate_bits: multi_link_rate(&alive_snrs),
            link_snr,
            residual_total_j: state.total_residual(),
        });
    }
    for link in links.iter_mut().filter(|l| l.alive) {
        link.lifetime = p.max_rounds;
        link.cause = Some(DeathCause::MaxRounds);
    }

    let last = links.iter().max_by_key(|l| l.lifetime).expect("at least one link");
    Ok(LifetimeTrace {
        lifetime: records.len() as u64,
        cause: last.cause.expect("every link has a cause"),
        link_lifetimes: links.iter().map(|l| l.lifetime).collect(),
        link_causes: links.iter().map(|l| l.cause.expect("every link has a cause")).collect(),
        wasted: wasted_energy(&state, p.energy.mean(), p.wasted_normalization),
        initial_total_j,
        records,
    })
}

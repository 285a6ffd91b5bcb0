//! Per-node energy accounting, the free-space link budget and initial-energy
//! distributions.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// How initial energies are spread over the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyDistribution {
    /// i.i.d. `U[0, capacity]`; the mean is `capacity / 2`.
    Uniform { capacity: f64 },
    /// i.i.d. `N(mean, sigma²)` clamped to `[0, capacity]`.
    Gaussian { mean: f64, sigma: f64, capacity: f64 },
}

impl EnergyDistribution {
    pub fn capacity(&self) -> f64 {
        match *self {
            Self::Uniform { capacity } | Self::Gaussian { capacity, .. } => capacity,
        }
    }

    /// Nominal mean `m_e` used to normalise the wasted-energy percentage.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { capacity } => capacity / 2.0,
            Self::Gaussian { mean, .. } => mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.capacity();
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(SimError::InvalidConfig(format!("energy.e_max_j must be > 0, got {cap}")));
        }
        if let Self::Gaussian { mean, sigma, .. } = *self {
            if !(mean > 0.0 && mean <= cap) {
                return Err(SimError::InvalidConfig(format!(
                    "energy.mean_j must lie in (0, e_max_j], got {mean}"
                )));
            }
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(SimError::InvalidConfig(format!(
                    "energy.sigma_j must be >= 0, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws `n` initial energies.
pub fn sample_initial_energies<R: Rng + ?Sized>(
    dist: &EnergyDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    dist.validate()?;
    if n == 0 {
        return Err(SimError::InvalidConfig("cluster size must be at least 1".into()));
    }
    Ok(match *dist {
        EnergyDistribution::Uniform { capacity } => {
            let u = Uniform::new_inclusive(0.0, capacity).expect("valid interval");
            (0..n).map(|_| u.sample(rng)).collect()
        }
        EnergyDistribution::Gaussian { mean, sigma, capacity } => {
            if sigma == 0.0 {
                vec![mean; n]
            } else {
                let g = Normal::new(mean, sigma).expect("finite sigma");
                (0..n).map(|_| g.sample(rng).clamp(0.0, capacity)).collect()
            }
        }
    })
}

/// Energy drawn by the power amplifier during one slot: `w²·T`.
pub fn slot_energy(weight: f64, slot_length: f64) -> f64 {
    weight * weight * slot_length
}

/// Free-space link budget with a log-distance path-loss law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub pl0_db: f64,
    pub alpha: f64,
    pub distance_m: f64,
    pub d0_m: f64,
    pub noise_db: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(SimError::InvalidConfig(format!("link.alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.d0_m > 0.0) {
            return Err(SimError::InvalidConfig(format!("link.d0_m must be > 0, got {}", self.d0_m)));
        }
        if !(self.distance_m >= self.d0_m) {
            return Err(SimError::InvalidConfig(format!(
                "destinations.range_m ({}) must be >= link.d0_m ({})",
                self.distance_m, self.d0_m
            )));
        }
        for (key, v) in [("link.pl0_db", self.pl0_db), ("link.noise_db", self.noise_db)] {
            if !v.is_finite() {
                return Err(SimError::InvalidConfig(format!("{key} must be finite")));
            }
        }
        Ok(())
    }

    /// `PL_0 + 10·α·log10(d/d0)`, dB.
    pub fn path_loss_db(&self) -> f64 {
        self.pl0_db + 10.0 * self.alpha * (self.distance_m / self.d0_m).log10()
    }

    /// Total transmit power needed to deliver `target_snr_db` over the
    /// deterministic path loss, dB.
    pub fn required_tx_power_db(&self, target_snr_db: f64) -> f64 {
        let rx_db = target_snr_db + self.noise_db;
        rx_db + self.path_loss_db()
    }

    /// Receiver noise referred back to the transmitter side, linear. This is
    /// the `σ_n²` that pairs with unit-mean-free amplitude gains `a_i`.
    pub fn effective_noise_power(&self) -> f64 {
        10f64.powf((self.noise_db + self.path_loss_db()) / 10.0)
    }
}

/// Relative slack when checking whether a battery can fund a slot.
const FUNDING_RTOL: f64 = 1e-12;

/// Residual-energy bookkeeping for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub initial: Vec<f64>,
    pub residual: Vec<f64>,
    /// Cumulative energy drawn by each node.
    pub consumed: Vec<f64>,
    pub alive: Vec<bool>,
    pub slot_length: f64,
    pub capacity: f64,
}

impl EnergyState {
    pub fn new(initial: Vec<f64>, slot_length: f64, capacity: f64) -> Result<Self> {
        if !(slot_length > 0.0) {
            return Err(SimError::InvalidConfig(format!("run.t_slot_s must be > 0, got {slot_length}")));
        }
        if let Some(bad) = initial.iter().find(|&&e| !(0.0..=capacity).contains(&e)) {
            return Err(SimError::InvalidInput(format!(
                "initial energy {bad} outside [0, {capacity}]"
            )));
        }
        let n = initial.len();
        Ok(Self {
            residual: initial.clone(),
            initial,
            consumed: vec![0.0; n],
            alive: vec![true; n],
            slot_length,
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn total_residual(&self) -> f64 {
        self.residual.iter().sum()
    }

    /// Silences dead nodes and kills every alive node that cannot fund its
    /// full slot energy. Returns the indices of newly dead nodes.
    pub fn gate(&mut self, weights: &mut [f64]) -> Vec<usize> {
        assert_eq!(weights.len(), self.len(), "weight vector length");
        let mut newly_dead = Vec::new();
        for (i, w) in weights.iter_mut().enumerate() {
            if !self.alive[i] {
                *w = 0.0;
                continue;
            }
            // tolerate rounding in w² when a slot exactly drains the battery
            if slot_energy(*w, self.slot_length) > self.residual[i] * (1.0 + FUNDING_RTOL) {
                *w = 0.0;
                self.alive[i] = false;
                newly_dead.push(i);
            }
        }
        newly_dead
    }

    /// Deducts `w_i²·T` from every node. Weights must already be gated.
    pub fn charge(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.len(), "weight vector length");
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            debug_assert!(self.alive[i], "dead node {i} asked to transmit");
            let e = slot_energy(w, self.slot_length).min(self.residual[i]);
            self.residual[i] -= e;
            self.consumed[i] += e;
        }
    }

    /// Gate then charge one transmission round.
    pub fn charge_round(&mut self, weights: &mut [f64]) -> Vec<usize> {
        let dead = self.gate(weights);
        self.charge(weights);
        dead
    }
}

/// How the wasted-energy percentage is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WastedNormalization {
    /// `N·m_e` with the configured distribution mean.
    #[default]
    DistributionMean,
    /// Realised total initial energy.
    RealizedTotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WastedEnergy {
    pub joules: f64,
    pub percent: f64,
}

/// Energy stranded in the cluster at death, absolute and in percent.
pub fn wasted_energy(state: &EnergyState, mean: f64, normalization: WastedNormalization) -> WastedEnergy {
    let joules = state.total_residual();
    let denom = match normalization {
        WastedNormalization::DistributionMean => state.len() as f64 * mean,
        WastedNormalization::RealizedTotal => state.initial.iter().sum(),
    };
    let percent = if denom > 0.0 { joules / denom * 100.0 } else { 0.0 };
    WastedEnergy { joules, percent }
}

//! Beamforming weight computation.
//!
//! The semi-distributed CB-PA rule splits each weight into a node-local
//! normalised part `u_i = e_i / E_max` and a cluster-wide scale `w_max`
//! chosen so that the *average* SNR over channel and residual-energy
//! statistics hits the target. CB-EPA is the special case `u_i = 1`. Two
//! centralised baselines that need full channel knowledge are solved
//! exactly through their capped matched-filter structure.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Mean and variance of the channel amplitude gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub variance: f64,
}

impl ChannelStats {
    /// `E{a²}`
    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }
}

/// Residual-energy statistics and their image on the normalised weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReiStats {
    /// `m_e`, joules.
    pub mean: f64,
    /// `σ_e²`, joules².
    pub variance: f64,
    /// `m_u = m_e / E_max`
    pub mean_u: f64,
    /// `σ_u² = σ_e² / E_max²`
    pub variance_u: f64,
}

impl ReiStats {
    /// Statistics of a normalised weight population given directly.
    pub fn from_normalized(mean_u: f64, variance_u: f64) -> Self {
        Self { mean: mean_u, variance: variance_u, mean_u, variance_u }
    }

    /// The degenerate `u_i ≡ 1` population of equal power allocation.
    pub fn equal_power() -> Self {
        Self::from_normalized(1.0, 0.0)
    }
}

/// Exact population mean and variance of the residual energies of the alive
/// nodes, mapped onto normalised-weight statistics. Stands in for a
/// consensus estimate.
pub fn rei_stats(residuals: &[f64], capacity: f64) -> Result<ReiStats> {
    if !(capacity > 0.0) {
        return Err(SimError::InvalidConfig(format!("capacity must be > 0, got {capacity}")));
    }
    if residuals.is_empty() {
        return Err(SimError::ClusterDead);
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let variance = residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(ReiStats {
        mean,
        variance,
        mean_u: mean / capacity,
        variance_u: variance / (capacity * capacity),
    })
}

/// Node-local normalised weights `u_i = e_i / E_max`.
pub fn cbpa_normalized_weights(residuals: &[f64], capacity: f64) -> Result<Vec<f64>> {
    if !(capacity > 0.0) {
        return Err(SimError::InvalidConfig(format!("capacity must be > 0, got {capacity}")));
    }
    Ok(residuals.iter().map(|&e| (e / capacity).clamp(0.0, 1.0)).collect())
}

/// Bracket of the array-gain expression shared by the average SNR and its
/// inverse: `N·(σ_u²σ_a² + σ_a²m_u² + σ_u²m_a²) + N²·m_u²m_a²`.
fn gain_factor(n: usize, rei: &ReiStats, ch: &ChannelStats) -> f64 {
    let n = n as f64;
    let (mu, vu) = (rei.mean_u, rei.variance_u);
    let (ma, va) = (ch.mean, ch.variance);
    n * (vu * va + va * mu * mu + vu * ma * ma) + n * n * mu * mu * ma * ma
}

/// Average SNR achieved with scale `w_max` over `n` nodes whose normalised
/// weights and channel gains are independent with the given statistics.
pub fn analytic_average_snr(scale: f64, n: usize, rei: &ReiStats, ch: &ChannelStats, noise: f64) -> f64 {
    let n_f = n as f64;
    let diag = n_f * (rei.variance_u + rei.mean_u.powi(2)) * ch.second_moment();
    let cross = n_f * (n_f - 1.0) * rei.mean_u.powi(2) * ch.mean.powi(2);
    scale * scale / noise * (diag + cross)
}

/// Result of solving for the CB-PA scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmaxSolution {
    pub w_max: f64,
    /// `w_max` exceeds `sqrt(P_max)`; the target is unreachable with `n`
    /// nodes.
    pub exceeds_cap: bool,
}

/// Scale `w_max` that makes [`analytic_average_snr`] equal `target_snr`.
pub fn compute_wmax(
    target_snr: f64,
    n: usize,
    rei: &ReiStats,
    ch: &ChannelStats,
    noise: f64,
    p_max: f64,
) -> Result<WmaxSolution> {
    if !(target_snr >= 0.0) {
        return Err(SimError::InvalidInput(format!("target SNR must be >= 0, got {target_snr}")));
    }
    if !(noise > 0.0) {
        return Err(SimError::InvalidInput(format!("noise power must be > 0, got {noise}")));
    }
    let denom = gain_factor(n, rei, ch);
    if !(denom > 0.0) {
        return Err(SimError::Infeasible(
            "weight statistics are all zero; the cluster is depleted".into(),
        ));
    }
    let w_max = (target_snr * noise / denom).sqrt();
    Ok(WmaxSolution { w_max, exceeds_cap: w_max > p_max.sqrt() })
}

/// Common weight of equal power allocation:
/// `sqrt(γ̄σ_n² / (N·σ_a² + N²·m_a²))`.
pub fn cbepa_weight(target_snr: f64, n: usize, ch: &ChannelStats, noise: f64) -> Result<f64> {
    if n == 0 {
        return Err(SimError::InvalidInput("equal power allocation over zero nodes".into()));
    }
    if !(target_snr >= 0.0) || !(noise > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "target SNR must be >= 0 and noise > 0 (got {target_snr}, {noise})"
        )));
    }
    let n = n as f64;
    Ok((target_snr * noise / (n * ch.variance + n * n * ch.mean * ch.mean)).sqrt())
}

/// Which points make up an `L`-level quantisation grid on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizationGrid {
    /// `{j/L : j = 0..=L}`; a node may be silenced while still alive.
    #[default]
    IncludeZero,
    /// `{j/L : j = 1..=L}`; every alive node transmits at least `1/L`.
    ExcludeZero,
}

/// Rounds each `u_i` to the nearest point of `{j/L : j = 0..=L}`, ties up.
pub fn quantize_weights(u: &[f64], levels: u32) -> Vec<f64> {
    quantize_weights_on(u, levels, QuantizationGrid::IncludeZero)
}

pub fn quantize_weights_on(u: &[f64], levels: u32, grid: QuantizationGrid) -> Vec<f64> {
    if levels == 0 {
        return u.to_vec();
    }
    let l = levels as f64;
    u.iter()
        .map(|&x| {
            let mut j = (x.clamp(0.0, 1.0) * l + 0.5).floor();
            if grid == QuantizationGrid::ExcludeZero {
                j = j.max(1.0);
            }
            j.min(l) / l
        })
        .collect()
}

/// Beamforming amplitudes `w = scale · u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub normalized: Vec<f64>,
    pub scale: f64,
    pub effective: Vec<f64>,
    /// Quantisation levels applied to `normalized`; 0 means continuous.
    pub quantization_levels: u32,
}

impl WeightVector {
    pub fn new(normalized: Vec<f64>, scale: f64, quantization_levels: u32) -> Self {
        let effective = normalized.iter().map(|u| scale * u).collect();
        Self { normalized, scale, effective, quantization_levels }
    }

    /// Wraps raw amplitudes, normalising by `sqrt(p_max)` when a cap is set
    /// and by the largest amplitude otherwise.
    pub fn from_amplitudes(w: Vec<f64>, p_max: f64) -> Self {
        let scale = if p_max.is_finite() {
            p_max.sqrt()
        } else {
            w.iter().copied().fold(0.0, f64::max)
        };
        let normalized = if scale > 0.0 { w.iter().map(|x| x / scale).collect() } else { vec![0.0; w.len()] };
        Self { normalized, scale, effective: w, quantization_levels: 0 }
    }

    pub fn len(&self) -> usize {
        self.effective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effective.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.effective.iter().map(|w| w * w).sum()
    }
}

fn check_channel(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(SimError::InvalidInput("empty channel vector".into()));
    }
    if let Some(bad) = a.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(SimError::InvalidInput(format!("channel gains must be > 0, got {bad}")));
    }
    Ok(())
}

/// Finds the smallest `μ` for which `h(μ) >= 0`, where `h` is nondecreasing
/// on `[0, hi]` and `h(hi) >= 0`.
fn bisect(mut hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Maximises `(aᵀw)²` subject to `Σw_i² = P_tot` and `w_i² <= P_max`.
///
/// The optimum is the capped matched filter `w_i = min(μ·a_i, sqrt(P_max))`.
/// `μ` is bracketed by bisection to fix the active cap set and then solved
/// in closed form on that set.
pub fn solve_max_gain(a: &[f64], p_tot: f64, p_max: f64) -> Result<WeightVector> {
    check_channel(a)?;
    if !(p_tot >= 0.0) || !(p_max > 0.0) {
        return Err(SimError::InvalidInput(format!("P_tot must be >= 0 and P_max > 0 (got {p_tot}, {p_max})")));
    }
    let n = a.len() as f64;
    if p_tot > n * p_max * (1.0 + 1e-12) {
        return Err(SimError::Infeasible(format!(
            "total power {p_tot} exceeds N·P_max = {}",
            n * p_max
        )));
    }
    let norm2: f64 = a.iter().map(|x| x * x).sum();
    let cap = p_max.sqrt();
    let uncapped = (p_tot / norm2).sqrt();
    if !cap.is_finite() || a.iter().all(|&x| uncapped * x <= cap) {
        let w = a.iter().map(|x| uncapped * x).collect();
        return Ok(WeightVector::from_amplitudes(w, p_max));
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let power = |mu: f64| a.iter().map(|&x| (mu * x).min(cap).powi(2)).sum::<f64>() - p_tot;
    let mu = bisect(cap / a_min, power);
    // Closed form on the active set found by bisection.
    let capped: Vec<bool> = a.iter().map(|&x| mu * x >= cap).collect();
    let n_capped = capped.iter().filter(|&&c| c).count() as f64;
    let free2: f64 = a.iter().zip(&capped).filter(|(_, &c)| !c).map(|(x, _)| x * x).sum();
    let mu = if free2 > 0.0 {
        ((p_tot - n_capped * p_max).max(0.0) / free2).sqrt()
    } else {
        mu
    };
    let w = a.iter().map(|&x| (mu * x).min(cap)).collect();
    Ok(WeightVector::from_amplitudes(w, p_max))
}

/// Minimises `‖w‖²` subject to `(aᵀw)² >= target` and `w_i² <= P_max`,
/// where `target = γ̄·σ_n²`.
pub fn solve_min_power(a: &[f64], target: f64, p_max: f64) -> Result<WeightVector> {
    check_channel(a)?;
    if !(target >= 0.0) || !(p_max > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "target must be >= 0 and P_max > 0 (got {target}, {p_max})"
        )));
    }
    let t = target.sqrt();
    let cap = p_max.sqrt();
    let sum_a: f64 = a.iter().sum();
    if cap.is_finite() && sum_a * cap < t * (1.0 - 1e-12) {
        return Err(SimError::Infeasible(format!(
            "target amplitude {t} unreachable: Σa_i·sqrt(P_max) = {}",
            sum_a * cap
        )));
    }
    let norm2: f64 = a.iter().map(|x| x * x).sum();
    let uncapped = t / norm2;
    if !cap.is_finite() || a.iter().all(|&x| uncapped * x <= cap) {
        let w = a.iter().map(|x| uncapped * x).collect();
        return Ok(WeightVector::from_amplitudes(w, p_max));
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let gain = |mu: f64| a.iter().map(|&x| x * (mu * x).min(cap)).sum::<f64>() - t;
    let mu = bisect(cap / a_min, gain);
    let capped: Vec<bool> = a.iter().map(|&x| mu * x >= cap).collect();
    let capped_gain: f64 = a.iter().zip(&capped).filter(|(_, &c)| c).map(|(x, _)| x * cap).sum();
    let free2: f64 = a.iter().zip(&capped).filter(|(_, &c)| !c).map(|(x, _)| x * x).sum();
    let mu = if free2 > 0.0 { ((t - capped_gain).max(0.0)) / free2 } else { mu };
    let w = a.iter().map(|&x| (mu * x).min(cap)).collect();
    Ok(WeightVector::from_amplitudes(w, p_max))
}

/// Closed-loop alternative to [`compute_wmax`]: the receiver nudges the
/// common scale up or down in fixed multiplicative steps until the realised
/// SNR sits inside a tolerance band around the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmaxController {
    pub w_max: f64,
    /// Power step per adjustment, dB.
    pub step_db: f64,
    /// Half-width of the acceptance band, dB.
    pub tolerance_db: f64,
    pub p_max: f64,
}

/// Outcome of one feedback step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackAction {
    Hold,
    Increase,
    Decrease,
    /// Wanted to increase but `w_max` is already at `sqrt(P_max)`.
    AtCap,
}

impl WmaxController {
    pub fn new(initial: f64, step_db: f64, tolerance_db: f64, p_max: f64) -> Self {
        Self { w_max: initial.min(p_max.sqrt()), step_db, tolerance_db, p_max }
    }

    pub fn update(&mut self, realized_snr: f64, target_snr: f64) -> FeedbackAction {
        let ratio = 10f64.powf(self.step_db / 20.0);
        let band = 10f64.powf(self.tolerance_db / 10.0);
        let cap = self.p_max.sqrt();
        if realized_snr < target_snr / band {
            if self.w_max >= cap {
                return FeedbackAction::AtCap;
            }
            self.w_max = (self.w_max * ratio).min(cap);
            FeedbackAction::Increase
        } else if realized_snr > target_snr * band {
            self.w_max /= ratio;
            FeedbackAction::Decrease
        } else {
            FeedbackAction::Hold
        }
    }
}

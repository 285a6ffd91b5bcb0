//! Cluster deployment, far-field geometry, carrier phases and the shadowed
//! channel.
//!
//! All lengths are expressed in carrier wavelengths, so the wavenumber is
//! simply `2π`.

use std::f64::consts::{LN_10, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::allocation::ChannelStats;
use crate::error::{Result, SimError};

/// Minimum destination-to-node range ratio for which the far-field
/// linearisation is trusted.
pub const FAR_FIELD_MIN_RATIO: f64 = 10.0;

/// A point in the cluster plane, `rho` in wavelengths and `phi` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub rho: f64,
    pub phi: f64,
}

impl PolarPoint {
    /// Builds a point, wrapping the azimuth into `[0, 2π)`.
    pub fn new(rho: f64, phi: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(SimError::InvalidInput(format!("rho must be finite and >= 0, got {rho}")));
        }
        if !phi.is_finite() {
            return Err(SimError::InvalidInput(format!("phi must be finite, got {phi}")));
        }
        Ok(Self { rho, phi: wrap_angle(phi) })
    }

    pub const ORIGIN: PolarPoint = PolarPoint { rho: 0.0, phi: 0.0 };
}

/// A destination base station / access point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub location: PolarPoint,
    pub index: usize,
}

impl Destination {
    pub fn new(index: usize, range_wavelengths: f64, azimuth: f64) -> Result<Self> {
        Ok(Self { location: PolarPoint::new(range_wavelengths, azimuth)?, index })
    }

    /// True if the destination lies strictly beyond every node and at least
    /// [`FAR_FIELD_MIN_RATIO`] times further out than the furthest one.
    pub fn is_far_field(&self, nodes: &[PolarPoint]) -> bool {
        let max_rho = nodes.iter().map(|p| p.rho).fold(0.0, f64::max);
        if max_rho == 0.0 {
            return self.location.rho > 0.0;
        }
        self.location.rho / max_rho >= FAR_FIELD_MIN_RATIO
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_signed(angle: f64) -> f64 {
    let w = wrap_angle(angle);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Draws `n` node positions uniformly over a disk of radius `disk_radius`
/// (uniform in area: `rho = R·sqrt(U)`, `phi ~ U[0, 2π)`).
pub fn deploy_cluster<R: Rng + ?Sized>(
    n: usize,
    disk_radius: f64,
    rng: &mut R,
) -> Result<Vec<PolarPoint>> {
    if n == 0 {
        return Err(SimError::InvalidConfig("cluster size must be at least 1".into()));
    }
    if !(disk_radius >= 0.0) || !disk_radius.is_finite() {
        return Err(SimError::InvalidConfig(format!(
            "disk radius must be finite and >= 0, got {disk_radius}"
        )));
    }
    let unit = Uniform::new(0.0_f64, 1.0).expect("valid unit interval");
    Ok((0..n)
        .map(|_| {
            let rho = disk_radius * unit.sample(rng).sqrt();
            let phi = TAU * unit.sample(rng);
            PolarPoint { rho, phi: wrap_angle(phi) }
        })
        .collect())
}

/// Far-field path length from `node` to a point at range `dest_rho` in
/// direction `direction`: `ϱ − ρ·cos(φ − φ_i)`.
pub fn far_field_distance(node: PolarPoint, direction: f64, dest_rho: f64) -> f64 {
    dest_rho - node.rho * (direction - node.phi).cos()
}

/// Propagation phase `2π·δ_i(φ)` accumulated from `node` towards direction
/// `direction`.
pub fn propagation_phase(node: PolarPoint, direction: f64, dest_rho: f64) -> f64 {
    TAU * far_field_distance(node, direction, dest_rho)
}

/// Initial carrier phase that makes the node's contribution arrive with zero
/// phase at `dest`.
pub fn carrier_phase(node: PolarPoint, dest: &Destination) -> f64 {
    -propagation_phase(node, dest.location.phi, dest.location.rho)
}

/// Residual phase seen at `dest` from `node` after carrier compensation and
/// an additive synchronisation error, wrapped into `(-π, π]`.
pub fn residual_phase(node: PolarPoint, dest: &Destination, phase_error: f64) -> f64 {
    let total = carrier_phase(node, dest)
        + propagation_phase(node, dest.location.phi, dest.location.rho)
        + phase_error;
    wrap_signed(total)
}

/// Log-normal shadowing: `A_i ~ N(0, σ²)` in dB, amplitude gain
/// `a_i = 10^(A_i / divisor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingModel {
    /// Variance of `A_i`, dB².
    pub sigma2_db: f64,
    /// Divisor in the dB-to-amplitude exponent (10 or 20).
    pub divisor: f64,
}

impl ShadowingModel {
    pub fn new(sigma2_db: f64, divisor: f64) -> Result<Self> {
        if !(sigma2_db >= 0.0) || !sigma2_db.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "shadowing variance must be >= 0 dB², got {sigma2_db}"
            )));
        }
        if !(divisor > 0.0) || !divisor.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "amplitude divisor must be > 0, got {divisor}"
            )));
        }
        Ok(Self { sigma2_db, divisor })
    }

    /// Standard deviation of `ln a_i`.
    pub fn ln_sigma(&self) -> f64 {
        self.sigma2_db.sqrt() * LN_10 / self.divisor
    }

    /// Analytic mean and variance of the amplitude gain.
    pub fn channel_stats(&self) -> ChannelStats {
        let s2 = self.ln_sigma().powi(2);
        ChannelStats { mean: (s2 / 2.0).exp(), variance: s2.exp_m1() * s2.exp() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ChannelRealization {
        let sd = self.sigma2_db.sqrt();
        let gains = if sd == 0.0 {
            vec![1.0; n]
        } else {
            let normal = Normal::new(0.0, sd).expect("finite positive std");
            (0..n).map(|_| 10f64.powf(normal.sample(rng) / self.divisor)).collect()
        };
        ChannelRealization { gains, sigma2_db: self.sigma2_db }
    }
}

/// Per-node amplitude gains towards one destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub gains: Vec<f64>,
    pub sigma2_db: f64,
}

impl ChannelRealization {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Draws a shadowed channel with the paper-literal exponent divisor of 10.
pub fn sample_channel<R: Rng + ?Sized>(
    n: usize,
    sigma2_db: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(ShadowingModel::new(sigma2_db, 10.0)?.sample(n, rng))
}

/// Static per-node synchronisation errors, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrors {
    pub errors: Vec<f64>,
}

impl PhaseErrors {
    pub fn zeros(n: usize) -> Self {
        Self { errors: vec![0.0; n] }
    }

    /// i.i.d. `U[-bound, bound]` errors; `bound` in radians.
    pub fn sample_uniform<R: Rng + ?Sized>(n: usize, bound: f64, rng: &mut R) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(SimError::InvalidConfig(format!(
                "phase error bound must be >= 0, got {bound}"
            )));
        }
        if bound == 0.0 {
            return Ok(Self::zeros(n));
        }
        let dist = Uniform::new_inclusive(-bound, bound).expect("valid interval");
        Ok(Self { errors: (0..n).map(|_| dist.sample(rng)).collect() })
    }
}

/// Instantaneous received SNR `|Σ w_i a_i e^{jΔψ_i}|² / σ_n²`.
///
/// `phases` are the residual phases at the receiver (zero for perfect
/// synchronisation).
pub fn received_snr(weights: &[f64], gains: &[f64], phases: &[f64], noise_power: f64) -> Result<f64> {
    if weights.len() != gains.len() || weights.len() != phases.len() {
        return Err(SimError::InvalidInput(format!(
            "length mismatch: {} weights, {} gains, {} phases",
            weights.len(),
            gains.len(),
            phases.len()
        )));
    }
    if !(noise_power > 0.0) {
        return Err(SimError::InvalidInput(format!("noise power must be > 0, got {noise_power}")));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for ((&w, &a), &dpsi) in weights.iter().zip(gains).zip(phases) {
        if w == 0.0 {
            continue;
        }
        let amp = w * a;
        if dpsi == 0.0 {
            re += amp;
        } else {
            re += amp * dpsi.cos();
            im += amp * dpsi.sin();
        }
    }
    Ok((re * re + im * im) / noise_power)
}

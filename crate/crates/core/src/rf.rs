//! Log-distance path loss, jammer received power and noise-floor composition.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Ambient noise floor without interference (dBm).
pub const AMBIENT_NOISE_DBM: f64 = -100.0;

/// Distances are clamped to this before path-loss evaluation (m).
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Reference path loss at 1 m, roughly free space at 2.4 GHz (dB).
pub const DEFAULT_PL0_DB: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Reference path loss at `d0` (dB).
    pub pl0: f64,
    /// Path loss exponent.
    pub gamma: f64,
    /// Shadowing standard deviation (dB).
    pub sigma: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub ambient_noise_dbm: f64,
}

impl PropagationParams {
    pub fn new(gamma: f64, sigma: f64) -> Self {
        Self {
            pl0: DEFAULT_PL0_DB,
            gamma,
            sigma,
            d0: 1.0,
            ambient_noise_dbm: AMBIENT_NOISE_DBM,
        }
    }

    /// Draws one shadowing term `X_σ ~ N(0, σ²)`.
    pub fn sample_shadowing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma <= 0.0 {
            return 0.0;
        }
        Normal::new(0.0, self.sigma)
            .expect("finite positive sigma")
            .sample(rng)
    }
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self::new(3.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerConfig {
    pub position: Point,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
}

impl JammerConfig {
    pub fn new(position: Point, tx_power_dbm: f64) -> Self {
        Self {
            position,
            tx_power_dbm,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
        }
    }

    /// Transmit power plus both antenna gains (dBm).
    pub fn eirp_dbm(&self) -> f64 {
        self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi
    }
}

/// `PL₀ + 10·γ·log₁₀(d/d₀) + X_σ`.
pub fn path_loss_ldpl(d: f64, params: &PropagationParams, shadowing_db: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(params.pl0 + 10.0 * params.gamma * (d / params.d0).log10() + shadowing_db)
}

/// Received jammer power at `device_pos` (dBm). Distance is clamped to
/// [`MIN_DISTANCE_M`] so co-located devices stay finite.
pub fn jammer_rssi(
    device_pos: &Point,
    jammer: &JammerConfig,
    params: &PropagationParams,
    shadowing_db: f64,
) -> Result<f64> {
    let d = (device_pos - jammer.position).norm().max(MIN_DISTANCE_M);
    Ok(jammer.eirp_dbm() - path_loss_ldpl(d, params, shadowing_db)?)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Power sum of ambient noise and jammer interference, in dBm.
pub fn noise_floor(jammer_rssi_dbm: f64, ambient_dbm: f64) -> f64 {
    // Power sums dominate both terms; clamp away rounding in the dB round trip.
    mw_to_dbm(dbm_to_mw(ambient_dbm) + dbm_to_mw(jammer_rssi_dbm))
        .max(ambient_dbm)
        .max(jammer_rssi_dbm)
}

/// Noise floor observed at `device_pos` with one shadowing draw.
pub fn observe_noise<R: Rng + ?Sized>(
    device_pos: &Point,
    jammer: &JammerConfig,
    params: &PropagationParams,
    rng: &mut R,
) -> Result<f64> {
    let shadow = params.sample_shadowing(rng);
    let rssi = jammer_rssi(device_pos, jammer, params, shadow)?;
    Ok(noise_floor(rssi, params.ambient_noise_dbm))
}

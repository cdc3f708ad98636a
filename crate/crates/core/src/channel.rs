//! Log-distance path loss with log-normal shadowing, and the aggregate
//! distance-bounding ranging model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::stats::normal_cdf;

/// Channel and ranging parameters. Field names match the scenario file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss at the reference distance, dB.
    pub pl0: f64,
    /// Reference distance, meters.
    pub d0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Shadowing standard deviation, dB.
    pub shadow_sigma: f64,
    /// Distance-bounding challenge/response exchanges per ranging.
    pub rounds: u32,
    /// Aggregate multipath ranging noise, meters.
    pub mp_sigma: f64,
    /// Distance-proportional ranging noise as a fraction of true distance.
    pub dist_err_frac: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            pl0: 40.0,
            d0: 1.0,
            gamma: 2.0,
            shadow_sigma: 3.0,
            rounds: 32,
            mp_sigma: 1.25,
            dist_err_frac: 0.01,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(ConfigError::invalid("d0", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ConfigError::invalid("gamma", "must be positive"));
        }
        if !self.pl0.is_finite() {
            return Err(ConfigError::invalid("pl0", "must be finite"));
        }
        if !(self.shadow_sigma >= 0.0 && self.shadow_sigma.is_finite()) {
            return Err(ConfigError::invalid("shadow_sigma", "must be >= 0"));
        }
        if self.rounds == 0 {
            return Err(ConfigError::invalid("rounds", "must be >= 1"));
        }
        if !(self.mp_sigma >= 0.0 && self.mp_sigma.is_finite()) {
            return Err(ConfigError::invalid("mp_sigma", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.dist_err_frac) {
            return Err(ConfigError::invalid("dist_err_frac", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Standard deviation of a ranging estimate at true distance `d`.
    pub fn ranging_sigma(&self, d: f64) -> f64 {
        self.mp_sigma.hypot(self.dist_err_frac * d)
    }

    /// Probability that an honest estimate at true distance `d` is at most `gate`.
    pub fn gate_pass_probability(&self, d: f64, gate: f64) -> f64 {
        let sigma = self.ranging_sigma(d);
        if sigma == 0.0 {
            return if d <= gate { 1.0 } else { 0.0 };
        }
        normal_cdf((gate - d) / sigma)
    }
}

/// Mean path loss at distance `d`; distances below `d0` are clamped to `d0`.
pub fn deterministic_path_loss(d: f64, p: &ChannelParams) -> f64 {
    let d = d.max(p.d0);
    p.pl0 + 10.0 * p.gamma * (d / p.d0).log10()
}

/// One shadowed path-loss observation.
pub fn sample_path_loss<R: Rng + ?Sized>(d: f64, p: &ChannelParams, rng: &mut R) -> f64 {
    let x: f64 = rng.sample(StandardNormal);
    deterministic_path_loss(d, p) + p.shadow_sigma * x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingResult {
    pub witness_id: String,
    pub true_distance: f64,
    /// Derived distance bound.
    pub estimate: f64,
    pub rounds_used: u32,
}

/// Honest distance-bounding exchange between a witness and a prover.
pub fn range_estimate<R: Rng + ?Sized>(
    witness_id: &str,
    true_d: f64,
    p: &ChannelParams,
    rng: &mut R,
) -> RangingResult {
    range_estimate_delayed(witness_id, true_d, 0.0, p, rng)
}

/// Ranging against a prover that adds processing delay, expressed in meters
/// of apparent extra distance. Negative delays are not physical and are
/// treated as zero: a prover can only appear farther away.
pub fn range_estimate_delayed<R: Rng + ?Sized>(
    witness_id: &str,
    true_d: f64,
    added_delay_m: f64,
    p: &ChannelParams,
    rng: &mut R,
) -> RangingResult {
    let e_dist: f64 = rng.sample::<f64, _>(StandardNormal) * p.dist_err_frac * true_d;
    let e_mp: f64 = rng.sample::<f64, _>(StandardNormal) * p.mp_sigma;
    let delay = if added_delay_m.is_finite() { added_delay_m.max(0.0) } else { 0.0 };
    RangingResult {
        witness_id: witness_id.to_string(),
        true_distance: true_d,
        estimate: (true_d + delay + e_dist + e_mp).max(0.0),
        rounds_used: p.rounds,
    }
}

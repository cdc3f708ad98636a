//! Closed-form admission oracles and the parameter solvers built on them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CalibrationError;
use crate::geometry::{distance, Vector3, ZoneConfig};
use crate::stats::{at_least_k_of, normal_cdf, normal_quantile};

pub const EDGE_POINT: Vector3 = Vector3::planar(9.28, 0.0);
pub const VISUAL_POINT: Vector3 = Vector3::planar(5.0, 5.0);
pub const EDGE_TARGET: f64 = 0.359;
pub const VISUAL_TARGET: f64 = 0.973;
/// RF similarity threshold of the visual policy.
const RF_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationTarget {
    EdgeAdmission,
    VisualAdmission,
}

impl CalibrationTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationTarget::EdgeAdmission => "edge_admission",
            CalibrationTarget::VisualAdmission => "visual_admission",
        }
    }

    pub fn default_value(&self) -> f64 {
        match self {
            CalibrationTarget::EdgeAdmission => EDGE_TARGET,
            CalibrationTarget::VisualAdmission => VISUAL_TARGET,
        }
    }
}

impl fmt::Display for CalibrationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibrationTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge_admission" => Ok(CalibrationTarget::EdgeAdmission),
            "visual_admission" => Ok(CalibrationTarget::VisualAdmission),
            other => Err(format!("unknown calibration target `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: CalibrationTarget,
    pub target_value: f64,
    /// `d_acc` or `p_det`.
    pub parameter: String,
    pub value: f64,
    /// Oracle value at the calibrated parameter.
    pub achieved: f64,
    pub residual: f64,
}

/// Distance from the edge point to the witnesses on the far side.
fn far_edge_distance(zone: &ZoneConfig) -> f64 {
    zone.witness_positions
        .iter()
        .map(|w| distance(EDGE_POINT, *w))
        .fold(0.0, f64::max)
}

/// Edge admission with the two near witnesses assumed to pass:
/// `1 - (1 - Φ((d_acc - D) / σ(D)))²`.
pub fn edge_admission(zone: &ZoneConfig) -> f64 {
    let far = far_edge_distance(zone);
    let p = normal_cdf((zone.d_acc - far) / zone.channel.ranging_sigma(far));
    1.0 - (1.0 - p).powi(2)
}

/// Probability that an honest witness's RF similarity clears the threshold
/// when claimed and true positions coincide.
fn rf_pass_probability(zone: &ZoneConfig) -> f64 {
    let sigma = zone.channel.shadow_sigma;
    if sigma == 0.0 {
        return 1.0;
    }
    let limit = (1.0 - RF_THRESHOLD) * crate::sensing::RF_FULL_SCALE_DB;
    1.0 - 2.0 * normal_cdf(-limit / sigma)
}

/// Visual-valid admission at (5,5): each witness must pass the range gate,
/// the RF check and detect the object; `k` of them must.
pub fn visual_admission(zone: &ZoneConfig, p_det: f64) -> f64 {
    let rf = rf_pass_probability(zone);
    let probs: Vec<f64> = zone
        .witness_positions
        .iter()
        .map(|w| zone.channel.gate_pass_probability(distance(*w, VISUAL_POINT), zone.d_acc) * rf * p_det)
        .collect();
    at_least_k_of(&probs, zone.quorum_k)
}

fn unreachable(target: f64, reason: impl Into<String>) -> CalibrationError {
    CalibrationError::Unreachable {
        target,
        reason: reason.into(),
    }
}

/// Solves for the parameter that makes the oracle hit `value`.
/// `tolerance` bounds the bisection bracket width for `p_det`.
pub fn calibrate(
    zone: &ZoneConfig,
    target: CalibrationTarget,
    value: f64,
    tolerance: f64,
) -> Result<Calibration, CalibrationError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(unreachable(value, "target must be a probability strictly between 0 and 1"));
    }
    match target {
        CalibrationTarget::EdgeAdmission => {
            let far = far_edge_distance(zone);
            let per_witness = 1.0 - (1.0 - value).sqrt();
            let d_acc = far + zone.channel.ranging_sigma(far) * normal_quantile(per_witness);
            if !(zone.d_max..=2.0 * zone.radius).contains(&d_acc) {
                return Err(unreachable(value, format!("d_acc {d_acc} outside [d_max, 2R]")));
            }
            let achieved = edge_admission(&ZoneConfig { d_acc, ..zone.clone() });
            Ok(Calibration {
                target,
                target_value: value,
                parameter: "d_acc".into(),
                value: d_acc,
                achieved,
                residual: achieved - value,
            })
        }
        CalibrationTarget::VisualAdmission => {
            let (mut lo, mut hi) = (0.0, 1.0);
            if visual_admission(zone, hi) < value {
                return Err(unreachable(value, "exceeds admission with perfect detection"));
            }
            let tol = if tolerance > 0.0 { tolerance } else { 1e-12 };
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if visual_admission(zone, mid) < value {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let p_det = 0.5 * (lo + hi);
            let achieved = visual_admission(zone, p_det);
            Ok(Calibration {
                target,
                target_value: value,
                parameter: "p_det".into(),
                value: p_det,
                achieved,
                residual: achieved - value,
            })
        }
    }
}

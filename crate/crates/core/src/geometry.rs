//! Positions, zone configuration and witness layouts.
//!
//! Zones are planar: witnesses and provers sit at `z = 0` unless a scenario
//! file says otherwise. The zone center is the origin.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::ConfigError;

/// Point in a zone-local Cartesian frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ORIGIN: Vector3 = Vector3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    pub const fn planar(x: f64, y: f64) -> Self {
        Vector3 { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation about the z axis by `angle` radians.
    pub fn rotate_z(&self, angle: f64) -> Vector3 {
        let (s, c) = angle.sin_cos();
        Vector3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl std::ops::Sub for Vector3 {
    type Output = Vector3;

    fn sub(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl fmt::Display for Vector3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Vector3, b: Vector3) -> f64 {
    (a - b).norm()
}

/// Half side of the default square layout.
pub const SQUARE_HALF_SIDE: f64 = 10.0;

/// Witness placement around the zone center.
///
/// Four witnesses sit on the corners `(±10, ±10)`; six sit on a regular
/// hexagon with the same center distance (`10·√2`), first vertex on the
/// positive x axis, counterclockwise.
pub fn witness_layout(count: usize) -> Result<Vec<Vector3>, ConfigError> {
    match count {
        4 => {
            let s = SQUARE_HALF_SIDE;
            Ok(vec![
                Vector3::planar(s, s),
                Vector3::planar(s, -s),
                Vector3::planar(-s, s),
                Vector3::planar(-s, -s),
            ])
        }
        6 => {
            let r = SQUARE_HALF_SIDE * 2f64.sqrt();
            Ok((0..6)
                .map(|i| {
                    let a = i as f64 * PI / 3.0;
                    Vector3::planar(r * a.cos(), r * a.sin())
                })
                .collect())
        }
        n => Err(ConfigError::UnsupportedLayout(n)),
    }
}

/// Noise-free membership: at least `k` witnesses within `d_max` of `point`.
pub fn noise_free_effective_zone(point: Vector3, layout: &[Vector3], d_max: f64, k: usize) -> bool {
    layout.iter().filter(|w| distance(point, **w) <= d_max).count() >= k
}

/// Geometry, quorum, timing and channel parameters of one witnessing zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub zone_id: String,
    pub radius: f64,
    pub witness_count: usize,
    pub quorum_k: usize,
    pub interval_seconds: f64,
    pub claim_period_seconds: f64,
    pub run_seconds: f64,
    pub witness_positions: Vec<Vector3>,
    pub channel: ChannelParams,
    /// Noise-free per-witness acceptance distance.
    pub d_max: f64,
    /// Acceptance distance applied to noisy estimates.
    pub d_acc: f64,
}

impl ZoneConfig {
    pub const DEFAULT_ZONE_ID: &'static str = "Z-17";

    /// Default zone with `witness_count` witnesses (4 or 6).
    pub fn with_witnesses(witness_count: usize) -> Result<Self, ConfigError> {
        let zone = ZoneConfig {
            zone_id: Self::DEFAULT_ZONE_ID.to_string(),
            radius: 20.0,
            witness_count,
            quorum_k: 3,
            interval_seconds: 2.0,
            claim_period_seconds: 2.0,
            run_seconds: 60.0,
            witness_positions: witness_layout(witness_count)?,
            channel: ChannelParams::default(),
            d_max: 20.0,
            d_acc: 20.6,
        };
        zone.validate()?;
        Ok(zone)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.zone_id.is_empty() {
            return Err(ConfigError::invalid("zone_id", "must not be empty"));
        }
        if self.witness_count == 0 || self.quorum_k == 0 {
            return Err(ConfigError::invalid("quorum_k", "witness_count and quorum_k must be positive"));
        }
        if self.quorum_k > self.witness_count {
            return Err(ConfigError::QuorumExceedsWitnesses {
                k: self.quorum_k,
                n: self.witness_count,
            });
        }
        if self.witness_positions.len() != self.witness_count {
            return Err(ConfigError::invalid(
                "witness_positions",
                format!("{} positions for {} witnesses", self.witness_positions.len(), self.witness_count),
            ));
        }
        if self.witness_positions.iter().any(|p| !p.is_finite()) {
            return Err(ConfigError::invalid("witness_positions", "non-finite coordinate"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(ConfigError::invalid("radius", "must be positive"));
        }
        if !(self.interval_seconds > 0.0 && self.interval_seconds.is_finite()) {
            return Err(ConfigError::invalid("interval_seconds", "must be positive"));
        }
        if !(self.d_max > 0.0 && self.d_acc >= self.d_max && self.d_acc.is_finite()) {
            return Err(ConfigError::invalid("d_acc", "requires d_acc >= d_max > 0"));
        }
        self.claim_count()?;
        self.channel.validate()
    }

    /// Number of claims in one run (`run_seconds / claim_period_seconds`).
    pub fn claim_count(&self) -> Result<usize, ConfigError> {
        let p = self.claim_period_seconds;
        if !(p > 0.0 && p.is_finite()) || !(self.run_seconds > 0.0 && self.run_seconds.is_finite()) {
            return Err(ConfigError::invalid("claim_period_seconds", "run and claim period must be positive"));
        }
        let ratio = self.run_seconds / p;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(ConfigError::invalid(
                "claim_period_seconds",
                format!("run_seconds / claim_period_seconds = {ratio} is not a positive integer"),
            ));
        }
        Ok(rounded as usize)
    }

    /// Distance-bound slack added on top of a noise-free gate.
    pub fn acceptance_margin(&self) -> f64 {
        self.d_acc - self.d_max
    }

    pub fn in_effective_zone(&self, point: Vector3) -> bool {
        noise_free_effective_zone(point, &self.witness_positions, self.d_max, self.quorum_k)
    }

    /// Whether `point` lies inside the zone disc of radius `radius` around the origin.
    pub fn contains(&self, point: Vector3) -> bool {
        distance(point, Vector3::ORIGIN) <= self.radius
    }
}

/// A registered witness: identifier, verification key and fixed position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessIdentity {
    pub witness_id: String,
    pub public_key: [u8; 32],
    pub position: Vector3,
}

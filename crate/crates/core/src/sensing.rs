//! Witness-local sensing: RF fingerprint similarity, semantic visual
//! queries, and pass-through audio / inertial / beacon sensors.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{deterministic_path_loss, sample_path_loss, ChannelParams};
use crate::geometry::{distance, Vector3};

/// Path-loss mismatch at which RF similarity reaches zero.
pub const RF_FULL_SCALE_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    RfFingerprint,
    Visual,
    Audio,
    Imu,
    Beacon,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::RfFingerprint,
        Modality::Visual,
        Modality::Audio,
        Modality::Imu,
        Modality::Beacon,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::RfFingerprint => "rf_fingerprint",
            Modality::Visual => "visual",
            Modality::Audio => "audio",
            Modality::Imu => "imu",
            Modality::Beacon => "beacon",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Modality::RfFingerprint => 0,
            Modality::Visual => 1,
            Modality::Audio => 2,
            Modality::Imu => 3,
            Modality::Beacon => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureValue {
    Scalar(f64),
    Flag(bool),
    Count(u32),
}

/// Compact, policy-relevant summary of one sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub modality: Modality,
    pub value: FeatureValue,
    /// In [0, 1].
    pub quality: f64,
    /// Seconds since the sample was taken.
    pub freshness: f64,
    pub witness_id: String,
}

impl FeatureDescriptor {
    pub fn new(modality: Modality, value: FeatureValue, witness_id: &str) -> Self {
        FeatureDescriptor {
            modality,
            value,
            quality: 1.0,
            freshness: 0.0,
            witness_id: witness_id.to_string(),
        }
    }

    /// Metadata invariants; `interval_seconds` bounds freshness.
    pub fn is_well_formed(&self, interval_seconds: f64) -> bool {
        (0.0..=1.0).contains(&self.quality) && self.freshness >= 0.0 && self.freshness < interval_seconds
    }
}

/// Set of semantic labels visible to witnesses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub objects: BTreeSet<String>,
}

impl Scene {
    pub fn with_objects<I, S>(objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Scene {
            objects: objects.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.objects.contains(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Per-witness probability of detecting an object that is present.
    pub p_det: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams { p_det: 0.987 }
    }
}

/// Linear similarity of observed vs expected path loss: 1 at a perfect
/// match, 0 at a mismatch of `RF_FULL_SCALE_DB` or more.
pub fn rf_similarity(observed_pl: f64, expected_pl: f64) -> f64 {
    (1.0 - (observed_pl - expected_pl).abs() / RF_FULL_SCALE_DB).max(0.0)
}

/// RF fingerprint: the observation follows the prover's true position, the
/// expectation follows its claimed position.
pub fn sample_rf_feature<R: Rng + ?Sized>(
    witness_id: &str,
    witness_pos: Vector3,
    prover_true: Vector3,
    prover_claimed: Vector3,
    params: &ChannelParams,
    rng: &mut R,
) -> FeatureDescriptor {
    let observed = sample_path_loss(distance(witness_pos, prover_true), params, rng);
    let expected = deterministic_path_loss(distance(witness_pos, prover_claimed), params);
    FeatureDescriptor::new(
        Modality::RfFingerprint,
        FeatureValue::Scalar(rf_similarity(observed, expected)),
        witness_id,
    )
}

/// Semantic scene query. No false positives: an absent label is never
/// reported. One uniform draw is consumed either way so the stream stays
/// aligned across scenes.
pub fn visual_detect<R: Rng + ?Sized>(scene: &Scene, query: &str, p_det: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    scene.contains(query) && u < p_det
}

pub fn sample_visual_feature<R: Rng + ?Sized>(
    witness_id: &str,
    scene: &Scene,
    query: &str,
    p_det: f64,
    rng: &mut R,
) -> FeatureDescriptor {
    let seen = visual_detect(scene, query, p_det, rng);
    FeatureDescriptor::new(Modality::Visual, FeatureValue::Flag(seen), witness_id)
}

/// Pass-through sensors for modalities modeled only qualitatively.
pub fn pass_through_feature(witness_id: &str, modality: Modality, beacons_visible: u32) -> FeatureDescriptor {
    let value = match modality {
        Modality::Beacon => FeatureValue::Count(beacons_visible),
        Modality::RfFingerprint | Modality::Visual => FeatureValue::Scalar(1.0),
        Modality::Audio | Modality::Imu => FeatureValue::Flag(true),
    };
    FeatureDescriptor::new(modality, value, witness_id)
}

//! Versioned admission policies: document parsing, rendering and the
//! per-witness admit predicate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::RangingResult;
use crate::doc::{self, format_number, number_with_unit, Section};
use crate::encoding::{Encoder, Hash256};
use crate::error::PolicyError;
use crate::evidence::Claim;
use crate::geometry::ZoneConfig;
use crate::sensing::{FeatureDescriptor, FeatureValue, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementKind {
    DistanceBound,
    RfSimilarity,
    VisualSimilarity,
    AudioHashMatch,
    BeaconOverlap,
    ImuPattern,
}

impl RequirementKind {
    pub const ALL: [RequirementKind; 6] = [
        RequirementKind::DistanceBound,
        RequirementKind::RfSimilarity,
        RequirementKind::VisualSimilarity,
        RequirementKind::AudioHashMatch,
        RequirementKind::BeaconOverlap,
        RequirementKind::ImuPattern,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RequirementKind::DistanceBound => "distance_bound",
            RequirementKind::RfSimilarity => "rf_similarity",
            RequirementKind::VisualSimilarity => "visual_similarity",
            RequirementKind::AudioHashMatch => "audio_hash_match",
            RequirementKind::BeaconOverlap => "beacon_overlap",
            RequirementKind::ImuPattern => "imu_pattern",
        }
    }
}

impl fmt::Display for RequirementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequirementKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RequirementKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PolicyError::UnknownRequirement(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Requirement {
    /// Noise-free gate in meters; the zone's acceptance margin is added
    /// when comparing against noisy estimates.
    DistanceBound { max_distance: f64 },
    RfSimilarity { metric: Option<String>, threshold: f64 },
    /// With a `query`, the witness asks its visual sensor for that label.
    VisualSimilarity {
        metric: String,
        threshold: f64,
        query: Option<String>,
    },
    AudioHashMatch { required: bool },
    BeaconOverlap { min_count: u32 },
    ImuPattern { pattern: String },
}

impl Requirement {
    pub fn kind(&self) -> RequirementKind {
        match self {
            Requirement::DistanceBound { .. } => RequirementKind::DistanceBound,
            Requirement::RfSimilarity { .. } => RequirementKind::RfSimilarity,
            Requirement::VisualSimilarity { .. } => RequirementKind::VisualSimilarity,
            Requirement::AudioHashMatch { .. } => RequirementKind::AudioHashMatch,
            Requirement::BeaconOverlap { .. } => RequirementKind::BeaconOverlap,
            Requirement::ImuPattern { .. } => RequirementKind::ImuPattern,
        }
    }

    /// Sensor modality whose descriptor this requirement consumes.
    pub fn modality(&self) -> Option<Modality> {
        match self {
            Requirement::DistanceBound { .. } => None,
            Requirement::RfSimilarity { .. } => Some(Modality::RfFingerprint),
            Requirement::VisualSimilarity { .. } => Some(Modality::Visual),
            Requirement::AudioHashMatch { .. } => Some(Modality::Audio),
            Requirement::BeaconOverlap { .. } => Some(Modality::Beacon),
            Requirement::ImuPattern { .. } => Some(Modality::Imu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnFail {
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub policy_id: String,
    pub zone_id: String,
    pub interval_seconds: f64,
    pub quorum_k: usize,
    pub quorum_n: usize,
    pub requirements: Vec<Requirement>,
    pub on_fail: OnFail,
}

pub const SUPPLY_CHAIN_V1: &str = "\
policy: supply_chain_v1
zone_id: Z-17
interval: 2s
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    rf_similarity:
        metric: rss_fingerprint
        threshold: 0.5
on_fail: reject
";

pub const VISUAL_V1: &str = "\
policy: visual_v1
zone_id: Z-17
interval: 2s
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    rf_similarity:
        metric: rss_fingerprint
        threshold: 0.5
    visual_similarity:
        metric: semantic_query
        threshold: 0.5
        query: red car
on_fail: reject
";

pub const COCOA_V1: &str = "\
policy: cocoa_v1
zone_id: Z-17
interval: 2s
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    rf_similarity:
        metric: ble_fingerprint
        threshold: 0.85
on_fail: reject
";

pub const MEDIA_V2: &str = "\
policy: media_v2
zone_id: Z-17
interval: 2s
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    visual_similarity:
        metric: vlm_embedding
        threshold: 0.70
    audio_hash_match: true
    beacon_overlap:
        min_count: 2
on_fail: reject
";

pub const MOBILITY_V3: &str = "\
policy: mobility_v3
zone_id: Z-17
interval: 2s
quorum:
    k: 3
    n: 4
requirements:
    distance_bound:
        max_distance: 20m
    imu_pattern:
        pattern: crossing
    rf_similarity:
        metric: rf_environment
        threshold: 0.5
on_fail: reject
";

/// Every policy document shipped with the crate, by id.
pub const BUILTIN_POLICIES: [(&str, &str); 5] = [
    ("supply_chain_v1", SUPPLY_CHAIN_V1),
    ("visual_v1", VISUAL_V1),
    ("cocoa_v1", COCOA_V1),
    ("media_v2", MEDIA_V2),
    ("mobility_v3", MOBILITY_V3),
];

pub fn builtin_policy(id: &str) -> Option<Policy> {
    BUILTIN_POLICIES
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, text)| parse_policy(text).expect("built-in policy parses"))
}

fn invalid(key: &str, value: &str) -> PolicyError {
    PolicyError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn out_of_range(kind: RequirementKind, value: &str) -> PolicyError {
    PolicyError::ThresholdOutOfRange {
        kind: kind.as_str().to_string(),
        value: value.to_string(),
    }
}

fn required<'a>(s: &'a Section, key: &str, path: &str) -> Result<&'a str, PolicyError> {
    s.scalar(key)?.ok_or_else(|| PolicyError::MissingField(doc::join(path, key)))
}

fn similarity_threshold(s: &Section, kind: RequirementKind, path: &str) -> Result<f64, PolicyError> {
    let raw = required(s, "threshold", path)?;
    let v = number_with_unit(raw, "").ok_or_else(|| invalid(&doc::join(path, "threshold"), raw))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(out_of_range(kind, raw));
    }
    Ok(v)
}

fn identifier(raw: &str, key: &str) -> Result<String, PolicyError> {
    let ok = !raw.is_empty() && raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(raw.to_string())
    } else {
        Err(invalid(key, raw))
    }
}

fn parse_bool(raw: &str, key: &str) -> Result<bool, PolicyError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, raw)),
    }
}

fn parse_requirement(entry: &doc::Entry) -> Result<Requirement, PolicyError> {
    let kind: RequirementKind = entry.key.parse()?;
    let path = format!("requirements.{}", entry.key);
    let section = |allowed: &[&str]| -> Result<&Section, PolicyError> {
        match &entry.value {
            doc::Value::Section(s) => {
                s.deny_unknown(allowed, &path)?;
                Ok(s)
            }
            doc::Value::Scalar(v) => Err(invalid(&path, v)),
        }
    };
    Ok(match kind {
        RequirementKind::DistanceBound => {
            let s = section(&["max_distance"])?;
            let raw = required(s, "max_distance", &path)?;
            let v = number_with_unit(raw, "m").ok_or_else(|| invalid(&format!("{path}.max_distance"), raw))?;
            if v <= 0.0 {
                return Err(out_of_range(kind, raw));
            }
            Requirement::DistanceBound { max_distance: v }
        }
        RequirementKind::RfSimilarity => {
            let s = section(&["metric", "threshold"])?;
            let metric = s.scalar("metric")?.map(|m| identifier(m, &format!("{path}.metric"))).transpose()?;
            Requirement::RfSimilarity {
                metric,
                threshold: similarity_threshold(s, kind, &path)?,
            }
        }
        RequirementKind::VisualSimilarity => {
            let s = section(&["metric", "threshold", "query"])?;
            let metric = identifier(required(s, "metric", &path)?, &format!("{path}.metric"))?;
            let query = s.scalar("query")?.map(str::to_string);
            Requirement::VisualSimilarity {
                metric,
                threshold: similarity_threshold(s, kind, &path)?,
                query,
            }
        }
        RequirementKind::AudioHashMatch => match &entry.value {
            doc::Value::Scalar(v) => Requirement::AudioHashMatch {
                required: parse_bool(v, &path)?,
            },
            doc::Value::Section(_) => return Err(invalid(&path, "<section>")),
        },
        RequirementKind::BeaconOverlap => {
            let s = section(&["min_count"])?;
            let raw = required(s, "min_count", &path)?;
            let v: i64 = raw.parse().map_err(|_| invalid(&format!("{path}.min_count"), raw))?;
            let min_count = u32::try_from(v).map_err(|_| out_of_range(kind, raw))?;
            Requirement::BeaconOverlap { min_count }
        }
        RequirementKind::ImuPattern => {
            let s = section(&["pattern"])?;
            Requirement::ImuPattern {
                pattern: identifier(required(s, "pattern", &path)?, &format!("{path}.pattern"))?,
            }
        }
    })
}

pub fn parse_policy(text: &str) -> Result<Policy, PolicyError> {
    let root = doc::parse(text)?;
    policy_from_section(&root)
}

pub fn policy_from_section(root: &Section) -> Result<Policy, PolicyError> {
    root.deny_unknown(&["policy", "zone_id", "interval", "quorum", "requirements", "on_fail"], "")?;

    let policy_id = required(root, "policy", "")?;
    let versioned = policy_id
        .rsplit_once("_v")
        .is_some_and(|(name, v)| !name.is_empty() && !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()));
    if !versioned {
        return Err(invalid("policy", policy_id));
    }
    let zone_id = identifier(required(root, "zone_id", "")?, "zone_id")?;
    let interval_raw = required(root, "interval", "")?;
    let interval_seconds = number_with_unit(interval_raw, "s")
        .filter(|v| *v > 0.0)
        .ok_or_else(|| invalid("interval", interval_raw))?;

    let quorum = root.section("quorum")?.ok_or(PolicyError::MissingQuorum)?;
    quorum.deny_unknown(&["k", "n"], "quorum")?;
    let count = |key: &str| -> Result<usize, PolicyError> {
        let raw = required(quorum, key, "quorum")?;
        raw.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| invalid(&format!("quorum.{key}"), raw))
    };
    let (quorum_k, quorum_n) = (count("k")?, count("n")?);
    if quorum_k > quorum_n {
        return Err(PolicyError::QuorumInvariant { k: quorum_k, n: quorum_n });
    }

    let reqs = root
        .section("requirements")?
        .ok_or_else(|| PolicyError::MissingField("requirements".into()))?;
    let requirements = reqs.entries.iter().map(parse_requirement).collect::<Result<Vec<_>, _>>()?;

    let on_fail = match root.scalar("on_fail")? {
        None | Some("reject") => OnFail::Reject,
        Some(other) => return Err(invalid("on_fail", other)),
    };

    Ok(Policy {
        policy_id: policy_id.to_string(),
        zone_id,
        interval_seconds,
        quorum_k,
        quorum_n,
        requirements,
        on_fail,
    })
}

impl Policy {
    pub fn to_section(&self) -> Section {
        let mut root = Section::default();
        root.push_scalar("policy", &self.policy_id);
        root.push_scalar("zone_id", &self.zone_id);
        root.push_scalar("interval", format_number(self.interval_seconds, "s"));
        let mut q = Section::default();
        q.push_scalar("k", self.quorum_k.to_string());
        q.push_scalar("n", self.quorum_n.to_string());
        root.push_section("quorum", q);
        let mut reqs = Section::default();
        for r in &self.requirements {
            let key = r.kind().as_str();
            let mut s = Section::default();
            match r {
                Requirement::DistanceBound { max_distance } => {
                    s.push_scalar("max_distance", format_number(*max_distance, "m"));
                }
                Requirement::RfSimilarity { metric, threshold } => {
                    if let Some(m) = metric {
                        s.push_scalar("metric", m);
                    }
                    s.push_scalar("threshold", format_number(*threshold, ""));
                }
                Requirement::VisualSimilarity { metric, threshold, query } => {
                    s.push_scalar("metric", metric);
                    s.push_scalar("threshold", format_number(*threshold, ""));
                    if let Some(q) = query {
                        s.push_scalar("query", q);
                    }
                }
                Requirement::AudioHashMatch { required } => {
                    reqs.push_scalar(key, required.to_string());
                    continue;
                }
                Requirement::BeaconOverlap { min_count } => s.push_scalar("min_count", min_count.to_string()),
                Requirement::ImuPattern { pattern } => s.push_scalar("pattern", pattern),
            }
            reqs.push_section(key, s);
        }
        root.push_section("requirements", reqs);
        root.push_scalar("on_fail", "reject");
        root
    }

    /// Policy document text; parses back to an equal policy.
    pub fn to_text(&self) -> String {
        self.to_section().render()
    }

    pub fn requirement(&self, kind: RequirementKind) -> Option<&Requirement> {
        self.requirements.iter().find(|r| r.kind() == kind)
    }

    /// Distance gate applied to noisy estimates in `zone`.
    pub fn distance_gate(&self, zone: &ZoneConfig) -> Option<f64> {
        match self.requirement(RequirementKind::DistanceBound) {
            Some(Requirement::DistanceBound { max_distance }) => Some(max_distance + zone.acceptance_margin()),
            _ => None,
        }
    }
}

/// Output of the admit predicate for one witness and one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmitDecision {
    pub admitted: bool,
    pub per_requirement: BTreeMap<RequirementKind, bool>,
    pub evaluated_inputs_digest: Hash256,
}

fn fresh<'a>(
    features: &'a [FeatureDescriptor],
    modality: Modality,
    interval_seconds: f64,
) -> impl Iterator<Item = &'a FeatureDescriptor> {
    features
        .iter()
        .filter(move |f| f.modality == modality && f.is_well_formed(interval_seconds))
}

fn requirement_holds(
    req: &Requirement,
    zone: &ZoneConfig,
    interval_seconds: f64,
    estimate: f64,
    features: &[FeatureDescriptor],
) -> bool {
    let feats = || req.modality().into_iter().flat_map(|m| fresh(features, m, interval_seconds));
    match req {
        Requirement::DistanceBound { max_distance } => estimate <= max_distance + zone.acceptance_margin(),
        Requirement::RfSimilarity { threshold, .. } => {
            feats().any(|f| matches!(f.value, FeatureValue::Scalar(v) if v > *threshold))
        }
        Requirement::VisualSimilarity { threshold, .. } => feats().any(|f| match f.value {
            FeatureValue::Flag(seen) => seen,
            FeatureValue::Scalar(v) => v > *threshold,
            FeatureValue::Count(_) => false,
        }),
        Requirement::AudioHashMatch { required } => {
            !required || feats().any(|f| f.value == FeatureValue::Flag(true))
        }
        Requirement::BeaconOverlap { min_count } => {
            feats().any(|f| matches!(f.value, FeatureValue::Count(c) if c >= *min_count))
        }
        Requirement::ImuPattern { .. } => feats().any(|f| f.value == FeatureValue::Flag(true)),
    }
}

/// Requirement outcomes without the input digest. Missing or stale
/// descriptors make their requirement false.
pub fn evaluate_requirements(
    policy: &Policy,
    zone: &ZoneConfig,
    estimate: f64,
    features: &[FeatureDescriptor],
) -> BTreeMap<RequirementKind, bool> {
    policy
        .requirements
        .iter()
        .map(|r| (r.kind(), requirement_holds(r, zone, policy.interval_seconds, estimate, features)))
        .collect()
}

pub fn encode_per_requirement(enc: &mut Encoder, per: &BTreeMap<RequirementKind, bool>) {
    let pairs: Vec<(&RequirementKind, &bool)> = per.iter().collect();
    enc.seq(&pairs, |e, (k, v)| {
        e.str(k.as_str()).bool(**v);
    });
}

/// The admit predicate: conjunction of the policy's requirements over the
/// witness's distance bound and feature descriptors.
pub fn evaluate_admit(
    policy: &Policy,
    zone: &ZoneConfig,
    claim: &Claim,
    ranging: &RangingResult,
    features: &[FeatureDescriptor],
) -> AdmitDecision {
    let per_requirement = evaluate_requirements(policy, zone, ranging.estimate, features);
    let admitted = per_requirement.values().all(|v| *v);
    let mut enc = Encoder::default();
    enc.str(&policy.policy_id)
        .hash(&claim.claim_id)
        .f64(ranging.estimate)
        .records(features);
    encode_per_requirement(&mut enc, &per_requirement);
    AdmitDecision {
        admitted,
        per_requirement,
        evaluated_inputs_digest: Hash256::of(&enc.finish()),
    }
}

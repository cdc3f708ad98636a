//! Per-witness execution for one claim and the per-interval quorum tally.
//!
//! A witness ranges the prover, samples the sensors its policy asks for,
//! evaluates the admit predicate and, when it admits, commits the decision
//! inputs to a Merkle root and signs. Ranging and sensing always act on the
//! prover's true position; the claimed position only enters expectations.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Block, BlockChain};
use crate::channel::{range_estimate_delayed, RangingResult};
use crate::encoding::{Canonical, Decoder, Encoder, Hash256};
use crate::error::EncodingError;
use crate::evidence::{
    assemble_evidence, sign_attestation, verify_attestation, Attestation, AttestationFields, Claim, EvidenceObject,
    Registry, WitnessKey,
};
use crate::geometry::{distance, Vector3, WitnessIdentity, ZoneConfig};
use crate::merkle::merkle_root;
use crate::policy::{encode_per_requirement, evaluate_admit, evaluate_requirements, Policy, Requirement, RequirementKind};
use crate::sensing::{
    pass_through_feature, sample_rf_feature, sample_visual_feature, FeatureDescriptor, FeatureValue, Scene,
    SensorParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessBehavior {
    #[default]
    Honest,
    Offline,
    /// Signs an admit regardless of its own checks.
    Colluder,
    /// Signs admits for the claim and for a conflicting claim in the same interval.
    Equivocator,
}

impl WitnessBehavior {
    pub fn as_str(&self) -> &'static str {
        match self {
            WitnessBehavior::Honest => "honest",
            WitnessBehavior::Offline => "offline",
            WitnessBehavior::Colluder => "colluder",
            WitnessBehavior::Equivocator => "equivocator",
        }
    }
}

impl fmt::Display for WitnessBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WitnessBehavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(WitnessBehavior::Honest),
            "offline" => Ok(WitnessBehavior::Offline),
            "colluder" => Ok(WitnessBehavior::Colluder),
            "equivocator" => Ok(WitnessBehavior::Equivocator),
            other => Err(format!("unknown witness behavior `{other}`")),
        }
    }
}

/// Simulation-grade keys for every witness of `zone`, derived from the
/// master seed. Witness ids are `W1..Wn` in layout order.
pub fn derive_witness_keys(master_seed: u64, zone: &ZoneConfig) -> Vec<WitnessKey> {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed ^ 0x7769_746e_6573_736b);
    (1..=zone.witness_count)
        .map(|i| {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            WitnessKey::from_seed(&format!("W{i}"), seed)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct WitnessNode {
    pub identity: WitnessIdentity,
    pub key: WitnessKey,
    pub behavior: WitnessBehavior,
}

/// Witness nodes for a zone; missing behaviors default to honest.
pub fn build_witnesses(zone: &ZoneConfig, keys: &[WitnessKey], behaviors: &[WitnessBehavior]) -> Vec<WitnessNode> {
    keys.iter()
        .zip(&zone.witness_positions)
        .enumerate()
        .map(|(i, (key, pos))| WitnessNode {
            identity: WitnessIdentity {
                witness_id: key.witness_id.clone(),
                public_key: key.public_key(),
                position: *pos,
            },
            key: key.clone(),
            behavior: behaviors.get(i).copied().unwrap_or_default(),
        })
        .collect()
}

/// Everything a witness sees while handling one claim.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub zone: &'a ZoneConfig,
    pub policy: &'a Policy,
    pub claim: &'a Claim,
    pub prover_true: Vector3,
    /// Extra processing delay added by the prover, in meters.
    pub prover_delay_m: f64,
    pub scene: &'a Scene,
    pub sensors: &'a SensorParams,
    /// Digest of the last finalized block.
    pub block_ref: Hash256,
}

/// Ranges the prover and samples the sensors the policy needs.
pub fn observe<R: Rng + ?Sized>(
    witness_id: &str,
    position: Vector3,
    ctx: &StepContext<'_>,
    rng: &mut R,
) -> (RangingResult, Vec<FeatureDescriptor>) {
    let channel = &ctx.zone.channel;
    let ranging = range_estimate_delayed(
        witness_id,
        distance(position, ctx.prover_true),
        ctx.prover_delay_m,
        channel,
        rng,
    );
    let mut features = Vec::new();
    for req in &ctx.policy.requirements {
        let f = match req {
            Requirement::DistanceBound { .. } => continue,
            Requirement::RfSimilarity { .. } => sample_rf_feature(
                witness_id,
                position,
                ctx.prover_true,
                ctx.claim.claimed_position,
                channel,
                rng,
            ),
            Requirement::VisualSimilarity { query: Some(q), .. } => {
                sample_visual_feature(witness_id, ctx.scene, q, ctx.sensors.p_det, rng)
            }
            other => pass_through_feature(
                witness_id,
                other.modality().expect("non-distance requirement has a modality"),
                ctx.zone.witness_count as u32,
            ),
        };
        features.push(f);
    }
    (ranging, features)
}

/// Admission decision of an honest witness without commitment or signing.
pub fn witness_admits<R: Rng + ?Sized>(witness_id: &str, position: Vector3, ctx: &StepContext<'_>, rng: &mut R) -> bool {
    let (ranging, features) = observe(witness_id, position, ctx, rng);
    evaluate_requirements(ctx.policy, ctx.zone, ranging.estimate, &features)
        .values()
        .all(|v| *v)
}

/// Committed decision inputs retained by a witness for later opening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub witness_id: String,
    pub claim_id: Hash256,
    pub leaves: Vec<Vec<u8>>,
    pub root: Hash256,
}

impl Canonical for Commitment {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.str(&self.witness_id).hash(&self.claim_id).seq(&self.leaves, |e, l| {
            e.bytes(l);
        });
        enc.hash(&self.root);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(Commitment {
            witness_id: dec.string()?,
            claim_id: dec.hash()?,
            leaves: dec.seq(|d| d.bytes())?,
            root: dec.hash()?,
        })
    }
}

/// Merkle leaves: claim id, distance bound, each descriptor, the
/// per-requirement outcomes, then the policy id.
pub fn decision_leaves(
    claim_id: &Hash256,
    estimate: f64,
    features: &[FeatureDescriptor],
    per_requirement: &std::collections::BTreeMap<RequirementKind, bool>,
    policy_id: &str,
) -> Vec<Vec<u8>> {
    let mut leaves = Vec::with_capacity(features.len() + 4);
    let mut e = Encoder::default();
    e.hash(claim_id);
    leaves.push(e.finish());
    let mut e = Encoder::default();
    e.f64(estimate);
    leaves.push(e.finish());
    leaves.extend(features.iter().map(Canonical::canonical_bytes));
    let mut e = Encoder::default();
    encode_per_requirement(&mut e, per_requirement);
    leaves.push(e.finish());
    let mut e = Encoder::default();
    e.str(policy_id);
    leaves.push(e.finish());
    leaves
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub interval_index: u64,
    pub witness_id: String,
    pub behavior: WitnessBehavior,
    /// `admit`, `reject`, `offline` or `forced_admit`.
    pub decision: String,
    pub estimate: Option<f64>,
    pub features: Vec<(String, FeatureValue)>,
    pub attested_claims: Vec<Hash256>,
}

#[derive(Debug, Clone)]
pub struct WitnessOutput {
    pub attestations: Vec<Attestation>,
    pub commitments: Vec<Commitment>,
    pub log: LogRecord,
}

fn commit_and_sign(
    node: &WitnessNode,
    ctx: &StepContext<'_>,
    claim: &Claim,
    ranging: &RangingResult,
    features: &[FeatureDescriptor],
    per_requirement: &std::collections::BTreeMap<RequirementKind, bool>,
) -> (Attestation, Commitment) {
    let leaves = decision_leaves(&claim.claim_id, ranging.estimate, features, per_requirement, &ctx.policy.policy_id);
    let root = merkle_root(&leaves).expect("decision leaves are never empty");
    let att = sign_attestation(
        &node.key,
        AttestationFields {
            interval_index: claim.interval_index,
            block_ref: ctx.block_ref,
            claim_id: claim.claim_id,
            merkle_root: root,
            policy_id: ctx.policy.policy_id.clone(),
            zone_id: ctx.zone.zone_id.clone(),
        },
    );
    let commitment = Commitment {
        witness_id: node.identity.witness_id.clone(),
        claim_id: claim.claim_id,
        leaves,
        root,
    };
    (att, commitment)
}

/// A claim in the same interval that contradicts `claim`.
pub fn conflicting_claim(claim: &Claim) -> Claim {
    let mut payload = claim.payload.clone();
    payload.extend_from_slice(b"/conflict");
    Claim::new(
        claim.interval_index,
        &claim.zone_id,
        claim.claimed_position,
        claim.disclosed_features.clone(),
        payload,
    )
}

pub fn witness_step<R: Rng + ?Sized>(node: &WitnessNode, ctx: &StepContext<'_>, rng: &mut R) -> WitnessOutput {
    let id = node.identity.witness_id.as_str();
    let mut log = LogRecord {
        interval_index: ctx.claim.interval_index,
        witness_id: id.to_string(),
        behavior: node.behavior,
        decision: "offline".into(),
        estimate: None,
        features: Vec::new(),
        attested_claims: Vec::new(),
    };
    if node.behavior == WitnessBehavior::Offline {
        return WitnessOutput {
            attestations: Vec::new(),
            commitments: Vec::new(),
            log,
        };
    }

    let (ranging, features) = observe(id, node.identity.position, ctx, rng);
    let decision = evaluate_admit(ctx.policy, ctx.zone, ctx.claim, &ranging, &features);
    log.estimate = Some(ranging.estimate);
    log.features = features.iter().map(|f| (f.modality.as_str().to_string(), f.value)).collect();

    let mut claims = Vec::new();
    match node.behavior {
        WitnessBehavior::Honest => {
            log.decision = if decision.admitted { "admit" } else { "reject" }.into();
            if decision.admitted {
                claims.push(ctx.claim.clone());
            }
        }
        WitnessBehavior::Colluder => {
            log.decision = "forced_admit".into();
            claims.push(ctx.claim.clone());
        }
        WitnessBehavior::Equivocator => {
            log.decision = "forced_admit".into();
            claims.push(ctx.claim.clone());
            claims.push(conflicting_claim(ctx.claim));
        }
        WitnessBehavior::Offline => unreachable!(),
    }

    let mut attestations = Vec::with_capacity(claims.len());
    let mut commitments = Vec::with_capacity(claims.len());
    for claim in &claims {
        let (att, com) = commit_and_sign(node, ctx, claim, &ranging, &features, &decision.per_requirement);
        log.attested_claims.push(claim.claim_id);
        attestations.push(att);
        commitments.push(com);
    }
    WitnessOutput {
        attestations,
        commitments,
        log,
    }
}

/// Result of tallying one claim before its interval's block is sealed.
#[derive(Debug, Clone)]
pub struct ClaimTally {
    pub claim: Claim,
    pub attestations: Vec<Attestation>,
    pub evidence: Option<EvidenceObject>,
    pub commitments: Vec<Commitment>,
    pub log: Vec<LogRecord>,
}

/// Runs every witness on the claim, keeps attestations that verify against
/// the registry, and assembles evidence if a quorum formed.
pub fn tally_claim<R: Rng + ?Sized>(
    nodes: &[WitnessNode],
    registry: &Registry,
    ctx: &StepContext<'_>,
    rng: &mut R,
) -> ClaimTally {
    let mut attestations = Vec::new();
    let mut commitments = Vec::new();
    let mut log = Vec::with_capacity(nodes.len());
    for node in nodes {
        let out = witness_step(node, ctx, rng);
        attestations.extend(out.attestations);
        commitments.extend(out.commitments);
        log.push(out.log);
    }
    let valid: Vec<Attestation> = attestations
        .iter()
        .filter(|a| verify_attestation(a, registry) == Ok(true))
        .cloned()
        .collect();
    let evidence = assemble_evidence(&valid, ctx.zone, ctx.claim).ok();
    ClaimTally {
        claim: ctx.claim.clone(),
        attestations,
        evidence,
        commitments,
        log,
    }
}

#[derive(Debug, Clone)]
pub struct IntervalOutcome {
    pub interval_index: u64,
    pub claim_id: Hash256,
    /// Every attestation broadcast for this claim, including conflicting ones.
    pub attestations: Vec<Attestation>,
    pub admitted: bool,
    pub evidence: Option<EvidenceObject>,
    pub block: Block,
    pub commitments: Vec<Commitment>,
    pub log: Vec<LogRecord>,
}

impl IntervalOutcome {
    pub fn from_tally(tally: ClaimTally, block: Block) -> Self {
        IntervalOutcome {
            interval_index: tally.claim.interval_index,
            claim_id: tally.claim.claim_id,
            attestations: tally.attestations,
            admitted: tally.evidence.is_some(),
            evidence: tally.evidence,
            block,
            commitments: tally.commitments,
            log: tally.log,
        }
    }
}

impl Canonical for IntervalOutcome {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(self.interval_index)
            .hash(&self.claim_id)
            .records(&self.attestations)
            .bool(self.admitted)
            .option(&self.evidence)
            .record(&self.block)
            .records(&self.commitments);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(IntervalOutcome {
            interval_index: dec.u64()?,
            claim_id: dec.hash()?,
            attestations: dec.records()?,
            admitted: dec.bool()?,
            evidence: dec.option()?,
            block: dec.record()?,
            commitments: dec.records()?,
            log: Vec::new(),
        })
    }
}

/// One claim per interval: tally, then seal the interval's block with the
/// claim id if admitted. `ctx.block_ref` is taken from the chain head.
pub fn quorum_round<R: Rng + ?Sized>(
    nodes: &[WitnessNode],
    registry: &Registry,
    ctx: &StepContext<'_>,
    chain: &mut BlockChain,
    rng: &mut R,
) -> Result<IntervalOutcome, crate::error::ChainError> {
    let ctx = StepContext {
        block_ref: chain.head().digest,
        ..*ctx
    };
    let tally = tally_claim(nodes, registry, &ctx, rng);
    let ids = tally.evidence.iter().map(|_| tally.claim.claim_id).collect();
    let block = chain.append(ctx.claim.interval_index, ids)?.clone();
    Ok(IntervalOutcome::from_tally(tally, block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{verify_evidence, Verdict};
    use crate::merkle::{prove_leaf, verify_leaf};
    use crate::policy::builtin_policy;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        zone: ZoneConfig,
        policy: Policy,
        keys: Vec<WitnessKey>,
        scene: Scene,
        sensors: SensorParams,
    }

    fn fixture() -> Fixture {
        let zone = ZoneConfig::with_witnesses(4).unwrap();
        Fixture {
            keys: derive_witness_keys(42, &zone),
            zone,
            policy: builtin_policy("supply_chain_v1").unwrap(),
            scene: Scene::default(),
            sensors: SensorParams::default(),
        }
    }

    fn ctx<'a>(f: &'a Fixture, claim: &'a Claim, truth: Vector3) -> StepContext<'a> {
        StepContext {
            zone: &f.zone,
            policy: &f.policy,
            claim,
            prover_true: truth,
            prover_delay_m: 0.0,
            scene: &f.scene,
            sensors: &f.sensors,
            block_ref: Hash256::ZERO,
        }
    }

    fn claim_at(pos: Vector3, interval: u64) -> Claim {
        Claim::new(interval, "Z-17", pos, vec![], b"c".to_vec())
    }

    #[test]
    fn keys_are_deterministic_and_distinct() {
        let f = fixture();
        let again = derive_witness_keys(42, &f.zone);
        assert_eq!(
            f.keys.iter().map(|k| k.public_key()).collect::<Vec<_>>(),
            again.iter().map(|k| k.public_key()).collect::<Vec<_>>()
        );
        let other = derive_witness_keys(43, &f.zone);
        assert_ne!(f.keys[0].public_key(), other[0].public_key());
        assert_ne!(f.keys[0].public_key(), f.keys[1].public_key());
    }

    #[test]
    fn honest_near_witness_attests() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(5.0, 5.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..2000).filter(|_| !witness_step(&nodes[0], &cx, &mut rng).attestations.is_empty()).count();
        assert!(hits >= 1998, "{hits}");
    }

    #[test]
    fn honest_far_witness_refuses() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(13.0, 13.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..2000).filter(|_| !witness_step(&nodes[3], &cx, &mut rng).attestations.is_empty()).count();
        assert!(hits <= 2, "{hits}");
    }

    #[test]
    fn offline_and_colluder() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[WitnessBehavior::Offline, WitnessBehavior::Honest, WitnessBehavior::Honest, WitnessBehavior::Colluder]);
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(13.0, 13.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let off = witness_step(&nodes[0], &cx, &mut rng);
        assert!(off.attestations.is_empty());
        assert_eq!(off.log.decision, "offline");
        let col = witness_step(&nodes[3], &cx, &mut rng);
        assert_eq!(col.attestations.len(), 1);
        assert_eq!(col.log.decision, "forced_admit");
    }

    #[test]
    fn equivocator_signs_two_claims() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[WitnessBehavior::Equivocator]);
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(5.0, 5.0));
        let out = witness_step(&nodes[0], &cx, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.attestations.len(), 2);
        assert_ne!(out.attestations[0].claim_id, out.attestations[1].claim_id);
        assert_eq!(crate::evidence::detect_equivocation(&out.attestations).len(), 1);
    }

    #[test]
    fn quorum_round_admits_and_evidence_verifies() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        let registry = Registry::new(&f.zone, &f.keys);
        let mut chain = BlockChain::new("Z-17");
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(5.0, 5.0));
        let out = quorum_round(&nodes, &registry, &cx, &mut chain, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(out.admitted);
        let ev = out.evidence.as_ref().unwrap();
        assert!(ev.witness_roots.len() >= 3);
        assert_eq!(ev.block_ref, chain.blocks()[0].digest);
        assert_eq!(verify_evidence(ev, &registry, &["supply_chain_v1"]), Verdict::Pass);
        assert_eq!(out.block.admitted_claim_ids, vec![c.claim_id]);

        // selective opening of a witness's committed inputs
        for com in &out.commitments {
            assert_eq!(ev.witness_roots.get(&com.witness_id), Some(&com.root));
            for i in 0..com.leaves.len() {
                let proof = prove_leaf(&com.leaves, i).unwrap();
                assert!(verify_leaf(&com.root, &com.leaves[i], &proof));
            }
        }
    }

    #[test]
    fn quorum_round_rejects_distance_fraud() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        let registry = Registry::new(&f.zone, &f.keys);
        let mut chain = BlockChain::new("Z-17");
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(13.0, 13.0));
        let out = quorum_round(&nodes, &registry, &cx, &mut chain, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(!out.admitted);
        assert!(out.evidence.is_none());
        assert!(out.block.admitted_claim_ids.is_empty());
    }

    #[test]
    fn forged_attestation_is_dropped() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        // registry with keys from another seed: nothing verifies
        let registry = Registry::new(&f.zone, &derive_witness_keys(7, &f.zone));
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(5.0, 5.0));
        let t = tally_claim(&nodes, &registry, &cx, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(t.attestations.len() >= 3);
        assert!(t.evidence.is_none());
    }

    #[test]
    fn outcome_encoding_round_trip() {
        let f = fixture();
        let nodes = build_witnesses(&f.zone, &f.keys, &[]);
        let registry = Registry::new(&f.zone, &f.keys);
        let mut chain = BlockChain::new("Z-17");
        let c = claim_at(Vector3::planar(5.0, 5.0), 1);
        let cx = ctx(&f, &c, Vector3::planar(5.0, 5.0));
        let out = quorum_round(&nodes, &registry, &cx, &mut chain, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let bytes = out.canonical_bytes();
        let back = IntervalOutcome::from_canonical_bytes(&bytes).unwrap();
        assert_eq!(back.canonical_bytes(), bytes);
    }
}

//! Claims, witness attestations, quorum evidence objects and their
//! verification against a zone registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::chain::Block;
use crate::encoding::{Canonical, Decoder, Encoder, Hash256};
use crate::error::{EncodingError, EvidenceError};
use crate::geometry::{Vector3, WitnessIdentity, ZoneConfig};
use crate::sensing::FeatureDescriptor;

pub const EVIDENCE_MAGIC: &[u8; 4] = b"WZEV";
pub const REGISTRY_MAGIC: &[u8; 4] = b"WZRG";
pub const CHAIN_MAGIC: &[u8; 4] = b"WZCH";

const ATTESTATION_DOMAIN: &str = "wzone/attestation/v1";

/// A prover's per-interval, context-bearing assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub claim_id: Hash256,
    pub interval_index: u64,
    pub zone_id: String,
    pub claimed_position: Vector3,
    pub disclosed_features: Vec<FeatureDescriptor>,
    pub payload: Vec<u8>,
}

impl Claim {
    pub fn new(
        interval_index: u64,
        zone_id: &str,
        claimed_position: Vector3,
        disclosed_features: Vec<FeatureDescriptor>,
        payload: Vec<u8>,
    ) -> Self {
        let mut c = Claim {
            claim_id: Hash256::ZERO,
            interval_index,
            zone_id: zone_id.to_string(),
            claimed_position,
            disclosed_features,
            payload,
        };
        c.claim_id = c.compute_id();
        c
    }

    fn encode_body(&self, enc: &mut Encoder) {
        enc.u64(self.interval_index)
            .str(&self.zone_id)
            .record(&self.claimed_position)
            .records(&self.disclosed_features)
            .bytes(&self.payload);
    }

    /// Digest of every field except `claim_id`.
    pub fn compute_id(&self) -> Hash256 {
        let mut enc = Encoder::default();
        self.encode_body(&mut enc);
        Hash256::of(&enc.finish())
    }
}

impl Canonical for Claim {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.hash(&self.claim_id);
        self.encode_body(enc);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(Claim {
            claim_id: dec.hash()?,
            interval_index: dec.u64()?,
            zone_id: dec.string()?,
            claimed_position: dec.record()?,
            disclosed_features: dec.records()?,
            payload: dec.bytes()?,
        })
    }
}

/// Signed fields of an attestation, minus the signer identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationFields {
    pub interval_index: u64,
    pub block_ref: Hash256,
    pub claim_id: Hash256,
    pub merkle_root: Hash256,
    pub policy_id: String,
    pub zone_id: String,
}

/// Bytes covered by a witness signature.
pub fn attestation_message(
    block_ref: &Hash256,
    claim_id: &Hash256,
    merkle_root: &Hash256,
    policy_id: &str,
    zone_id: &str,
) -> Vec<u8> {
    let mut enc = Encoder::default();
    enc.str(ATTESTATION_DOMAIN)
        .hash(block_ref)
        .hash(claim_id)
        .hash(merkle_root)
        .str(policy_id)
        .str(zone_id);
    enc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub witness_id: String,
    pub interval_index: u64,
    pub block_ref: Hash256,
    pub claim_id: Hash256,
    pub merkle_root: Hash256,
    pub policy_id: String,
    pub zone_id: String,
    pub signature: Vec<u8>,
}

impl Attestation {
    pub fn message(&self) -> Vec<u8> {
        attestation_message(&self.block_ref, &self.claim_id, &self.merkle_root, &self.policy_id, &self.zone_id)
    }
}

impl Canonical for Attestation {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.str(&self.witness_id)
            .u64(self.interval_index)
            .hash(&self.block_ref)
            .hash(&self.claim_id)
            .hash(&self.merkle_root)
            .str(&self.policy_id)
            .str(&self.zone_id)
            .bytes(&self.signature);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(Attestation {
            witness_id: dec.string()?,
            interval_index: dec.u64()?,
            block_ref: dec.hash()?,
            claim_id: dec.hash()?,
            merkle_root: dec.hash()?,
            policy_id: dec.string()?,
            zone_id: dec.string()?,
            signature: dec.bytes()?,
        })
    }
}

/// A witness's secret signing key.
#[derive(Clone)]
pub struct WitnessKey {
    pub witness_id: String,
    key: SigningKey,
}

impl fmt::Debug for WitnessKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WitnessKey").field("witness_id", &self.witness_id).finish_non_exhaustive()
    }
}

impl WitnessKey {
    pub fn from_seed(witness_id: &str, seed: [u8; 32]) -> Self {
        WitnessKey {
            witness_id: witness_id.to_string(),
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.key.sign(message).to_bytes().to_vec()
    }
}

pub fn sign_attestation(key: &WitnessKey, fields: AttestationFields) -> Attestation {
    let message = attestation_message(
        &fields.block_ref,
        &fields.claim_id,
        &fields.merkle_root,
        &fields.policy_id,
        &fields.zone_id,
    );
    Attestation {
        witness_id: key.witness_id.clone(),
        interval_index: fields.interval_index,
        block_ref: fields.block_ref,
        claim_id: fields.claim_id,
        merkle_root: fields.merkle_root,
        policy_id: fields.policy_id,
        zone_id: fields.zone_id,
        signature: key.sign(&message),
    }
}

/// Public witness identities of one zone plus its quorum threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub zone_id: String,
    pub quorum_k: usize,
    pub witnesses: Vec<WitnessIdentity>,
}

impl Registry {
    pub fn new(zone: &ZoneConfig, keys: &[WitnessKey]) -> Self {
        Registry {
            zone_id: zone.zone_id.clone(),
            quorum_k: zone.quorum_k,
            witnesses: keys
                .iter()
                .zip(&zone.witness_positions)
                .map(|(k, pos)| WitnessIdentity {
                    witness_id: k.witness_id.clone(),
                    public_key: k.public_key(),
                    position: *pos,
                })
                .collect(),
        }
    }

    pub fn get(&self, witness_id: &str) -> Option<&WitnessIdentity> {
        self.witnesses.iter().find(|w| w.witness_id == witness_id)
    }
}

impl Canonical for Registry {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.str(&self.zone_id).u64(self.quorum_k as u64).seq(&self.witnesses, |e, w| {
            e.str(&w.witness_id).bytes(&w.public_key).record(&w.position);
        });
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let zone_id = dec.string()?;
        let quorum_k = dec.u64()? as usize;
        let witnesses = dec.seq(|d| {
            let witness_id = d.string()?;
            let public_key: [u8; 32] = d
                .bytes()?
                .try_into()
                .map_err(|_| EncodingError::NonCanonical("public key must be 32 bytes".into()))?;
            Ok(WitnessIdentity {
                witness_id,
                public_key,
                position: d.record()?,
            })
        })?;
        let ids: BTreeSet<&str> = witnesses.iter().map(|w| w.witness_id.as_str()).collect();
        if ids.len() != witnesses.len() {
            return Err(EncodingError::NonCanonical("duplicate witness id".into()));
        }
        Ok(Registry {
            zone_id,
            quorum_k,
            witnesses,
        })
    }
}

fn verify_signature(identity: &WitnessIdentity, message: &[u8], signature: &[u8]) -> Result<bool, EvidenceError> {
    let key = VerifyingKey::from_bytes(&identity.public_key)
        .map_err(|_| EvidenceError::MalformedSignature(identity.witness_id.clone()))?;
    let sig = Signature::from_slice(signature).map_err(|_| EvidenceError::MalformedSignature(identity.witness_id.clone()))?;
    Ok(key.verify(message, &sig).is_ok())
}

/// `Ok(true)` for a valid signature by the registered key of
/// `att.witness_id`, `Ok(false)` for a well-formed but wrong signature.
pub fn verify_attestation(att: &Attestation, registry: &Registry) -> Result<bool, EvidenceError> {
    let identity = registry
        .get(&att.witness_id)
        .ok_or_else(|| EvidenceError::UnknownWitness(att.witness_id.clone()))?;
    verify_signature(identity, &att.message(), &att.signature)
}

/// Quorum authentication over per-witness commitments. The default
/// realization is a set of individual signatures; a threshold scheme can
/// take its place behind this trait.
pub trait QuorumSignature {
    fn signers(&self) -> BTreeSet<&str>;
    /// Checks the share of `witness_id` over `message`.
    fn verify_share(&self, identity: &WitnessIdentity, message: &[u8]) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MultisetSignature {
    pub signatures: BTreeMap<String, Vec<u8>>,
}

impl QuorumSignature for MultisetSignature {
    fn signers(&self) -> BTreeSet<&str> {
        self.signatures.keys().map(String::as_str).collect()
    }

    fn verify_share(&self, identity: &WitnessIdentity, message: &[u8]) -> bool {
        self.signatures
            .get(&identity.witness_id)
            .is_some_and(|sig| verify_signature(identity, message, sig).unwrap_or(false))
    }
}

/// Externally verifiable quorum artifact for one admitted claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceObject {
    pub block_ref: Hash256,
    pub claim: Claim,
    pub witness_roots: BTreeMap<String, Hash256>,
    pub quorum_signature: MultisetSignature,
    pub policy_id: String,
    pub zone_id: String,
}

impl Canonical for EvidenceObject {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.hash(&self.block_ref)
            .record(&self.claim)
            .map(&self.witness_roots, |e, r| {
                e.hash(r);
            })
            .map(&self.quorum_signature.signatures, |e, s| {
                e.bytes(s);
            })
            .str(&self.policy_id)
            .str(&self.zone_id);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(EvidenceObject {
            block_ref: dec.hash()?,
            claim: dec.record()?,
            witness_roots: dec.map(|d| d.hash())?,
            quorum_signature: MultisetSignature {
                signatures: dec.map(|d| d.bytes())?,
            },
            policy_id: dec.string()?,
            zone_id: dec.string()?,
        })
    }
}

/// Builds the evidence object from already-verified attestations.
///
/// Only attestations for this claim, interval and zone count; each witness
/// counts once. Attestations are grouped by `(policy_id, block_ref)` and the
/// largest group is used.
pub fn assemble_evidence(
    attestations: &[Attestation],
    zone: &ZoneConfig,
    claim: &Claim,
) -> Result<EvidenceObject, EvidenceError> {
    let mut groups: BTreeMap<(&str, Hash256), BTreeMap<&str, &Attestation>> = BTreeMap::new();
    for att in attestations {
        if att.interval_index != claim.interval_index
            || att.claim_id != claim.claim_id
            || att.zone_id != zone.zone_id
            || claim.zone_id != zone.zone_id
        {
            continue;
        }
        groups
            .entry((att.policy_id.as_str(), att.block_ref))
            .or_default()
            .entry(att.witness_id.as_str())
            .or_insert(att);
    }
    let best = groups
        .into_iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| b.0.cmp(&a.0)));
    let distinct = best.as_ref().map_or(0, |g| g.1.len());
    match best {
        Some(((policy_id, block_ref), members)) if distinct >= zone.quorum_k => Ok(EvidenceObject {
            block_ref,
            claim: claim.clone(),
            witness_roots: members.iter().map(|(id, a)| (id.to_string(), a.merkle_root)).collect(),
            quorum_signature: MultisetSignature {
                signatures: members.iter().map(|(id, a)| (id.to_string(), a.signature.clone())).collect(),
            },
            policy_id: policy_id.to_string(),
            zone_id: zone.zone_id.clone(),
        }),
        _ => Err(EvidenceError::InsufficientQuorum {
            distinct,
            required: zone.quorum_k,
        }),
    }
}

/// Outcome of evidence verification: pass, or the first failure found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    UnknownZone { zone_id: String },
    UnknownPolicy { policy_id: String },
    ClaimDigestMismatch,
    InsufficientQuorum { distinct: usize, required: usize },
    SignatureFailure { witness_id: String },
    BlockBindingMismatch,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::UnknownZone { zone_id } => write!(f, "unknown zone `{zone_id}`"),
            Verdict::UnknownPolicy { policy_id } => write!(f, "unknown policy version `{policy_id}`"),
            Verdict::ClaimDigestMismatch => write!(f, "claim digest mismatch"),
            Verdict::InsufficientQuorum { distinct, required } => {
                write!(f, "insufficient quorum ({distinct} of {required})")
            }
            Verdict::SignatureFailure { witness_id } => write!(f, "signature failure (witness `{witness_id}`)"),
            Verdict::BlockBindingMismatch => write!(f, "block binding mismatch"),
        }
    }
}

pub fn verify_evidence<S: AsRef<str>>(ev: &EvidenceObject, registry: &Registry, known_policies: &[S]) -> Verdict {
    if ev.zone_id != registry.zone_id || ev.claim.zone_id != ev.zone_id {
        return Verdict::UnknownZone {
            zone_id: ev.zone_id.clone(),
        };
    }
    if !known_policies.iter().any(|p| p.as_ref() == ev.policy_id) {
        return Verdict::UnknownPolicy {
            policy_id: ev.policy_id.clone(),
        };
    }
    if ev.claim.compute_id() != ev.claim.claim_id {
        return Verdict::ClaimDigestMismatch;
    }
    let roots: BTreeSet<&str> = ev.witness_roots.keys().map(String::as_str).collect();
    let signers = ev.quorum_signature.signers();
    if let Some(odd) = roots.symmetric_difference(&signers).next() {
        return Verdict::SignatureFailure {
            witness_id: odd.to_string(),
        };
    }
    if roots.len() < registry.quorum_k {
        return Verdict::InsufficientQuorum {
            distinct: roots.len(),
            required: registry.quorum_k,
        };
    }
    for (witness_id, root) in &ev.witness_roots {
        let Some(identity) = registry.get(witness_id) else {
            return Verdict::SignatureFailure {
                witness_id: witness_id.clone(),
            };
        };
        let message = attestation_message(&ev.block_ref, &ev.claim.claim_id, root, &ev.policy_id, &ev.zone_id);
        if !ev.quorum_signature.verify_share(identity, &message) {
            return Verdict::SignatureFailure {
                witness_id: witness_id.clone(),
            };
        }
    }
    Verdict::Pass
}

/// `verify_evidence` plus binding to a block log: `block_ref` must be the
/// digest of the block preceding the claim's interval, that interval's
/// block must list the claim, and the chain itself must verify.
pub fn verify_evidence_in_chain<S: AsRef<str>>(
    ev: &EvidenceObject,
    registry: &Registry,
    known_policies: &[S],
    chain: &[Block],
) -> Verdict {
    let verdict = verify_evidence(ev, registry, known_policies);
    if !verdict.is_pass() {
        return verdict;
    }
    let idx = ev.claim.interval_index;
    let prev = chain.iter().find(|b| idx > 0 && b.interval_index == idx - 1);
    let this = chain.iter().find(|b| b.interval_index == idx);
    let bound = crate::chain::verify_chain(chain)
        && chain.first().is_some_and(|b| b.zone_id == ev.zone_id)
        && prev.is_some_and(|b| b.digest == ev.block_ref)
        && this.is_some_and(|b| b.admitted_claim_ids.binary_search(&ev.claim.claim_id).is_ok());
    if bound {
        Verdict::Pass
    } else {
        Verdict::BlockBindingMismatch
    }
}

/// Witnesses that attested two different claims in the same interval.
pub fn detect_equivocation(attestations: &[Attestation]) -> BTreeSet<String> {
    let mut seen: BTreeMap<(&str, u64), Hash256> = BTreeMap::new();
    let mut out = BTreeSet::new();
    for a in attestations {
        match seen.get(&(a.witness_id.as_str(), a.interval_index)) {
            Some(c) if *c != a.claim_id => {
                out.insert(a.witness_id.clone());
            }
            Some(_) => {}
            None => {
                seen.insert((a.witness_id.as_str(), a.interval_index), a.claim_id);
            }
        }
    }
    out
}

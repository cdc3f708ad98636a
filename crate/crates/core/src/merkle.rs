//! Binary Merkle commitments with domain-separated hashing and
//! single-leaf openings.
//!
//! Leaves hash as `H(0x00 ‖ leaf)`, inner nodes as `H(0x01 ‖ left ‖ right)`.
//! A level with an odd node count pairs its last node with itself.

use serde::{Deserialize, Serialize};

use crate::encoding::{Canonical, Decoder, Encoder, Hash256};
use crate::error::{EncodingError, MerkleError};

const LEAF_PREFIX: [u8; 1] = [0x00];
const NODE_PREFIX: [u8; 1] = [0x01];

pub fn leaf_hash(leaf: &[u8]) -> Hash256 {
    Hash256::of_parts(&[&LEAF_PREFIX, leaf])
}

pub fn node_hash(left: &Hash256, right: &Hash256) -> Hash256 {
    Hash256::of_parts(&[&NODE_PREFIX, &left.0, &right.0])
}

fn next_level(level: &[Hash256]) -> Vec<Hash256> {
    level
        .chunks(2)
        .map(|pair| node_hash(&pair[0], pair.get(1).unwrap_or(&pair[0])))
        .collect()
}

pub fn merkle_root<L: AsRef<[u8]>>(leaves: &[L]) -> Result<Hash256, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyLeaves);
    }
    let mut level: Vec<Hash256> = leaves.iter().map(|l| leaf_hash(l.as_ref())).collect();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

/// Sibling path from a leaf up to the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub index: u64,
    pub leaf_count: u64,
    pub siblings: Vec<Hash256>,
}

fn depth(leaf_count: u64) -> usize {
    let mut n = leaf_count;
    let mut d = 0;
    while n > 1 {
        n = n.div_ceil(2);
        d += 1;
    }
    d
}

pub fn prove_leaf<L: AsRef<[u8]>>(leaves: &[L], index: usize) -> Result<MerkleProof, MerkleError> {
    if index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange {
            index,
            len: leaves.len(),
        });
    }
    let mut level: Vec<Hash256> = leaves.iter().map(|l| leaf_hash(l.as_ref())).collect();
    let mut idx = index;
    let mut siblings = Vec::new();
    while level.len() > 1 {
        let sib = if idx % 2 == 0 {
            *level.get(idx + 1).unwrap_or(&level[idx])
        } else {
            level[idx - 1]
        };
        siblings.push(sib);
        level = next_level(&level);
        idx /= 2;
    }
    Ok(MerkleProof {
        index: index as u64,
        leaf_count: leaves.len() as u64,
        siblings,
    })
}

pub fn verify_leaf(root: &Hash256, leaf: &[u8], proof: &MerkleProof) -> bool {
    if proof.index >= proof.leaf_count || proof.siblings.len() != depth(proof.leaf_count) {
        return false;
    }
    let mut acc = leaf_hash(leaf);
    let mut idx = proof.index;
    let mut width = proof.leaf_count;
    for sib in &proof.siblings {
        let last_unpaired = idx % 2 == 0 && idx + 1 == width;
        if last_unpaired && *sib != acc {
            return false;
        }
        acc = if idx % 2 == 0 {
            node_hash(&acc, sib)
        } else {
            node_hash(sib, &acc)
        };
        idx /= 2;
        width = width.div_ceil(2);
    }
    acc == *root
}

impl Canonical for MerkleProof {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(self.index).u64(self.leaf_count).seq(&self.siblings, |e, h| {
            e.hash(h);
        });
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(MerkleProof {
            index: dec.u64()?,
            leaf_count: dec.u64()?,
            siblings: dec.seq(|d| d.hash())?,
        })
    }
}

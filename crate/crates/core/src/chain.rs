//! Hash-chained per-interval block log.

use serde::{Deserialize, Serialize};

use crate::encoding::{Canonical, Decoder, Encoder, Hash256};
use crate::error::{ChainError, EncodingError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub interval_index: u64,
    pub prev_digest: Hash256,
    /// Strictly ascending.
    pub admitted_claim_ids: Vec<Hash256>,
    pub zone_id: String,
    pub digest: Hash256,
}

pub fn block_digest(prev_digest: &Hash256, interval_index: u64, zone_id: &str, ids: &[Hash256]) -> Hash256 {
    let mut enc = Encoder::default();
    enc.hash(prev_digest).u64(interval_index).str(zone_id).seq(ids, |e, h| {
        e.hash(h);
    });
    Hash256::of(&enc.finish())
}

impl Block {
    pub fn new(prev_digest: Hash256, interval_index: u64, zone_id: &str, mut ids: Vec<Hash256>) -> Self {
        ids.sort();
        ids.dedup();
        let digest = block_digest(&prev_digest, interval_index, zone_id, &ids);
        Block {
            interval_index,
            prev_digest,
            admitted_claim_ids: ids,
            zone_id: zone_id.to_string(),
            digest,
        }
    }

    pub fn genesis(zone_id: &str) -> Self {
        Block::new(Hash256::ZERO, 0, zone_id, Vec::new())
    }

    pub fn recompute_digest(&self) -> Hash256 {
        block_digest(&self.prev_digest, self.interval_index, &self.zone_id, &self.admitted_claim_ids)
    }
}

impl Canonical for Block {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.u64(self.interval_index)
            .hash(&self.prev_digest)
            .seq(&self.admitted_claim_ids, |e, h| {
                e.hash(h);
            })
            .str(&self.zone_id)
            .hash(&self.digest);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(Block {
            interval_index: dec.u64()?,
            prev_digest: dec.hash()?,
            admitted_claim_ids: dec.seq(|d| d.hash())?,
            zone_id: dec.string()?,
            digest: dec.hash()?,
        })
    }
}

/// Serialized form of a whole chain.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockLog(pub Vec<Block>);

impl Canonical for BlockLog {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.records(&self.0);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(BlockLog(dec.records()?))
    }
}

/// Append-only chain owned by the interval coordinator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockChain {
    blocks: Vec<Block>,
}

impl BlockChain {
    pub fn new(zone_id: &str) -> Self {
        BlockChain {
            blocks: vec![Block::genesis(zone_id)],
        }
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn append(&mut self, interval_index: u64, admitted_claim_ids: Vec<Hash256>) -> Result<&Block, ChainError> {
        let head = self.head();
        let expected = head.interval_index + 1;
        if interval_index != expected {
            return Err(ChainError::NonContiguous {
                expected,
                got: interval_index,
            });
        }
        let block = Block::new(head.digest, interval_index, &head.zone_id, admitted_claim_ids);
        self.blocks.push(block);
        Ok(self.head())
    }
}

pub fn check_chain(blocks: &[Block]) -> Result<(), ChainError> {
    let mut prev: Option<&Block> = None;
    for b in blocks {
        let (expected_index, expected_prev) = match prev {
            None => (0, Hash256::ZERO),
            Some(p) => (p.interval_index + 1, p.digest),
        };
        if b.interval_index != expected_index {
            return Err(ChainError::NonContiguous {
                expected: expected_index,
                got: b.interval_index,
            });
        }
        let sorted = b.admitted_claim_ids.windows(2).all(|w| w[0] < w[1]);
        let same_zone = prev.is_none_or(|p| p.zone_id == b.zone_id);
        if b.prev_digest != expected_prev || !sorted || !same_zone || b.digest != b.recompute_digest() {
            return Err(ChainError::DigestMismatch(b.interval_index));
        }
        prev = Some(b);
    }
    Ok(())
}

/// Recomputes every digest and checks linkage and index contiguity from genesis.
pub fn verify_chain(blocks: &[Block]) -> bool {
    check_chain(blocks).is_ok()
}

//! One simulated run: claims every claim period, a quorum tally per claim,
//! and a block sealed at the end of each interval.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{verify_chain, Block, BlockChain, BlockLog};
use crate::encoding::{Canonical, Decoder, Encoder, Hash256};
use crate::error::EncodingError;
use crate::evidence::{Claim, Registry, WitnessKey};
use crate::sim::events::{seconds_to_micros, EventKind, EventQueue};
use crate::sim::scenario::ScenarioConfig;
use crate::witness::{build_witnesses, derive_witness_keys, tally_claim, ClaimTally, IntervalOutcome, StepContext};

#[derive(Debug, Clone)]
pub struct RunResult {
    /// One per claim, in claim order.
    pub outcomes: Vec<IntervalOutcome>,
    pub admitted_count: usize,
    /// Genesis first.
    pub chain: Vec<Block>,
}

impl Canonical for RunResult {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.records(&self.outcomes)
            .u64(self.admitted_count as u64)
            .record(&BlockLog(self.chain.clone()));
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(RunResult {
            outcomes: dec.records()?,
            admitted_count: dec.u64()? as usize,
            chain: dec.record::<BlockLog>()?.0,
        })
    }
}

impl RunResult {
    /// Writes the per-witness run log as JSON lines.
    pub fn write_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for rec in self.outcomes.iter().flat_map(|o| &o.log) {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Interval containing time `t_us`: `floor(t / T) + 1`.
pub fn interval_of(t_us: u64, interval_us: u64) -> u64 {
    t_us / interval_us + 1
}

fn claim_for(cfg: &ScenarioConfig, index: usize, interval: u64) -> Claim {
    let payload = format!("{}/claim/{index}", cfg.name).into_bytes();
    Claim::new(interval, &cfg.zone.zone_id, cfg.prover_claimed_pos, Vec::new(), payload)
}

/// Runs a scenario with witness keys derived from `config.seed`.
pub fn run_scenario(config: &ScenarioConfig) -> RunResult {
    let keys = derive_witness_keys(config.seed, &config.zone);
    run_with_keys(config, &keys)
}

/// Runs a scenario with the given witness keys; all randomness of the run
/// comes from `config.seed`.
pub fn run_with_keys(config: &ScenarioConfig, keys: &[WitnessKey]) -> RunResult {
    let zone = &config.zone;
    let claims = zone.claim_count().expect("validated scenario");
    let period_us = seconds_to_micros(zone.claim_period_seconds);
    let interval_us = seconds_to_micros(zone.interval_seconds);
    let nodes = build_witnesses(zone, keys, &config.witness_behaviors);
    let registry = Registry::new(zone, keys);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut queue = EventQueue::new();
    let last_claim_us = (claims as u64 - 1) * period_us;
    let last_interval = interval_of(last_claim_us, interval_us);
    for index in 0..claims {
        queue.schedule(index as u64 * period_us, EventKind::Claim { index });
    }
    for interval in 1..=last_interval {
        queue.schedule(interval * interval_us, EventKind::IntervalClose { interval });
    }

    let mut chain = BlockChain::new(&zone.zone_id);
    let mut pending: BTreeMap<u64, Vec<(usize, ClaimTally)>> = BTreeMap::new();
    let mut outcomes: Vec<Option<IntervalOutcome>> = vec![None; claims];

    while let Some(event) = queue.pop() {
        match event.kind {
            EventKind::Claim { index } => {
                let interval = interval_of(event.time_us, interval_us);
                let claim = claim_for(config, index, interval);
                let ctx = StepContext {
                    zone,
                    policy: &config.policy,
                    claim: &claim,
                    prover_true: config.prover_true_pos,
                    prover_delay_m: config.prover_delay_m,
                    scene: &config.scene,
                    sensors: &config.sensors,
                    block_ref: chain.head().digest,
                };
                let tally = tally_claim(&nodes, &registry, &ctx, &mut rng);
                pending.entry(interval).or_default().push((index, tally));
            }
            EventKind::IntervalClose { interval } => {
                let tallies = pending.remove(&interval).unwrap_or_default();
                let ids: Vec<Hash256> = tallies
                    .iter()
                    .filter(|(_, t)| t.evidence.is_some())
                    .map(|(_, t)| t.claim.claim_id)
                    .collect();
                let block = chain.append(interval, ids).expect("intervals close in order").clone();
                for (index, tally) in tallies {
                    outcomes[index] = Some(IntervalOutcome::from_tally(tally, block.clone()));
                }
            }
        }
    }

    let outcomes: Vec<IntervalOutcome> = outcomes.into_iter().map(|o| o.expect("every claim sealed")).collect();
    let admitted_count = outcomes.iter().filter(|o| o.admitted).count();
    let chain = chain.into_blocks();
    debug_assert!(verify_chain(&chain));
    RunResult {
        outcomes,
        admitted_count,
        chain,
    }
}

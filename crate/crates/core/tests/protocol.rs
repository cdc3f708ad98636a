//! End-to-end protocol behavior through the simulator.

use wzone::chain::verify_chain;
use wzone::evidence::{detect_equivocation, verify_evidence_in_chain, Registry};
use wzone::geometry::{noise_free_effective_zone, Vector3};
use wzone::sim::run::run_with_keys;
use wzone::sim::{build_scenario, run_scenario, ScenarioConfig};
use wzone::witness::{derive_witness_keys, WitnessBehavior};

fn noise_free(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.zone.channel.mp_sigma = 0.0;
    cfg.zone.channel.dist_err_frac = 0.0;
    cfg.zone.channel.shadow_sigma = 0.0;
    cfg
}

fn with_behaviors(mut cfg: ScenarioConfig, list: &[(usize, WitnessBehavior)]) -> ScenarioConfig {
    cfg.witness_behaviors = vec![WitnessBehavior::Honest; cfg.zone.witness_count];
    for &(i, b) in list {
        cfg.witness_behaviors[i] = b;
    }
    cfg
}

#[test]
fn noise_free_fault_boundary() {
    // Without ranging noise the far witnesses never vouch for (13,13), so
    // admission depends only on how many colluders join the near witness.
    for seed in 0..20 {
        let mut base = noise_free(build_scenario("distance_fraud").unwrap());
        base.seed = seed;
        assert_eq!(run_scenario(&base).admitted_count, 0);
        let one = with_behaviors(base.clone(), &[(3, WitnessBehavior::Colluder)]);
        assert_eq!(run_scenario(&one).admitted_count, 0, "seed {seed}");
        let two = with_behaviors(base.clone(), &[(3, WitnessBehavior::Colluder), (1, WitnessBehavior::Colluder)]);
        assert_eq!(run_scenario(&two).admitted_count, 30, "seed {seed}");
    }
}

#[test]
fn noise_free_runs_follow_effective_zone() {
    for (x, y) in [(5.0, 5.0), (13.0, 13.0), (9.28, 0.0), (0.0, 0.0), (-6.0, 8.0)] {
        let mut cfg = noise_free(build_scenario("baseline_4w").unwrap());
        cfg.prover_true_pos = Vector3::planar(x, y);
        cfg.prover_claimed_pos = cfg.prover_true_pos;
        let inside = noise_free_effective_zone(cfg.prover_true_pos, &cfg.zone.witness_positions, cfg.zone.d_max, 3);
        let admitted = run_scenario(&cfg).admitted_count;
        assert_eq!(admitted, if inside { 30 } else { 0 }, "({x},{y})");
    }
}

#[test]
fn offline_witness_is_tolerated_at_center() {
    let mut cfg = build_scenario("baseline_4w").unwrap();
    cfg.prover_true_pos = Vector3::ORIGIN;
    cfg.prover_claimed_pos = Vector3::ORIGIN;
    let cfg = with_behaviors(cfg, &[(0, WitnessBehavior::Offline)]);
    assert_eq!(run_scenario(&cfg).admitted_count, 30);
    let cfg = with_behaviors(cfg, &[(0, WitnessBehavior::Offline), (1, WitnessBehavior::Offline)]);
    assert_eq!(run_scenario(&cfg).admitted_count, 0);
}

#[test]
fn equivocator_counts_once_and_is_detected() {
    let mut cfg = build_scenario("distance_fraud").unwrap();
    cfg = noise_free(cfg);
    cfg = with_behaviors(cfg, &[(3, WitnessBehavior::Equivocator)]);
    let run = run_scenario(&cfg);
    // near witness + one equivocator is still below quorum
    assert_eq!(run.admitted_count, 0);
    for o in &run.outcomes {
        let flagged = detect_equivocation(&o.attestations);
        assert!(flagged.contains("W4"));
        assert_eq!(flagged.len(), 1);
    }
}

#[test]
fn every_evidence_object_verifies_against_its_chain() {
    for name in ["baseline_4w", "baseline_6w", "visual_valid", "edge_position"] {
        let mut cfg = build_scenario(name).unwrap();
        cfg.seed = 21;
        let keys = derive_witness_keys(cfg.seed, &cfg.zone);
        let registry = Registry::new(&cfg.zone, &keys);
        let run = run_with_keys(&cfg, &keys);
        assert!(verify_chain(&run.chain));
        for o in &run.outcomes {
            match &o.evidence {
                Some(ev) => {
                    let v = verify_evidence_in_chain(ev, &registry, &[cfg.policy.policy_id.as_str()], &run.chain);
                    assert!(v.is_pass(), "{name}: {v}");
                }
                None => assert!(!run.chain[o.interval_index as usize].admitted_claim_ids.contains(&o.claim_id)),
            }
        }
    }
}

#[test]
fn baseline_runs_admit_everything_almost_always() {
    // P(30/30) ≈ 0.996 per run
    let full = (0..50u64)
        .filter(|&seed| {
            let mut cfg = build_scenario("baseline_4w").unwrap();
            cfg.seed = seed;
            run_scenario(&cfg).admitted_count == 30
        })
        .count();
    assert!(full >= 48, "{full}");
}

#[test]
fn visual_invalid_never_admits() {
    for seed in 0..10 {
        let mut cfg = build_scenario("visual_invalid").unwrap();
        cfg.seed = seed;
        assert_eq!(run_scenario(&cfg).admitted_count, 0);
    }
}

#[test]
fn prover_delay_only_hurts_the_prover() {
    let mut cfg = build_scenario("baseline_4w").unwrap();
    cfg.prover_delay_m = 30.0;
    assert_eq!(run_scenario(&cfg).admitted_count, 0);
}

//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single `[PASS]` or `[FAIL]` line, written directly to the
//! process stderr so it shows even when output capture is on.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wzone::chain::{verify_chain, BlockLog};
use wzone::encoding::{read_framed, write_framed, Hash256};
use wzone::evidence::{
    assemble_evidence, sign_attestation, verify_evidence_in_chain, Attestation, AttestationFields, Claim,
    EvidenceObject, Registry, CHAIN_MAGIC, EVIDENCE_MAGIC,
};
use wzone::geometry::{Vector3, ZoneConfig};
use wzone::merkle::{merkle_root, prove_leaf, verify_leaf};
use wzone::sim::calibrate::{edge_admission, EDGE_POINT};
use wzone::sim::heatmap::{admission_probability, cell_rng, heatmap, simulate_admission};
use wzone::sim::{build_scenario, monte_carlo, run_scenario, GridSpec, HeatmapMode, Summary};
use wzone::witness::{derive_witness_keys, witness_admits, StepContext, WitnessBehavior};

fn report(name: &str, pass: bool, detail: &str) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass
}

fn check(name: &str, pass: bool, detail: String) {
    assert!(report(name, pass, &detail), "{name}: {detail}");
}

fn table_row(name: &str) -> Summary {
    let mut cfg = build_scenario(name).unwrap();
    cfg.seed = 42;
    monte_carlo(&cfg, 1000, 1)
}

fn describe(s: &Summary) -> String {
    format!(
        "success {:.4} ± {:.4}, precision {:?}, recall {:?}, admitted {:.3}/{}",
        s.success_rate_mean, s.success_rate_std, s.precision, s.recall, s.admitted_mean, s.claims_per_run
    )
}

fn baseline_ok(s: &Summary) -> bool {
    s.success_rate_mean >= 0.995 && s.precision == Some(1.0) && s.admitted_mean >= 29.85
}

#[test]
fn table_baseline_4w() {
    let s = table_row("baseline_4w");
    check("results table baseline (4W)", baseline_ok(&s), describe(&s));
}

#[test]
fn table_baseline_6w() {
    let s = table_row("baseline_6w");
    check("results table baseline (6W)", baseline_ok(&s), describe(&s));
}

#[test]
fn table_distance_fraud() {
    let s = table_row("distance_fraud");
    let pass = s.success_rate_mean <= 0.01 && s.admitted_mean <= 0.3 && s.precision.is_none() && s.recall.is_none();
    check("results table distance fraud", pass, describe(&s));
}

#[test]
fn table_edge_position() {
    let s = table_row("edge_position");
    let pass = (0.26..=0.46).contains(&s.success_rate_mean) && s.precision == Some(1.0);
    check("results table edge position", pass, describe(&s));
}

#[test]
fn table_visual_valid() {
    let s = table_row("visual_valid");
    check("results table visual (valid)", (0.95..=0.995).contains(&s.success_rate_mean), describe(&s));
}

#[test]
fn table_visual_invalid() {
    let s = table_row("visual_invalid");
    check("results table visual (invalid)", s.success_rate_mean == 0.0, describe(&s));
}

#[test]
fn calibration_oracles() {
    let cfg = build_scenario("edge_position").unwrap();
    let closed = edge_admission(&cfg.zone);
    let keys = derive_witness_keys(0, &cfg.zone);
    let claim = Claim::new(1, "Z-17", EDGE_POINT, vec![], b"edge".to_vec());
    let ctx = StepContext {
        zone: &cfg.zone,
        policy: &cfg.policy,
        claim: &claim,
        prover_true: EDGE_POINT,
        prover_delay_m: 0.0,
        scene: &cfg.scene,
        sensors: &cfg.sensors,
        block_ref: Hash256::ZERO,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let admitted = (0..n)
        .filter(|_| {
            keys.iter()
                .zip(&cfg.zone.witness_positions)
                .filter(|(k, pos)| witness_admits(&k.witness_id, **pos, &ctx, &mut rng))
                .count()
                >= cfg.zone.quorum_k
        })
        .count();
    let mc = admitted as f64 / n as f64;
    let se = (closed * (1.0 - closed) / n as f64).sqrt();
    let pass = (closed - 0.34).abs() <= 0.01 && (mc - closed).abs() <= 3.0 * se;
    check(
        "calibration oracles",
        pass,
        format!("closed form {closed:.5}, monte carlo {mc:.5} over {n}, |Δ| {:.5} vs 3 SE {:.5}", (mc - closed).abs(), 3.0 * se),
    );
}

struct Signed {
    zone: ZoneConfig,
    registry: Registry,
    claim: Claim,
    matching: Vec<Attestation>,
    other: Vec<Attestation>,
}

fn signed_pool() -> Signed {
    let zone = ZoneConfig::with_witnesses(6).unwrap();
    let keys = derive_witness_keys(5, &zone);
    let registry = Registry::new(&zone, &keys);
    let claim = Claim::new(4, "Z-17", Vector3::planar(5.0, 5.0), vec![], b"q".to_vec());
    let later = Claim::new(5, "Z-17", Vector3::planar(5.0, 5.0), vec![], b"q".to_vec());
    let sign = |k: &wzone::evidence::WitnessKey, c: &Claim, zone_id: &str, policy: &str| {
        sign_attestation(
            k,
            AttestationFields {
                interval_index: c.interval_index,
                block_ref: Hash256::of(b"prev"),
                claim_id: c.claim_id,
                merkle_root: Hash256::of(k.witness_id.as_bytes()),
                policy_id: policy.into(),
                zone_id: zone_id.into(),
            },
        )
    };
    let matching = keys.iter().map(|k| sign(k, &claim, "Z-17", "supply_chain_v1")).collect();
    let mut other = Vec::new();
    for k in &keys {
        other.push(sign(k, &later, "Z-17", "supply_chain_v1"));
        other.push(sign(k, &claim, "Z-99", "supply_chain_v1"));
        let mut relabeled = sign(k, &claim, "Z-17", "supply_chain_v1");
        relabeled.interval_index = 5;
        other.push(relabeled);
    }
    Signed {
        zone,
        registry,
        claim,
        matching,
        other,
    }
}

#[test]
fn quorum_soundness() {
    let pool = signed_pool();
    let k = pool.zone.quorum_k;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let distinct = rng.random_range(0..k);
        let mut idx: Vec<usize> = (0..pool.matching.len()).collect();
        for i in 0..distinct {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        let mut multiset = Vec::new();
        for &i in &idx[..distinct] {
            for _ in 0..rng.random_range(1..=4) {
                multiset.push(pool.matching[i].clone());
            }
        }
        for _ in 0..rng.random_range(0..12) {
            multiset.push(pool.other[rng.random_range(0..pool.other.len())].clone());
        }
        for i in (1..multiset.len()).rev() {
            multiset.swap(i, rng.random_range(0..=i));
        }
        if assemble_evidence(&multiset, &pool.zone, &pool.claim).is_ok() {
            violations += 1;
        }
    }
    // control: k distinct matching attestations do form evidence
    let control = assemble_evidence(&pool.matching[..k], &pool.zone, &pool.claim);
    let verdict_ok = control
        .as_ref()
        .map(|ev| wzone::evidence::verify_evidence(ev, &pool.registry, &["supply_chain_v1"]).is_pass())
        .unwrap_or(false);
    check(
        "quorum soundness",
        violations == 0 && verdict_ok,
        format!("{violations} of {trials} sub-quorum multisets produced evidence; k-quorum control verifies: {verdict_ok}"),
    );
}

#[test]
fn interval_binding() {
    let mut cfg = build_scenario("baseline_4w").unwrap();
    cfg.seed = 3;
    let run = run_scenario(&cfg);
    let mut replays = 0;
    let mut accepted = 0;
    for pair in run.outcomes.windows(2) {
        let (Some(_), Some(next_ev)) = (&pair[0].evidence, &pair[1].evidence) else {
            continue;
        };
        let next_claim = &next_ev.claim;
        // attestations from interval i replayed alone, and mixed with a
        // sub-quorum of interval i+1
        let mut relabeled = pair[0].attestations.clone();
        for a in &mut relabeled {
            a.interval_index = next_claim.interval_index;
        }
        let mut mixed = pair[0].attestations.clone();
        mixed.extend(pair[1].attestations.iter().take(cfg.zone.quorum_k - 1).cloned());
        for set in [&pair[0].attestations, &relabeled, &mixed] {
            replays += 1;
            if assemble_evidence(set, &cfg.zone, next_claim).is_ok() {
                accepted += 1;
            }
        }
    }
    check(
        "interval binding",
        replays > 0 && accepted == 0,
        format!("{accepted} of {replays} replayed attestation sets counted in the following interval"),
    );
}

fn fraud_runs(colluders: &[usize]) -> Vec<usize> {
    (0..100u64)
        .map(|seed| {
            let mut cfg = build_scenario("distance_fraud").unwrap();
            cfg.seed = seed;
            cfg.witness_behaviors = vec![WitnessBehavior::Honest; cfg.zone.witness_count];
            for &c in colluders {
                cfg.witness_behaviors[c] = WitnessBehavior::Colluder;
            }
            run_scenario(&cfg).admitted_count
        })
        .collect()
}

#[test]
fn fault_boundary() {
    // colluders sit at the witnesses farthest from the attacker at (13,13):
    // W4 (-10,-10), then W2 (10,-10)
    let one = fraud_runs(&[3]);
    let two = fraud_runs(&[3, 1]);
    let one_rejected = one.iter().filter(|&&a| a == 0).count();
    let two_admitted = two.iter().filter(|&&a| a > 0).count();
    let one_claims: usize = one.iter().sum();
    check(
        "fault boundary",
        one_rejected == 100 && two_admitted >= 99,
        format!(
            "1 colluder: {one_rejected}/100 runs with no admitted claim ({one_claims} of 3000 claims admitted); 2 colluders: {two_admitted}/100 runs admitted"
        ),
    );
}

fn flip(bytes: &[u8], bit: usize) -> Vec<u8> {
    let mut out = bytes.to_vec();
    out[bit / 8] ^= 1 << (bit % 8);
    out
}

#[test]
fn tamper_matrix() {
    let cfg = build_scenario("baseline_4w").unwrap();
    let run = run_scenario(&cfg);
    let registry = Registry::new(&cfg.zone, &derive_witness_keys(cfg.seed, &cfg.zone));
    let known = ["supply_chain_v1"];
    let ev = run.outcomes.iter().find_map(|o| o.evidence.clone()).unwrap();
    let ev_bytes = write_framed(EVIDENCE_MAGIC, &ev);
    let chain_bytes = write_framed(CHAIN_MAGIC, &BlockLog(run.chain.clone()));
    let baseline_ok = verify_evidence_in_chain(&ev, &registry, &known, &run.chain).is_pass();

    let mut ev_undetected = 0;
    for bit in 0..ev_bytes.len() * 8 {
        if let Ok(t) = read_framed::<EvidenceObject>(EVIDENCE_MAGIC, &flip(&ev_bytes, bit)) {
            if verify_evidence_in_chain(&t, &registry, &known, &run.chain).is_pass() {
                ev_undetected += 1;
            }
        }
    }
    let mut chain_undetected = 0;
    for bit in 0..chain_bytes.len() * 8 {
        if let Ok(t) = read_framed::<BlockLog>(CHAIN_MAGIC, &flip(&chain_bytes, bit)) {
            if verify_chain(&t.0) && verify_evidence_in_chain(&ev, &registry, &known, &t.0).is_pass() {
                chain_undetected += 1;
            }
        }
    }
    check(
        "tamper matrix",
        baseline_ok && ev_undetected == 0 && chain_undetected == 0,
        format!(
            "untampered verifies: {baseline_ok}; undetected flips: evidence {ev_undetected}/{} bits, chain {chain_undetected}/{} bits",
            ev_bytes.len() * 8,
            chain_bytes.len() * 8
        ),
    );
}

#[test]
fn merkle_selective_opening() {
    let mut openings = 0;
    let mut failures = Vec::new();
    for n in 1..=8usize {
        let leaves: Vec<Vec<u8>> = (0..n).map(|i| format!("input-{i}").into_bytes()).collect();
        let root = merkle_root(&leaves).unwrap();
        for i in 0..n {
            let proof = prove_leaf(&leaves, i).unwrap();
            openings += 1;
            if !verify_leaf(&root, &leaves[i], &proof) {
                failures.push(format!("n={n} i={i} valid opening rejected"));
            }
            for bit in 0..leaves[i].len() * 8 {
                if verify_leaf(&root, &flip(&leaves[i], bit), &proof) {
                    failures.push(format!("n={n} i={i} altered leaf bit {bit}"));
                }
            }
            for s in 0..proof.siblings.len() {
                for bit in 0..256 {
                    let mut p = proof.clone();
                    p.siblings[s].0[bit / 8] ^= 1 << (bit % 8);
                    if verify_leaf(&root, &leaves[i], &p) {
                        failures.push(format!("n={n} i={i} altered sibling {s} bit {bit}"));
                    }
                }
            }
            for j in (0..n).filter(|&j| j != i) {
                if verify_leaf(&root, &leaves[j], &proof) {
                    failures.push(format!("n={n} leaf {j} opened at index {i}"));
                }
            }
        }
    }
    check(
        "merkle selective opening",
        failures.is_empty(),
        format!("{openings} openings over trees of 1..=8 leaves; {} failures {:?}", failures.len(), failures.first()),
    );
}

#[test]
fn cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_wzone");
    let run = |jobs: &str| {
        Command::new(bin)
            .args(["run", "--scenario", "edge_position", "--iterations", "100", "--seed", "7", "--jobs", jobs])
            .output()
            .expect("run wzone")
    };
    let a = run("1");
    let b = run("8");
    let ok = a.status.success() && b.status.success();
    let json_ok = serde_json::from_slice::<Summary>(&a.stdout).is_ok();
    check(
        "cli determinism",
        ok && json_ok && a.stdout == b.stdout,
        format!(
            "exit {:?}/{:?}, valid json: {json_ok}, {} vs {} bytes, identical: {}",
            a.status.code(),
            b.status.code(),
            a.stdout.len(),
            b.stdout.len(),
            a.stdout == b.stdout
        ),
    );
}

#[test]
fn heatmap_consistency() {
    let zone = ZoneConfig::with_witnesses(4).unwrap();
    let probes = [
        (0.0, 0.0),
        (5.0, 5.0),
        (9.28, 0.0),
        (0.0, -9.28),
        (9.8, 0.0),
        (10.5, 3.0),
        (-8.0, 8.0),
        (13.0, 13.0),
        (15.0, 0.0),
    ];
    let mut max_delta: f64 = 0.0;
    for (i, &(x, y)) in probes.iter().enumerate() {
        let pt = Vector3::planar(x, y);
        let exact = admission_probability(&zone, pt);
        let mc = simulate_admission(&zone, pt, 10_000, &mut cell_rng(1, i));
        max_delta = max_delta.max((mc - exact).abs());
    }
    let overlay_at = |x: f64, y: f64| {
        let grid = GridSpec { x_min: x, x_max: x, y_min: y, y_max: y, step: 1.0 };
        heatmap(&zone, &grid, HeatmapMode::Analytic, 0, 0).unwrap()[0].overlay
    };
    let overlay: BTreeMap<&str, u8> = [
        ("(5,5)", overlay_at(5.0, 5.0)),
        ("(9.28,0)", overlay_at(9.28, 0.0)),
        ("(13,13)", overlay_at(13.0, 13.0)),
    ]
    .into_iter()
    .collect();
    let overlay_ok = overlay["(5,5)"] == 1 && overlay["(9.28,0)"] == 0 && overlay["(13,13)"] == 0;
    check(
        "heatmap consistency",
        max_delta < 0.02 && overlay_ok,
        format!("max |analytic - monte carlo| {max_delta:.4} over 9 probes at 10^4 samples; overlay {overlay:?}"),
    );
}

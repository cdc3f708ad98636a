//! Built-in scenarios and the scenario file format.
//!
//! A scenario file uses the same indentation syntax as policy files. Every
//! key is optional except `scenario`; omitted values take the defaults of
//! the 4-witness zone.
//!
//! ```text
//! scenario: custom
//! seed: 7
//! zone:
//!     witness_count: 4
//!     quorum_k: 3
//!     channel:
//!         mp_sigma: 1.25
//! prover:
//!     true_position: 5, 5
//!     claimed_position: 5, 5
//!     honest: true
//! policy: supply_chain_v1
//! scene:
//!     objects: red car, tree
//! behaviors:
//!     W4: colluder
//! ```

use std::path::Path;

use crate::doc::{self, format_number, number_with_unit, Section};
use crate::error::{ConfigError, PolicyError, ScenarioError};
use crate::geometry::{witness_layout, Vector3, ZoneConfig};
use crate::policy::{builtin_policy, policy_from_section, Policy};
use crate::sensing::{Scene, SensorParams};
use crate::witness::WitnessBehavior;

pub const SCENARIO_NAMES: [&str; 6] = [
    "baseline_4w",
    "baseline_6w",
    "distance_fraud",
    "edge_position",
    "visual_valid",
    "visual_invalid",
];

/// Row labels used in the results table, by scenario name.
pub fn display_name(name: &str) -> &str {
    match name {
        "baseline_4w" => "Baseline (4W)",
        "baseline_6w" => "Baseline (6W)",
        "distance_fraud" => "Distance Fraud",
        "edge_position" => "Edge Position",
        "visual_valid" => "Visual (Valid)",
        "visual_invalid" => "Visual (Invalid)",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub zone: ZoneConfig,
    pub prover_true_pos: Vector3,
    pub prover_claimed_pos: Vector3,
    pub prover_honesty: bool,
    /// Processing delay the prover adds to every ranging exchange, meters.
    pub prover_delay_m: f64,
    pub policy: Policy,
    pub scene: Scene,
    pub sensors: SensorParams,
    /// Per witness in layout order; missing entries are honest.
    pub witness_behaviors: Vec<WitnessBehavior>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.zone.validate()?;
        let p = &self.policy;
        if p.quorum_k != self.zone.quorum_k || p.quorum_n != self.zone.witness_count {
            return Err(ConfigError::invalid(
                "policy.quorum",
                format!(
                    "policy quorum {}-of-{} does not match zone {}-of-{}",
                    p.quorum_k, p.quorum_n, self.zone.quorum_k, self.zone.witness_count
                ),
            )
            .into());
        }
        if p.zone_id != self.zone.zone_id {
            return Err(ConfigError::invalid("policy.zone_id", format!("`{}` is not `{}`", p.zone_id, self.zone.zone_id)).into());
        }
        if p.interval_seconds != self.zone.interval_seconds {
            return Err(ConfigError::invalid("policy.interval", "differs from zone interval").into());
        }
        if self.witness_behaviors.len() > self.zone.witness_count {
            return Err(ConfigError::invalid("behaviors", "more behaviors than witnesses").into());
        }
        if !self.prover_true_pos.is_finite() || !self.prover_claimed_pos.is_finite() {
            return Err(ConfigError::invalid("prover", "non-finite position").into());
        }
        if !(self.prover_delay_m >= 0.0 && self.prover_delay_m.is_finite()) {
            return Err(ConfigError::invalid("prover.delay", "must be >= 0").into());
        }
        if !(0.0..=1.0).contains(&self.sensors.p_det) {
            return Err(ConfigError::invalid("sensors.p_det", "must lie in [0, 1]").into());
        }
        Ok(())
    }

    /// Ground truth for every claim of the run: honest and inside the zone disc.
    pub fn claims_are_legitimate(&self) -> bool {
        self.prover_honesty && self.zone.contains(self.prover_true_pos)
    }
}

fn policy_for(id: &str, witness_count: usize) -> Policy {
    let mut p = builtin_policy(id).expect("built-in policy");
    p.quorum_n = witness_count;
    p
}

pub fn build_scenario(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let witnesses = if name == "baseline_6w" { 6 } else { 4 };
    let zone = ZoneConfig::with_witnesses(witnesses)?;
    let inside = Vector3::planar(5.0, 5.0);
    let (truth, claimed, honest, policy, scene) = match name {
        "baseline_4w" | "baseline_6w" => (inside, inside, true, "supply_chain_v1", Scene::default()),
        "distance_fraud" => (Vector3::planar(13.0, 13.0), inside, false, "supply_chain_v1", Scene::default()),
        "edge_position" => {
            let p = Vector3::planar(9.28, 0.0);
            (p, p, true, "supply_chain_v1", Scene::default())
        }
        "visual_valid" => (inside, inside, true, "visual_v1", Scene::with_objects(["red car"])),
        "visual_invalid" => (inside, inside, true, "visual_v1", Scene::default()),
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    let config = ScenarioConfig {
        name: name.to_string(),
        policy: policy_for(policy, zone.witness_count),
        zone,
        prover_true_pos: truth,
        prover_claimed_pos: claimed,
        prover_honesty: honest,
        prover_delay_m: 0.0,
        scene,
        sensors: SensorParams::default(),
        witness_behaviors: Vec::new(),
        seed: 0,
    };
    config.validate()?;
    Ok(config)
}

fn invalid(key: &str, value: &str) -> PolicyError {
    PolicyError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn number(s: &Section, key: &str, unit: &str, path: &str) -> Result<Option<f64>, PolicyError> {
    s.scalar(key)?
        .map(|raw| number_with_unit(raw, unit).ok_or_else(|| invalid(&doc::join(path, key), raw)))
        .transpose()
}

fn integer<T: std::str::FromStr>(s: &Section, key: &str, path: &str) -> Result<Option<T>, PolicyError> {
    s.scalar(key)?
        .map(|raw| raw.trim().parse::<T>().map_err(|_| invalid(&doc::join(path, key), raw)))
        .transpose()
}

fn parse_vector(raw: &str, key: &str) -> Result<Vector3, PolicyError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| number_with_unit(p, "m"))
        .collect::<Option<_>>()
        .ok_or_else(|| invalid(key, raw))?;
    match parts[..] {
        [x, y] => Ok(Vector3::planar(x, y)),
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(invalid(key, raw)),
    }
}

fn render_vector(v: Vector3) -> String {
    if v.z == 0.0 {
        format!("{}, {}", v.x, v.y)
    } else {
        format!("{}, {}, {}", v.x, v.y, v.z)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_zone(s: &Section) -> Result<ZoneConfig, ScenarioError> {
    s.deny_unknown(
        &[
            "zone_id",
            "radius",
            "witness_count",
            "quorum_k",
            "interval",
            "claim_period",
            "run",
            "d_max",
            "d_acc",
            "witnesses",
            "channel",
        ],
        "zone",
    )?;
    let count = integer::<usize>(s, "witness_count", "zone")?.unwrap_or(4);
    let mut zone = match s.section("witnesses")? {
        // explicit positions permit layouts other than the built-in ones
        Some(w) => {
            let mut positions = Vec::new();
            for (i, e) in w.entries.iter().enumerate() {
                let expect = format!("W{}", i + 1);
                if e.key != expect {
                    return Err(PolicyError::UnknownKey(doc::join("zone.witnesses", &e.key)).into());
                }
                let raw = w.scalar(&e.key)?.unwrap_or_default();
                positions.push(parse_vector(raw, &doc::join("zone.witnesses", &e.key))?);
            }
            let layout_count = positions.len();
            let mut z = ZoneConfig::with_witnesses(4)?;
            z.witness_positions = positions;
            z.witness_count = layout_count;
            if s.get("witness_count").is_some() && count != layout_count {
                return Err(ConfigError::invalid("zone.witness_count", "does not match zone.witnesses").into());
            }
            z
        }
        None => {
            let mut z = ZoneConfig::with_witnesses(4)?;
            z.witness_count = count;
            z.witness_positions = witness_layout(count)?;
            z
        }
    };
    if let Some(id) = s.scalar("zone_id")? {
        zone.zone_id = id.to_string();
    }
    set(&mut zone.radius, number(s, "radius", "m", "zone")?);
    set(&mut zone.quorum_k, integer(s, "quorum_k", "zone")?);
    set(&mut zone.interval_seconds, number(s, "interval", "s", "zone")?);
    set(&mut zone.claim_period_seconds, number(s, "claim_period", "s", "zone")?);
    set(&mut zone.run_seconds, number(s, "run", "s", "zone")?);
    set(&mut zone.d_max, number(s, "d_max", "m", "zone")?);
    set(&mut zone.d_acc, number(s, "d_acc", "m", "zone")?);
    if let Some(c) = s.section("channel")? {
        let path = "zone.channel";
        c.deny_unknown(&["pl0", "d0", "gamma", "shadow_sigma", "rounds", "mp_sigma", "dist_err_frac"], path)?;
        let ch = &mut zone.channel;
        set(&mut ch.pl0, number(c, "pl0", "dB", path)?);
        set(&mut ch.d0, number(c, "d0", "m", path)?);
        set(&mut ch.gamma, number(c, "gamma", "", path)?);
        set(&mut ch.shadow_sigma, number(c, "shadow_sigma", "dB", path)?);
        set(&mut ch.rounds, integer(c, "rounds", path)?);
        set(&mut ch.mp_sigma, number(c, "mp_sigma", "m", path)?);
        set(&mut ch.dist_err_frac, number(c, "dist_err_frac", "", path)?);
    }
    Ok(zone)
}

fn parse_bool(raw: &str, key: &str) -> Result<bool, PolicyError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, raw)),
    }
}

/// Parses scenario text. A built-in scenario name under `base` supplies
/// defaults that the remaining keys override.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let root = doc::parse(text)?;
    root.deny_unknown(&["scenario", "base", "seed", "zone", "prover", "policy", "scene", "sensors", "behaviors"], "")?;
    let name = root
        .scalar("scenario")?
        .ok_or_else(|| PolicyError::MissingField("scenario".into()))?
        .to_string();
    let mut cfg = match root.scalar("base")? {
        Some(base) => build_scenario(base)?,
        None => build_scenario("baseline_4w")?,
    };
    cfg.name = name;
    set(&mut cfg.seed, integer(&root, "seed", "")?);
    if let Some(z) = root.section("zone")? {
        cfg.zone = parse_zone(z)?;
        // keep the default policy consistent with a resized zone
        cfg.policy.quorum_k = cfg.zone.quorum_k;
        cfg.policy.quorum_n = cfg.zone.witness_count;
        cfg.policy.zone_id = cfg.zone.zone_id.clone();
        cfg.policy.interval_seconds = cfg.zone.interval_seconds;
    }
    if let Some(p) = root.section("prover")? {
        p.deny_unknown(&["true_position", "claimed_position", "honest", "delay"], "prover")?;
        if let Some(raw) = p.scalar("true_position")? {
            cfg.prover_true_pos = parse_vector(raw, "prover.true_position")?;
            cfg.prover_claimed_pos = cfg.prover_true_pos;
        }
        if let Some(raw) = p.scalar("claimed_position")? {
            cfg.prover_claimed_pos = parse_vector(raw, "prover.claimed_position")?;
        }
        if let Some(raw) = p.scalar("honest")? {
            cfg.prover_honesty = parse_bool(raw, "prover.honest")?;
        }
        set(&mut cfg.prover_delay_m, number(p, "delay", "m", "prover")?);
    }
    match root.get("policy").map(|e| &e.value) {
        None => {}
        Some(doc::Value::Scalar(id)) => {
            cfg.policy = builtin_policy(id).ok_or_else(|| invalid("policy", id))?;
        }
        Some(doc::Value::Section(s)) => cfg.policy = policy_from_section(s)?,
    }
    if let Some(s) = root.section("scene")? {
        s.deny_unknown(&["objects"], "scene")?;
        let objects = s.scalar("objects")?.unwrap_or_default();
        cfg.scene = Scene::with_objects(objects.split(',').map(str::trim).filter(|o| !o.is_empty()));
    }
    if let Some(s) = root.section("sensors")? {
        s.deny_unknown(&["p_det"], "sensors")?;
        set(&mut cfg.sensors.p_det, number(s, "p_det", "", "sensors")?);
    }
    if let Some(s) = root.section("behaviors")? {
        let mut behaviors = vec![WitnessBehavior::Honest; cfg.zone.witness_count];
        for e in &s.entries {
            let slot = e
                .key
                .strip_prefix('W')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| (1..=behaviors.len()).contains(n))
                .ok_or_else(|| PolicyError::UnknownKey(doc::join("behaviors", &e.key)))?;
            let raw = s.scalar(&e.key)?.unwrap_or_default();
            behaviors[slot - 1] = raw.parse().map_err(|_| invalid(&doc::join("behaviors", &e.key), raw))?;
        }
        cfg.witness_behaviors = behaviors;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Scenario text that parses back to an equal configuration.
pub fn scenario_to_text(cfg: &ScenarioConfig) -> String {
    let mut root = Section::default();
    root.push_scalar("scenario", &cfg.name);
    root.push_scalar("seed", cfg.seed.to_string());

    let z = &cfg.zone;
    let mut zone = Section::default();
    zone.push_scalar("zone_id", &z.zone_id);
    zone.push_scalar("radius", format_number(z.radius, "m"));
    zone.push_scalar("witness_count", z.witness_count.to_string());
    zone.push_scalar("quorum_k", z.quorum_k.to_string());
    zone.push_scalar("interval", format_number(z.interval_seconds, "s"));
    zone.push_scalar("claim_period", format_number(z.claim_period_seconds, "s"));
    zone.push_scalar("run", format_number(z.run_seconds, "s"));
    zone.push_scalar("d_max", format_number(z.d_max, "m"));
    zone.push_scalar("d_acc", format_number(z.d_acc, "m"));
    let mut w = Section::default();
    for (i, p) in z.witness_positions.iter().enumerate() {
        w.push_scalar(&format!("W{}", i + 1), render_vector(*p));
    }
    zone.push_section("witnesses", w);
    let c = &z.channel;
    let mut ch = Section::default();
    ch.push_scalar("pl0", format_number(c.pl0, ""));
    ch.push_scalar("d0", format_number(c.d0, ""));
    ch.push_scalar("gamma", format_number(c.gamma, ""));
    ch.push_scalar("shadow_sigma", format_number(c.shadow_sigma, ""));
    ch.push_scalar("rounds", c.rounds.to_string());
    ch.push_scalar("mp_sigma", format_number(c.mp_sigma, ""));
    ch.push_scalar("dist_err_frac", format_number(c.dist_err_frac, ""));
    zone.push_section("channel", ch);
    root.push_section("zone", zone);

    let mut prover = Section::default();
    prover.push_scalar("true_position", render_vector(cfg.prover_true_pos));
    prover.push_scalar("claimed_position", render_vector(cfg.prover_claimed_pos));
    prover.push_scalar("honest", cfg.prover_honesty.to_string());
    prover.push_scalar("delay", format_number(cfg.prover_delay_m, "m"));
    root.push_section("prover", prover);
    root.push_section("policy", cfg.policy.to_section());
    if !cfg.scene.objects.is_empty() {
        let mut scene = Section::default();
        let objects: Vec<&str> = cfg.scene.objects.iter().map(String::as_str).collect();
        scene.push_scalar("objects", objects.join(", "));
        root.push_section("scene", scene);
    }
    let mut sensors = Section::default();
    sensors.push_scalar("p_det", format_number(cfg.sensors.p_det, ""));
    root.push_section("sensors", sensors);
    if !cfg.witness_behaviors.is_empty() {
        let mut b = Section::default();
        for (i, behavior) in cfg.witness_behaviors.iter().enumerate() {
            b.push_scalar(&format!("W{}", i + 1), behavior.as_str());
        }
        root.push_section("behaviors", b);
    }
    root.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        for name in SCENARIO_NAMES {
            let c = build_scenario(name).unwrap();
            assert_eq!(c.zone.claim_count().unwrap(), 30, "{name}");
        }
        let b = build_scenario("baseline_4w").unwrap();
        assert_eq!(b.prover_true_pos, Vector3::planar(5.0, 5.0));
        assert_eq!(b.policy.policy_id, "supply_chain_v1");
        assert!(b.claims_are_legitimate());
        let e = build_scenario("edge_position").unwrap();
        assert_eq!(e.prover_true_pos, Vector3::planar(9.28, 0.0));
        assert!(e.claims_are_legitimate());
        let f = build_scenario("distance_fraud").unwrap();
        assert_eq!(f.prover_true_pos, Vector3::planar(13.0, 13.0));
        assert_eq!(f.prover_claimed_pos, Vector3::planar(5.0, 5.0));
        assert!(!f.claims_are_legitimate());
        assert!(!build_scenario("visual_invalid").unwrap().scene.contains("red car"));
        assert!(build_scenario("visual_valid").unwrap().scene.contains("red car"));
        let six = build_scenario("baseline_6w").unwrap();
        assert_eq!((six.zone.witness_count, six.policy.quorum_n), (6, 6));
        assert!(matches!(build_scenario("nope"), Err(ScenarioError::UnknownScenario(_))));
    }

    #[test]
    fn text_round_trip() {
        for name in SCENARIO_NAMES {
            let mut c = build_scenario(name).unwrap();
            c.seed = 99;
            c.witness_behaviors = vec![WitnessBehavior::Honest, WitnessBehavior::Colluder];
            c.witness_behaviors.resize(c.zone.witness_count, WitnessBehavior::Honest);
            let text = scenario_to_text(&c);
            assert_eq!(parse_scenario(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn minimal_file_overrides() {
        let c = parse_scenario(
            "scenario: custom\nbase: edge_position\nseed: 5\nzone:\n    channel:\n        mp_sigma: 2\nbehaviors:\n    W2: offline\n",
        )
        .unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.prover_true_pos, Vector3::planar(9.28, 0.0));
        assert_eq!(c.zone.channel.mp_sigma, 2.0);
        assert_eq!(c.witness_behaviors[1], WitnessBehavior::Offline);
        assert_eq!(c.witness_behaviors.len(), 4);
    }

    #[test]
    fn bad_files() {
        let bad_quorum = "scenario: x\nzone:\n    quorum_k: 5\n";
        assert!(matches!(
            parse_scenario(bad_quorum),
            Err(ScenarioError::Config(ConfigError::QuorumExceedsWitnesses { k: 5, n: 4 }))
        ));
        let mismatched = "scenario: x\nzone:\n    witness_count: 6\npolicy: supply_chain_v1\n";
        assert!(matches!(parse_scenario(mismatched), Err(ScenarioError::Config(_))));
        assert!(matches!(parse_scenario("seed: 1\n"), Err(ScenarioError::Policy(PolicyError::MissingField(_)))));
        assert!(matches!(
            parse_scenario("scenario: x\nfoo: 1\n"),
            Err(ScenarioError::Policy(PolicyError::UnknownKey(_)))
        ));
        assert!(parse_scenario("scenario: x\nbehaviors:\n    W9: honest\n").is_err());
        assert!(parse_scenario("scenario: x\nprover:\n    true_position: 1\n").is_err());
        assert!(parse_scenario("scenario: x\nzone:\n    witness_count: 5\n").is_err());
    }
}

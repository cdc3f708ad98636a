//! `wzone` command-line interface.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration or input error
//! (including malformed files and unknown flags), 3 verification failure.

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use wzone::chain::BlockLog;
use wzone::encoding::{read_framed, write_framed};
use wzone::evidence::{
    verify_evidence, verify_evidence_in_chain, EvidenceObject, Registry, CHAIN_MAGIC, EVIDENCE_MAGIC, REGISTRY_MAGIC,
};
use wzone::geometry::ZoneConfig;
use wzone::policy::{parse_policy, BUILTIN_POLICIES};
use wzone::sim::heatmap::write_csv;
use wzone::sim::scenario::load_scenario_file;
use wzone::sim::{
    build_scenario, calibrate, heatmap, monte_carlo, run_scenario, CalibrationTarget, GridSpec, HeatmapMode,
    ScenarioConfig, Summary, SCENARIO_NAMES,
};
use wzone::witness::derive_witness_keys;

use report::{render_table, summaries_to_csv, ReportRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wzone", version, about = "Witnessing-zone proof-of-location simulator and evidence verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario once or as a Monte Carlo experiment.
    Run(RunArgs),
    /// Write an admission-probability grid as CSV (x, y, p, overlay).
    Heatmap(HeatmapArgs),
    /// Verify an evidence file against a witness registry.
    Verify(VerifyArgs),
    /// Solve for a channel or sensor parameter that hits a target admission rate.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "scenario_file", value_parser = clap::builder::PossibleValuesParser::new(SCENARIO_NAMES))]
    pub scenario: Option<String>,
    /// Scenario file in the indentation key/value syntax.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Master seed. Defaults to the scenario file's seed, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo iterations; iteration i uses seed + i.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    /// Worker threads for Monte Carlo iterations; output does not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub jobs: u64,
    /// Print the results table. Without a scenario, runs all six built-ins.
    #[arg(long)]
    pub table: bool,
    /// Summary format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the first admitted evidence object of the seed's run.
    #[arg(long)]
    pub evidence_out: Option<PathBuf>,
    /// Write the witness registry of the seed's run.
    #[arg(long)]
    pub registry_out: Option<PathBuf>,
    /// Write the block chain of the seed's run.
    #[arg(long)]
    pub chain_out: Option<PathBuf>,
    /// Write the per-witness run log (JSON lines) of the seed's run.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub y_max: f64,
    /// Grid spacing in meters.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    pub mode: Mode,
    /// Simulated claims per cell in monte_carlo mode.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Default zone with this many witnesses (4 or 6).
    #[arg(long, default_value_t = 4, conflicts_with = "scenario_file")]
    pub witnesses: usize,
    /// Take the zone from a scenario file.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub evidence: PathBuf,
    #[arg(long)]
    pub registry: PathBuf,
    /// Also check binding to this block chain.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Additional accepted policy file; built-in policies are always accepted.
    #[arg(long)]
    pub policy: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    /// Target admission probability. Defaults to the reference value of the target.
    #[arg(long, allow_negative_numbers = true)]
    pub value: Option<f64>,
    /// Bisection bracket width.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Target {
    EdgeAdmission,
    VisualAdmission,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Verification(m) | CliError::Internal(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}

fn emit(out_path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out_path {
        Some(p) => write_file(p, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()).map_err(internal),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(internal)
}

fn load_config(args: &RunArgs) -> CliResult<Option<ScenarioConfig>> {
    let mut cfg = match (&args.scenario, &args.scenario_file) {
        (Some(name), _) => build_scenario(name).map_err(input)?,
        (None, Some(path)) => load_scenario_file(path).map_err(input)?,
        (None, None) => return Ok(None),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(Some(cfg))
}

fn write_artifacts(cfg: &ScenarioConfig, args: &RunArgs, stderr: &mut dyn Write) -> CliResult<()> {
    if args.evidence_out.is_none() && args.registry_out.is_none() && args.chain_out.is_none() && args.log.is_none() {
        return Ok(());
    }
    let result = run_scenario(cfg);
    if let Some(path) = &args.evidence_out {
        match result.outcomes.iter().find_map(|o| o.evidence.as_ref()) {
            Some(ev) => write_file(path, &write_framed(EVIDENCE_MAGIC, ev))?,
            None => {
                writeln!(stderr, "no claim was admitted; {} not written", path.display()).map_err(internal)?;
            }
        }
    }
    if let Some(path) = &args.registry_out {
        let registry = Registry::new(&cfg.zone, &derive_witness_keys(cfg.seed, &cfg.zone));
        write_file(path, &write_framed(REGISTRY_MAGIC, &registry))?;
    }
    if let Some(path) = &args.chain_out {
        write_file(path, &write_framed(CHAIN_MAGIC, &BlockLog(result.chain.clone())))?;
    }
    if let Some(path) = &args.log {
        let mut buf = Vec::new();
        result.write_log(&mut buf).map_err(internal)?;
        write_file(path, &buf)?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let iterations = args.iterations as usize;
    let jobs = args.jobs as usize;
    let configs: Vec<ScenarioConfig> = match load_config(args)? {
        Some(cfg) => vec![cfg],
        None if args.table => SCENARIO_NAMES
            .iter()
            .map(|n| {
                let mut c = build_scenario(n).map_err(internal)?;
                c.seed = args.seed.unwrap_or(0);
                Ok(c)
            })
            .collect::<CliResult<_>>()?,
        None => return Err(CliError::Input("one of --scenario, --scenario-file or --table is required".into())),
    };
    if configs.len() == 1 {
        write_artifacts(&configs[0], args, stderr)?;
    }
    let summaries: Vec<Summary> = configs.iter().map(|c| monte_carlo(c, iterations, jobs)).collect();
    let text = if args.table {
        render_table(&summaries.iter().map(ReportRow::from).collect::<Vec<_>>())
    } else {
        match args.format {
            OutputFormat::Json => to_json(&summaries[0])?,
            OutputFormat::Csv => summaries_to_csv(&summaries).map_err(internal)?,
        }
    };
    emit(args.out.as_deref(), &text, stdout)
}

fn cmd_heatmap(args: &HeatmapArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let zone = match &args.scenario_file {
        Some(path) => load_scenario_file(path).map_err(input)?.zone,
        None => ZoneConfig::with_witnesses(args.witnesses).map_err(input)?,
    };
    let grid = GridSpec {
        x_min: args.x_min,
        x_max: args.x_max,
        y_min: args.y_min,
        y_max: args.y_max,
        step: args.step,
    };
    let mode = match args.mode {
        Mode::Analytic => HeatmapMode::Analytic,
        Mode::MonteCarlo => HeatmapMode::MonteCarlo,
    };
    let cells = heatmap(&zone, &grid, mode, args.samples, args.seed).map_err(input)?;
    let mut buf = Vec::new();
    write_csv(&cells, &mut buf).map_err(internal)?;
    emit(args.out.as_deref(), &String::from_utf8(buf).map_err(internal)?, stdout)
}

fn cmd_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let malformed = |what: &str, e: wzone::error::EncodingError| CliError::Input(format!("malformed {what}: {e}"));
    let evidence: EvidenceObject =
        read_framed(EVIDENCE_MAGIC, &read_file(&args.evidence)?).map_err(|e| malformed("evidence", e))?;
    let registry: Registry =
        read_framed(REGISTRY_MAGIC, &read_file(&args.registry)?).map_err(|e| malformed("registry", e))?;
    let mut known: Vec<String> = BUILTIN_POLICIES.iter().map(|(id, _)| id.to_string()).collect();
    for path in &args.policy {
        let text = String::from_utf8(read_file(path)?).map_err(input)?;
        known.push(parse_policy(&text).map_err(input)?.policy_id);
    }
    let verdict = match &args.chain {
        Some(path) => {
            let chain: BlockLog = read_framed(CHAIN_MAGIC, &read_file(path)?).map_err(|e| malformed("chain", e))?;
            verify_evidence_in_chain(&evidence, &registry, &known, &chain.0)
        }
        None => verify_evidence(&evidence, &registry, &known),
    };
    if verdict.is_pass() {
        writeln!(stdout, "{verdict}").map_err(internal)
    } else {
        Err(CliError::Verification(verdict.to_string()))
    }
}

fn cmd_calibrate(args: &CalibrateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let target = match args.target {
        Target::EdgeAdmission => CalibrationTarget::EdgeAdmission,
        Target::VisualAdmission => CalibrationTarget::VisualAdmission,
    };
    let zone = ZoneConfig::with_witnesses(4).map_err(internal)?;
    let value = args.value.unwrap_or_else(|| target.default_value());
    let result = calibrate(&zone, target, value, args.tolerance).map_err(input)?;
    stdout.write_all(to_json(&result)?.as_bytes()).map_err(internal)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, stdout, stderr),
        Command::Heatmap(a) => cmd_heatmap(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Calibrate(a) => cmd_calibrate(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let label = match e {
                CliError::Input(_) => "error",
                CliError::Verification(_) => "verification failed",
                CliError::Internal(_) => "internal error",
            };
            let _ = writeln!(stderr, "{label}: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["wzone"];
        full.extend_from_slice(args);
        let code = run_cli(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_input_error() {
        assert_eq!(run(&["run", "--bogus"]).0, EXIT_INPUT);
        assert_eq!(run(&["frobnicate"]).0, EXIT_INPUT);
        assert_eq!(run(&["run", "--scenario", "nope"]).0, EXIT_INPUT);
        assert_eq!(run(&["run", "--scenario", "baseline_4w", "--iterations", "0"]).0, EXIT_INPUT);
    }

    #[test]
    fn help_documents_flags() {
        let (code, out, _) = run(&["run", "--help"]);
        assert_eq!(code, EXIT_OK);
        for flag in ["--scenario", "--scenario-file", "--seed", "--iterations", "--jobs", "--table", "--out"] {
            assert!(out.contains(flag), "{flag}");
        }
    }

    #[test]
    fn run_without_scenario() {
        let (code, _, err) = run(&["run"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("required"));
    }

    #[test]
    fn calibrate_outputs_json() {
        let (code, out, _) = run(&["calibrate", "--target", "edge_admission"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["parameter"], "d_acc");
        assert!((v["value"].as_f64().unwrap() - 20.6).abs() < 0.1);
        assert_eq!(run(&["calibrate", "--target", "visual_admission", "--value", "1.5"]).0, EXIT_INPUT);
    }

    #[test]
    fn degenerate_heatmap() {
        assert_eq!(run(&["heatmap", "--step", "0"]).0, EXIT_INPUT);
        assert_eq!(run(&["heatmap", "--step", "-1"]).0, EXIT_INPUT);
        assert_eq!(run(&["heatmap", "--witnesses", "5"]).0, EXIT_INPUT);
    }
}

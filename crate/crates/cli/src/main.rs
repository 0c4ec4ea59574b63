//! Command-line runner: loads a scenario, runs the requested variants and
//! seeds, writes per-run artifacts plus a cross-variant comparison.
//!
//! Exit codes: 0 on success, 1 for configuration problems (bad flags, bad
//! config file, bad overrides), 2 for failures once runs have started.
//! Artifacts of completed runs are kept on a later failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use ricsim_core::config::{CmModeSetting, ScenarioConfig};
use ricsim_core::engine::{run, RunOutput};
use ricsim_core::metrics::{aggregate_variant, comparison_table, VariantAggregate};

const OUT_DIR_ENV: &str = "RICSIM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "ricsim",
    about = "Deterministic simulator of two conflicting RAN-control xApps behind a conflict-mitigation pipeline",
    after_help = "Each run writes out/<variant>/<seed>/{summary.json,trace.csv,verdicts.jsonl,events.csv};\n\
                  the cartesian product of variants and seeds is followed by comparison.txt and\n\
                  comparison.json aggregating each variant over its seeds."
)]
struct Args {
    /// Scenario configuration file (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Conflict-mitigation variant to run; repeatable. Default: all three.
    #[arg(long = "variant", value_name = "MODE")]
    variants: Vec<CmModeSetting>,

    /// Seed to run; repeatable. Default: the configured seed.
    #[arg(long = "seed", value_name = "N")]
    seeds: Vec<u64>,

    /// Override the configured duration, in seconds.
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,

    /// Output directory. Default: $RICSIM_OUT_DIR, else ./out.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Configuration override `dotted.key=value`; repeatable. The key must
    /// exist in the configuration schema.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Suppress progress and the final table on stdout.
    #[arg(long)]
    quiet: bool,
}

enum CliError {
    /// Anything wrong with the request itself; exit 1.
    Config(String),
    /// A failure after runs started; exit 2.
    Runtime(String),
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    fn report(&self) -> ExitCode {
        match self {
            CliError::Config(message) => {
                eprintln!("error: {message}");
                ExitCode::from(1)
            }
            CliError::Runtime(message) => {
                eprintln!("error: {message}");
                ExitCode::from(2)
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Applies one `dotted.key=value` override onto the JSON form of the config.
/// Only keys that already exist may be set; structure is never invented.
fn apply_override(tree: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (key, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("--set {spec}: expected key=value")))?;
    // Interpret the value as JSON when possible (numbers, booleans, null,
    // quoted strings); anything else is taken as a bare string.
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));

    let mut node = tree;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let path_so_far = segments[..=i].join(".");
        let next = match node {
            serde_json::Value::Object(map) => map.get_mut(*segment),
            serde_json::Value::Array(items) => segment
                .parse::<usize>()
                .ok()
                .and_then(|idx| items.get_mut(idx)),
            _ => None,
        };
        node = next.ok_or_else(|| {
            CliError::config(format!("--set {key}: no such configuration key: {path_so_far}"))
        })?;
    }
    *node = value;
    Ok(())
}

fn build_base_config(args: &Args) -> Result<ScenarioConfig, CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if !args.sets.is_empty() {
        let mut tree = serde_json::to_value(&config)
            .map_err(|e| CliError::config(format!("config serialization: {e}")))?;
        for spec in &args.sets {
            apply_override(&mut tree, spec)?;
        }
        config = serde_json::from_value(tree)
            .map_err(|e| CliError::config(format!("--set produced an invalid config: {e}")))?;
    }
    if let Some(duration) = args.duration {
        config.duration_s = duration;
    }
    config
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(config)
}

fn dedup_preserving_order<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for &item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn write_run_artifacts(dir: &Path, output: &RunOutput) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join("summary.json"), output.summary_json()).map_err(io_err)?;
    std::fs::write(dir.join("trace.csv"), output.trace_csv()).map_err(io_err)?;
    std::fs::write(dir.join("verdicts.jsonl"), output.verdicts_jsonl()).map_err(io_err)?;
    std::fs::write(dir.join("events.csv"), output.events_csv()).map_err(io_err)?;
    Ok(())
}

fn execute(args: &Args) -> Result<(), CliError> {
    let base = build_base_config(args)?;
    let variants = if args.variants.is_empty() {
        vec![CmModeSetting::Off, CmModeSetting::PrioMlb, CmModeSetting::PrioMro]
    } else {
        dedup_preserving_order(&args.variants)
    };
    let seeds = if args.seeds.is_empty() {
        vec![base.seed]
    } else {
        dedup_preserving_order(&args.seeds)
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut aggregates: Vec<VariantAggregate> = Vec::new();
    for &variant in &variants {
        let mut summaries = Vec::new();
        for &seed in &seeds {
            let mut config = base.clone();
            config.cm.mode = variant;
            config.seed = seed;
            let output =
                run(&config).map_err(|e| CliError::Runtime(format!("{}/{seed}: {e}", variant)))?;
            let run_dir = out_dir.join(variant.as_str()).join(seed.to_string());
            write_run_artifacts(&run_dir, &output)?;
            if !args.quiet {
                let s = &output.summary;
                println!(
                    "{}/{}: load {:.2}% sat {:.2}% blocks {} rlf {} ho {} pp {}",
                    variant,
                    seed,
                    s.mean_bs_load_pct,
                    s.mean_user_satisfaction_pct,
                    s.call_block_count,
                    s.rlf_count,
                    s.handover_count,
                    s.pingpong_count
                );
            }
            summaries.push(output.summary);
        }
        aggregates.push(aggregate_variant(variant.as_str(), &summaries));
    }

    let table = comparison_table(&aggregates);
    let comparison_json = serde_json::json!({ "variants": aggregates });
    let io_err = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", out_dir.display()));
    std::fs::create_dir_all(&out_dir).map_err(io_err)?;
    std::fs::write(out_dir.join("comparison.txt"), &table).map_err(io_err)?;
    let mut json_text =
        serde_json::to_string_pretty(&comparison_json).expect("comparison serializes");
    json_text.push('\n');
    std::fs::write(out_dir.join("comparison.json"), json_text).map_err(io_err)?;
    if !args.quiet {
        print!("{table}");
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own exit code for bad usage is 2; the contract here wants
    // config-class failures, bad flags included, to exit 1.
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

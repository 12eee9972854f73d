//! `edgeagentx` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime or
//! training failure, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgeagentx::harness::{compare_variants, parse_config, run_experiment};
use edgeagentx::neural::read_checkpoint;
use edgeagentx::{Error, ExperimentConfig, Variant};

#[derive(Parser)]
#[command(name = "edgeagentx", version, about = "Federated multi-agent learning on a simulated tactical mesh")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one variant over the configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of `run.seeds`.
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several variants on the same config and tabulate them.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated variant names.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
    },
    /// Inspect a checkpoint file.
    Checkpoint {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        info: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig { .. } | Error::ConfigParse { .. } => 1,
            Error::Io { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

fn parse_variant(name: &str) -> Result<Variant, Failure> {
    name.parse().map_err(usage)
}

fn run(
    config: &Path,
    seed_override: Option<u64>,
    variant: Option<&str>,
    episodes: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut c = load_config(config)?;
    if let Some(seed) = seed_override {
        c.run.seeds = vec![seed];
    }
    if let Some(v) = variant {
        c.run.variant = parse_variant(v)?;
    }
    if let Some(n) = episodes {
        c.run.episodes = n;
    }
    if let Some(dir) = out {
        c.run.output_dir = dir;
    }
    c.validate()?;
    let summaries = run_experiment(&c)?;
    println!("variant {} -> {}", c.run.variant, c.run.output_dir.display());
    println!("seed  final_reward  latency_ms  throughput  convergence");
    for s in &summaries {
        let conv = s.convergence_episode.map_or("-".to_string(), |e| e.to_string());
        let flag = if s.diverged { "  diverged" } else { "" };
        println!(
            "{:<5} {:>12.4} {:>11.2} {:>11.3} {:>12}{flag}",
            s.seed, s.final_window_reward, s.final_latency_ms, s.final_throughput, conv
        );
    }
    if summaries.iter().any(|s| s.diverged) {
        return Err(Failure { code: 2, message: "training diverged".into() });
    }
    Ok(())
}

fn compare(config: &Path, variants: &[String]) -> Result<(), Failure> {
    let base = load_config(config)?;
    let configs = variants
        .iter()
        .map(|v| Ok(base.with_variant(parse_variant(v.trim())?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let report = compare_variants(&configs)?;
    print!("{}", report.to_table());
    Ok(())
}

fn checkpoint(input: &Path, info: bool) -> Result<(), Failure> {
    if !info {
        return Err(usage("checkpoint: nothing to do, pass --info"));
    }
    let flat = read_checkpoint(input)?;
    println!("file {}", input.display());
    println!("layers {}", flat.shapes().len());
    for (i, s) in flat.shapes().iter().enumerate() {
        println!("  layer {i}: {} -> {}", s.inputs, s.outputs);
    }
    println!("parameters {}", flat.len());
    println!("l2_norm {}", flat.l2_norm());
    println!("finite {}", flat.values().iter().all(|v| v.is_finite()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, seed_override, variant, episodes, out } => {
            run(&config, seed_override, variant.as_deref(), episodes, out)
        }
        Command::Compare { config, variants } => compare(&config, &variants),
        Command::Checkpoint { input, info } => checkpoint(&input, info),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

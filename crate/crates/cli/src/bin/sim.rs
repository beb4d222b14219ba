//! Deterministic session simulator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mirrorboard::sim::{self, Scenario, TransportKind, VerificationReport};

#[derive(Debug, Parser)]
#[command(version, about = "Run scripted or fuzzed sessions against the relay and check every replica")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "in_process")]
        transport: TransportKind,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the verification report here as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate and run a random mixed workload.
    Fuzz {
        #[arg(long, default_value_t = 4)]
        clients: usize,
        #[arg(long, default_value_t = 1000)]
        events: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "in_process")]
        transport: TransportKind,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Args) -> Result<bool> {
    let (scenario, transport, report_path) = match args.command {
        Command::Run { scenario, transport, seed, report } => {
            let text = fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let mut parsed = Scenario::from_json(&text).with_context(|| format!("parsing {}", scenario.display()))?;
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            (parsed, transport, report)
        }
        Command::Fuzz { clients, events, seed, transport, report } => {
            anyhow::ensure!(clients >= 1, "--clients must be at least 1");
            (sim::fuzz_scenario(seed, clients, events), transport, report)
        }
    };
    let report = sim::run(&scenario, transport)?;
    summarize(&report);
    if let Some(path) = report_path {
        write_report(&path, &report)?;
    }
    Ok(report.passed)
}

fn summarize(r: &VerificationReport) {
    println!(
        "seed {} | {} clients | {} actions | {} events | quiescent at tick {} | converged at tick {}",
        r.seed,
        r.clients,
        r.actions,
        r.events_sequenced,
        r.quiescent_tick.map_or("-".into(), |t| t.to_string()),
        r.converged_tick.map_or("-".into(), |t| t.to_string()),
    );
    println!("relay hash {}", r.relay_hash);
    for (check, tally) in &r.checks {
        println!("  {check:<16} {:>6} runs {:>4} failures", tally.runs, tally.failures);
    }
    for v in &r.violations {
        println!("  violation at tick {}: [{}] {}", v.tick, v.check, v.detail);
    }
    if r.violation_count > r.violations.len() as u64 {
        println!("  ... {} more", r.violation_count - r.violations.len() as u64);
    }
    println!("{}", if r.passed { "PASSED" } else { "FAILED" });
}

fn write_report(path: &Path, report: &VerificationReport) -> Result<()> {
    fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))
}

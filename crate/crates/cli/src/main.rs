//! Command-line front end: `generate-data`, `run` and `summarize`.

use std::path::PathBuf;
use std::process::ExitCode;

use adagrid::harness::{self, output, ScenarioConfig};
use adagrid::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adagrid", version, about = "Bayesian inversion with learned forward-model discretizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the chain seed (`generate-data`: the data seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Shortens the chain to desk scale.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Writes data.csv and truth.csv.
    GenerateData(Common),
    /// Generates data and runs the sampler.
    Run {
        #[command(flatten)]
        common: Common,
        /// Independent chains run concurrently.
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Prints the summary of a finished run.
    Summarize {
        /// Accepted for symmetry with the other subcommands.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        desk_scale: bool,
    },
}

/// Every failure while reading the scenario counts as a config error.
fn load(c: &Common, seed_is_data: bool) -> Result<ScenarioConfig, Error> {
    let as_config = |e: Error| match e {
        Error::Config { .. } => e,
        other => Error::Config { line: 0, message: format!("{}: {other}", c.config.display()) },
    };
    let text = std::fs::read_to_string(&c.config).map_err(|e| as_config(e.into()))?;
    let mut cfg = ScenarioConfig::parse(&text).map_err(as_config)?;
    if c.desk_scale {
        cfg = cfg.desk_scale();
    }
    if let Some(s) = c.seed {
        if seed_is_data {
            cfg.data_seed = s;
        } else {
            cfg = cfg.with_chain_seed(s);
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenerateData(c) => {
            let cfg = load(&c, true)?;
            let forward = harness::build_forward(&cfg)?;
            let data = harness::generate_data(&cfg, &forward)?;
            harness::write_data(&c.out, &data)?;
        }
        Command::Run { common, chains } => {
            let cfg = load(&common, false)?;
            let forward = harness::build_forward(&cfg)?;
            let data = harness::generate_data(&cfg, &forward)?;
            harness::write_data(&common.out, &data)?;
            let runs = harness::run_chains(&cfg, &data, chains)?;
            let cfgs: Vec<_> = (0..runs.len())
                .map(|i| cfg.clone().with_chain_seed(cfg.chain_seed.wrapping_add(i as u64)))
                .collect();
            harness::write_runs(&common.out, &cfgs, &runs)?;
            print!("{}", output::render_summary(&output::summarize_dir(&common.out)?));
        }
        Command::Summarize { out, .. } => {
            print!("{}", output::render_summary(&output::summarize_dir(&out)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

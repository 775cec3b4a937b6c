use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use extentlab_cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "extentlab", version, about = "Fit, generate and analyze daily maximum temperature ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Run config (TOML), or a manifest JSON to replay.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the config value.
    #[arg(long, env = "EXTENTLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate synthetic station data and a grid from known parameters.
    Simulate(Common),
    /// Run the MCMC sampler on the station data.
    Fit(Common),
    /// Generate replicate series on the grid from the posterior.
    Generate(Common),
    /// Probability surfaces, extents, trends and identity checks.
    Analyze(Common),
    /// Render the summary tables.
    Report(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::Generate(c) => (Command::Generate, c),
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let inv = Invocation { command, config: c.config, seed: c.seed, threads: c.threads };
    match run(&inv) {
        Ok(m) => {
            eprintln!("{}: wrote {} file(s) to {}", m.command, m.outputs.len(), m.config.output.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

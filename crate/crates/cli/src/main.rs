use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wzlvq_cli::{commands, load_config, CliError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "wzlvq", version, about = "Wyner-Ziv lattice quantizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distortion and rate of one quantizer at one correlation.
    Quantize(Common),
    /// One row per point of a correlation grid.
    Sweep(Common),
    /// Layout, schedule audit, chain coding and interpolation.
    Netsim(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

type Runner = fn(&ExperimentConfig, Format) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, default_format, go): (_, _, Runner) = match &cli.command {
        Command::Quantize(c) => (c, Format::Json, commands::quantize),
        Command::Sweep(c) => (c, Format::Csv, commands::sweep),
        Command::Netsim(c) => (c, Format::Json, commands::netsim),
    };
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let cfg = load_config(&common.config, common.seed)?;
    let text = go(&cfg, common.format.unwrap_or(default_format))?;
    match &common.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

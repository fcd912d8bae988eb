use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use resolvent_lab::cli::{load_config, run, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    Moduli,
    Curve,
    Metastab,
    Audit,
    All,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Moduli => Command::Moduli,
            Subcommand::Curve => Command::Curve,
            Subcommand::Metastab => Command::Metastab,
            Subcommand::Audit => Command::Audit,
            Subcommand::All => Command::All,
        }
    }
}

/// Resolvent curves, metastability search and inequality audits for
/// accretive operators on l_p spaces.
#[derive(Debug, Parser)]
#[command(name = "resolvent-lab", version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and summary.txt.
    #[arg(long, env = "RESOLVENT_LAB_OUT", default_value = "resolvent-lab-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match run(args.command.into(), cfg, &args.out) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

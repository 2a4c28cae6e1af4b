use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use trafficstab::commands::{self, Format, Outcome, Status, SweepRequest};
use trafficstab::config::Config;

#[derive(Parser, Debug)]
#[command(name = "trafficstab", version, about = "Stability certificates for traffic network models")]
struct Cli {
    /// Grid resolution for sampled suprema and trapping boxes.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Report)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify the model in a config (exit 0 certified, 2 inconclusive).
    Certify { config: PathBuf },
    /// Simulate trajectories; CSV with --format csv.
    Simulate { config: PathBuf },
    /// Bisect the largest certifying value of one parameter.
    Sweep {
        config: PathBuf,
        /// Parameter path, e.g. `demands.5.q`.
        #[arg(long)]
        param: Option<String>,
        /// `lo,hi`.
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Spectral radius and bounds of a CSV matrix.
    Rho { matrix: PathBuf },
    /// Freeway trapping box with its intermediate bounds.
    Trap { config: PathBuf },
    /// Re-verify a certificate report from its recorded coefficients.
    Audit {
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn load(path: &Path) -> Result<Config> {
    Config::load(path).with_context(|| format!("in {}", path.display()))
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Certify { config } => commands::certify(&load(config)?, cli.grid, cli.format),
        Command::Simulate { config } => commands::run_simulation(&load(config)?, cli.seed, cli.format),
        Command::Sweep { config, param, range, tol } => {
            let req = SweepRequest { param: param.clone(), range: *range, grid: cli.grid, tol: *tol };
            commands::sweep(&load(config)?, &req)
        }
        Command::Rho { matrix } => commands::rho(&commands::read_matrix(matrix)?),
        Command::Trap { config } => commands::trap(&load(config)?, cli.grid, cli.format),
        Command::Audit { report, config } => {
            let text = std::fs::read_to_string(report).with_context(|| format!("cannot read {}", report.display()))?;
            let cfg = config.as_deref().map(load).transpose()?;
            commands::audit_report(&text, cfg.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &outcome.artifact)
                    .with_context(|| format!("cannot write {}", path.display()))
                    .and_then(|_| writeln!(stdout, "{}", outcome.summary).map_err(Into::into)),
                None if matches!(cli.command, Command::Sweep { .. }) => writeln!(stdout, "{}", outcome.summary).map_err(Into::into),
                None => stdout.write_all(outcome.artifact.as_bytes()).map_err(Into::into),
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(Status::Error.code() as u8);
            }
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Error.code() as u8)
        }
    }
}

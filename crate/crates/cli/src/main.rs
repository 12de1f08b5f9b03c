use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mtto_lab::{csv_out, max_grid_from_env, parse_config, run_campaign, select_matrix, summary, write_outputs, MatrixSelector, RunOptions};

/// Verification campaigns for matrix-valued truncated Toeplitz operators.
#[derive(Parser)]
#[command(name = "mtto-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured checks; exit status 0 iff all pass.
    Verify {
        config: PathBuf,
        /// Directory for report.json and CSV dumps (overrides the config's output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fixed grid size, overriding the config.
        #[arg(long)]
        grid: Option<usize>,
        /// Seed for all random test data, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the JSON report instead of the summary and skip CSV dumps.
        #[arg(long)]
        json_only: bool,
    },
    /// Print one matrix as CSV with "re,im" cells.
    Dump {
        config: PathBuf,
        /// shift, tau or mtto:<index>
        #[arg(long)]
        matrix: MatrixSelector,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_FAILED_CHECKS: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn options(grid: Option<usize>, seed: Option<u64>) -> anyhow::Result<RunOptions> {
    Ok(RunOptions {
        grid,
        seed,
        max_grid: max_grid_from_env()?,
    })
}

fn load(path: &PathBuf) -> anyhow::Result<mtto_lab::CampaignConfig> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_config(&text)?)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Verify {
            config,
            out,
            grid,
            seed,
            json_only,
        } => {
            let cfg = load(&config)?;
            let outcome = run_campaign(&cfg, &options(grid, seed)?);
            if let Some(dir) = out.or_else(|| cfg.output.clone()) {
                write_outputs(&dir, &outcome, json_only).with_context(|| format!("writing outputs to {}", dir.display()))?;
            }
            let text = if json_only {
                outcome.report.to_json_pretty() + "\n"
            } else {
                summary(&outcome.report)
            };
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(if outcome.report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED_CHECKS)
            })
        }
        Command::Dump { config, matrix, grid, seed } => {
            let cfg = load(&config)?;
            let outcome = run_campaign(&cfg, &options(grid, seed)?);
            let m = select_matrix(&outcome, matrix)?;
            csv_out::write_matrix(std::io::stdout().lock(), m)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

//! `suggest`: command-line front end of the suggestive annotation workbench.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.

mod commands;

use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "suggest", version, about = "Suggestive annotation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom benchmark and its manifest.
    Phantom(PhantomArgs),
    /// Hard Dice per class between two label maps, as one CSV row.
    Dice(PairArgs),
    /// Average BvSB of probability maps, most uncertain first.
    Bvsb(BvsbArgs),
    /// Saved annotation effort per tissue class.
    Effort(EffortArgs),
    /// Run the active-learning simulation described by a JSON config.
    Simulate(SimulateArgs),
    /// Convert between 8-bit PGM and VTF1.
    Convert(ConvertArgs),
}

#[derive(Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub out: std::path::PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub labeled: usize,
    #[arg(long)]
    pub pool: usize,
    #[arg(long)]
    pub test: usize,
    /// Image size as ROWSxCOLS.
    #[arg(long, default_value = "32x32", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

#[derive(Args)]
pub struct PairArgs {
    #[arg(long)]
    pub pred: std::path::PathBuf,
    #[arg(long)]
    pub gt: std::path::PathBuf,
}

#[derive(Args)]
pub struct BvsbArgs {
    #[arg(long = "probmap", required = true)]
    pub probmaps: Vec<std::path::PathBuf>,
}

#[derive(Args)]
pub struct EffortArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Chebyshev radius within which boundary pixels count as overlapping.
    #[arg(long, default_value_t = 0)]
    pub tol: usize,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: std::path::PathBuf,
    #[arg(long)]
    pub config: std::path::PathBuf,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kind {
    Volume,
    Labelmap,
}

#[derive(Args)]
#[group(skip)]
#[command(group(ArgGroup::new("input").required(true).multiple(false)))]
pub struct ConvertArgs {
    /// PGM to convert into VTF1.
    #[arg(long, group = "input")]
    pub pgm: Option<std::path::PathBuf>,
    /// 2D u8 VTF1 file to convert into PGM.
    #[arg(long, group = "input")]
    pub vtf: Option<std::path::PathBuf>,
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// How to interpret PGM pixels.
    #[arg(long, value_enum, default_value = "volume")]
    pub kind: Kind,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(r)?, parse(c)?))
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
        Command::Phantom(a) => commands::phantom(&a),
        Command::Dice(a) => commands::dice(&a),
        Command::Bvsb(a) => commands::bvsb(&a),
        Command::Effort(a) => commands::effort(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Convert(a) => commands::convert(&a),
    };
    match result {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_runtime() { 3 } else { 2 })
        }
    }
}

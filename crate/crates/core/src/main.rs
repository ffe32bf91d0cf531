use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fixlab::harness::{execute, Command, Options};

#[derive(Parser)]
#[command(name = "fixlab", version, about = "Sampled condition checks and averaged fixed-point iterations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured condition and commutativity checks.
    Check(Common),
    /// Run the configured iteration engine and its diagnostics.
    Run(Common),
    /// Verify the configured coefficient schedule.
    Schedule(Common),
    /// Tabulate condition B over a grid of (gamma, mu).
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for random sample plans.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Check(c) => (Command::Check, c),
        Cmd::Run(c) => (Command::Run, c),
        Cmd::Schedule(c) => (Command::Schedule, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let level = if common.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let opts = Options { out: common.out, seed: common.seed, quiet: common.quiet };
    let outcome = execute(command, &common.config, &opts);
    if let Some(err) = &outcome.error {
        eprintln!("fixlab: {err}");
    } else if !opts.quiet {
        if let (Some(report), Some(path)) = (&outcome.report, &outcome.report_path) {
            let status = if report.passed { "pass" } else { "fail" };
            println!("{status}: report written to {}", path.display());
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

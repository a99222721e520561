use std::path::PathBuf;
use std::process::ExitCode;

use bohmflow::cli::{key_listing, run_command, CommandName, Overrides};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Bohmian trajectories, split-operator propagation and delayed-choice
/// interferometry.
#[derive(Parser)]
#[command(name = "bohmflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Two-packet interference: field maps, trajectories, histogram.
    Twoslit(Common),
    /// Width and depth of the effective interference well.
    Barrier(Common),
    /// Delayed-choice Mach-Zehnder interferometer.
    Wheeler(Common),
    /// Free or harmonic 2D propagation.
    Propagate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Override one key, e.g. `--set packet.sigma0=0.4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    list_keys: bool,
}

fn main() -> ExitCode {
    let mut command = Cli::command();
    for c in CommandName::ALL {
        command = command.mut_subcommand(c.as_str(), |s| s.after_long_help(key_listing(c)));
    }
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (name, common) = match cli.command {
        Cmd::Twoslit(c) => (CommandName::TwoSlit, c),
        Cmd::Barrier(c) => (CommandName::Barrier, c),
        Cmd::Wheeler(c) => (CommandName::Wheeler, c),
        Cmd::Propagate(c) => (CommandName::Propagate, c),
    };
    if common.list_keys {
        print!("{}", key_listing(name));
        return ExitCode::SUCCESS;
    }
    let overrides = Overrides {
        config: common.config,
        seed: common.seed,
        dt: common.dt,
        grid: common.grid,
        set: common.set,
    };
    match run_command(name, &overrides, &common.out, common.threads) {
        Ok(bundle) => {
            println!(
                "{name}: wrote {} files and {}",
                bundle.manifest.files.len(),
                bundle.manifest_path().display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use clap::{Parser, Subcommand};
use piezoshell::commands::{cmd_cell, cmd_homogenize, cmd_macro, cmd_validate};
use piezoshell::config::RunConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Two-scale homogenization of thin piezoelectric perforated shells.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cell mesh, cell problem solutions and their VTK dumps.
    Cell(Args),
    /// Homogenized tensors along both routes, CSV and JSON summary.
    Homogenize(Args),
    /// Homogenized membrane and bending solutions on the macro domain.
    Macro(Args),
    /// Corrector convergence study against direct oscillating solves.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

type Pipeline = fn(&RunConfig, Option<&Path>) -> piezoshell::Result<Vec<PathBuf>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&Args, Pipeline) = match &cli.command {
        Command::Cell(a) => (a, cmd_cell),
        Command::Homogenize(a) => (a, cmd_homogenize),
        Command::Macro(a) => (a, cmd_macro),
        Command::Validate(a) => (a, cmd_validate),
    };
    let result = RunConfig::load(&args.config).and_then(|c| run(&c, args.out.as_deref()));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

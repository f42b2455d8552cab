use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subquantum_cli::{
    headline, parse_config, preset, run_experiment, ConfigError, Experiment, ExperimentConfig, Issue, RunError,
    Threads, PRESETS,
};

#[derive(Parser)]
#[command(
    name = "subquantum",
    version,
    about = "Bouncer and walker simulations of a driven oscillator in a thermal bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Driven damped oscillator: steady state, work balance, angular momentum.
    Bouncer(RunArgs),
    /// Ornstein-Uhlenbeck ensemble: MSD, velocity variance, diffusion.
    Walker(RunArgs),
    /// Bouncer work against walker heat over the same periods.
    Balance(RunArgs),
    /// Energy levels, loop actions and the admissible-frequency scan.
    Spectrum(RunArgs),
    /// Velocity fields, Pauli current and field identities on a grid.
    Spinfield(RunArgs),
    /// Print a bundled preset, or list them when no name is given.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name (see `subquantum preset`).
    #[arg(long)]
    preset: Option<String>,
    /// Override `root_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `threads`: "auto" or a positive count.
    #[arg(long)]
    threads: Option<Threads>,
    /// Override `output_dir`.
    #[arg(long, env = "SUBQUANTUM_OUT_DIR")]
    out: Option<PathBuf>,
}

fn load(args: RunArgs, expected: Experiment) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    if cfg.experiment != expected {
        return Err(ConfigError::Schema(vec![Issue {
            path: "experiment".into(),
            message: format!("is `{}` but the `{expected}` subcommand was used", cfg.experiment),
        }])
        .into());
    }
    if let Some(seed) = args.seed {
        cfg.root_seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, experiment) = match cli.command {
        Command::Bouncer(a) => (a, Experiment::Bouncer),
        Command::Walker(a) => (a, Experiment::Walker),
        Command::Balance(a) => (a, Experiment::Balance),
        Command::Spectrum(a) => (a, Experiment::Spectrum),
        Command::Spinfield(a) => (a, Experiment::Spinfield),
        Command::Preset { name: None } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Preset { name: Some(name) } => {
            return match PRESETS.iter().find(|(n, _)| *n == name) {
                Some((_, text)) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                None => report(&RunError::from(preset(&name).unwrap_err())),
            };
        }
    };
    match load(args, experiment).and_then(|cfg| run_experiment(&cfg)) {
        Ok(summary) => {
            println!("{} finished in {:.3} s", summary.experiment, summary.wall_clock_seconds);
            for line in headline(&summary) {
                println!("  {line}");
            }
            println!("  wrote {} file(s) to {}", summary.artifacts.len(), summary.config.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

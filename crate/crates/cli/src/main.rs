//! `resource-games`: quantifiers, witness games and verification runs from
//! JSON files.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, FreeVariant, Kind, ObjectType};
use error::CliError;

#[derive(Parser)]
#[command(name = "resource-games", version, about = "Resource quantifiers and the subchannel games they certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness or weight of a state or measurement set.
    Quantify(QuantifyArgs),
    /// Witness game and certificate for a state and measurement set.
    BuildGame(BuildGameArgs),
    /// Optimal value of a game for a given state and measurement set.
    Play(PlayArgs),
    /// Check the advantage bounds and write a report.
    Verify(VerifyArgs),
    /// Print a bundled fixture, or list them.
    Fixture {
        name: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct QuantifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, value_enum)]
    object: Option<ObjectType>,
    #[arg(long, value_enum)]
    free: Option<FreeVariant>,
    /// GPT model file, for `gpt-state` and `gpt-mset`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Free GPT states as a JSON array of vectors, instead of the barycenter.
    #[arg(long)]
    free_generators: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildGameArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    povmset: Option<PathBuf>,
    #[arg(long, value_enum)]
    free_states: Option<FreeVariant>,
    #[arg(long, value_enum)]
    free_sets: Option<FreeVariant>,
    /// Build the exclusion game from weight witnesses.
    #[arg(long)]
    exclusion: bool,
    /// Number of garbage outcomes.
    #[arg(long)]
    j: Option<u64>,
    /// Draw a random garbage state from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Garbage state file; defaults to the maximally mixed state.
    #[arg(long)]
    chi: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    povmset: Option<PathBuf>,
    /// Minimize the value instead.
    #[arg(long)]
    exclusion: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// 1: discrimination, 2: exclusion, 3: both in a polytopic theory.
    #[arg(long)]
    result: Option<u8>,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    povmset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum)]
    free_states: Option<FreeVariant>,
    #[arg(long, value_enum)]
    free_sets: Option<FreeVariant>,
    #[arg(long)]
    free_generators: Option<PathBuf>,
    #[arg(long)]
    chi: Option<PathBuf>,
    #[arg(long)]
    j: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file; defaults to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RESOURCE_GAMES_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("RESOURCE_GAMES_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let clock = report::Clock::start();
    let (name, cfg, outcome) = match cli.command {
        Command::Fixture { name: None } => {
            for (n, _) in report::FIXTURES {
                println!("{n}");
            }
            return Ok(());
        }
        Command::Fixture { name: Some(n) } => {
            let text = report::fixture(&n).ok_or_else(|| CliError::usage(format!("no bundled fixture {n}")))?;
            print!("{text}");
            return Ok(());
        }
        Command::Quantify(a) => {
            let flags = ExperimentConfig {
                input: a.input,
                kind: a.kind,
                object: a.object,
                free: a.free,
                model: a.model,
                free_generators: a.free_generators,
                out: a.out,
                ..Default::default()
            };
            let cfg = ExperimentConfig::resolve(a.common.config.as_deref(), flags)?.with_defaults("quantify");
            let out = commands::quantify(&cfg)?;
            ("quantify", cfg, out)
        }
        Command::BuildGame(a) => {
            let flags = ExperimentConfig {
                state: a.state,
                povmset: a.povmset,
                free_states: a.free_states,
                free_sets: a.free_sets,
                exclusion: flag(a.exclusion),
                j: a.j,
                seed: a.seed,
                chi: a.chi,
                out: a.out,
                ..Default::default()
            };
            let cfg = ExperimentConfig::resolve(a.common.config.as_deref(), flags)?.with_defaults("build-game");
            let out = commands::build_game(&cfg)?;
            ("build-game", cfg, out)
        }
        Command::Play(a) => {
            let flags = ExperimentConfig {
                game: a.game,
                state: a.state,
                povmset: a.povmset,
                exclusion: flag(a.exclusion),
                out: a.out,
                ..Default::default()
            };
            let cfg = ExperimentConfig::resolve(a.common.config.as_deref(), flags)?.with_defaults("play");
            let out = commands::play(&cfg)?;
            ("play", cfg, out)
        }
        Command::Verify(a) => {
            let flags = ExperimentConfig {
                result: a.result,
                state: a.state,
                povmset: a.povmset,
                model: a.model,
                free_states: a.free_states,
                free_sets: a.free_sets,
                free_generators: a.free_generators,
                chi: a.chi,
                j: a.j,
                samples: a.samples,
                games: a.games,
                seed: a.seed,
                report: a.report,
                ..Default::default()
            };
            let cfg = ExperimentConfig::resolve(a.common.config.as_deref(), flags)?.with_defaults("verify");
            let out = commands::verify(&cfg)?;
            ("verify", cfg, out)
        }
    };
    let stamp = clock.stamp(outcome.timings);
    let value = report::envelope(name, &cfg, &outcome.inputs, outcome.result, stamp);
    report::emit(&value, cfg.report.as_deref().or(cfg.out.as_deref()))?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.code() as u8)
        }
    }
}

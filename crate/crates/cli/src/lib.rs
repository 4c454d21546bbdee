//! Command-line driver: `sgdecay <mode> --config <path> [--output <dir>] [--jobs N] [--verbose]`.
//!
//! Exit status: 0 when every check passes, 1 on a check failure, 2 on a
//! usage or configuration error, 3 on a numerical abort.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sgdecay_core::config::{parse_config, Mode};
use sgdecay_core::experiment::run_experiment;
use sgdecay_core::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sgdecay", version, about = "Decay-rate experiments for the second-grade fluid system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continuum linear decay curves, fitted rates and sandwich constants.
    LinearDecay(CommonArgs),
    /// Nonlinear run with the co-evolved linear solution.
    Simulate(CommonArgs),
    /// Decay characters of a profile, generated grid data or a snapshot.
    DecayCharacter(CommonArgs),
    /// Full predicted-versus-observed verification report.
    Compare(CommonArgs),
    /// Concurrent runs over a grid of exponents and parameters.
    Sweep(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Concurrent experiments for `sweep`.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, short)]
    verbose: bool,
}

impl Command {
    fn split(self) -> (Mode, CommonArgs) {
        match self {
            Command::LinearDecay(a) => (Mode::LinearDecay, a),
            Command::Simulate(a) => (Mode::Simulate, a),
            Command::DecayCharacter(a) => (Mode::DecayCharacter, a),
            Command::Compare(a) => (Mode::Compare, a),
            Command::Sweep(a) => (Mode::Sweep, a),
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NumericalAbort { .. } | Error::Quadrature(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` (including the program name), runs the experiment and
/// returns the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    let (mode, args) = cli.command.split();
    let level = if args.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    let mut config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if config.mode != mode {
        log::info!("running `{}` although the config says `{}`", mode.name(), config.mode.name());
        config.mode = mode;
    }
    if let Some(dir) = args.output {
        config.output = dir;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    log::debug!("effective config: {config:?}");
    match run_experiment(&config, args.jobs) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("outputs in {}", outcome.output_dir.display());
            if outcome.aborted {
                EXIT_NUMERICAL
            } else if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

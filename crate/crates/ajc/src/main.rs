use std::path::PathBuf;
use std::process::ExitCode;

use ajc::commands::{self, RunOptions};
use ajc::config::TailConfig;
use ajc::{CliError, Preset, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ajc", version, about = "Augmented jump chain solver for time-dependent Markov jump processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in problem, used when no config is given.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the jump matrix and write it as MatrixMarket plus a JSON header.
    Assemble(Common),
    /// Draw trajectories with the temporal Gillespie sampler.
    Sample(Common),
    /// Propagate an initial density through the reconstructed propagator.
    Propagate(Common),
    /// Solve the space-time Koopman problem for an observable.
    Koopman(Common),
    /// Solve a space-time committor.
    Committor {
        #[command(flatten)]
        common: Common,
        /// absorb-to-b, absorb-to-a, or a value in [0, 1].
        #[arg(long, value_parser = TailConfig::parse_flag)]
        tail: Option<TailConfig>,
    },
    /// Forward-coherence defect of a space-time set.
    Coherence {
        #[command(flatten)]
        common: Common,
        /// Count survival past the horizon as staying in the set.
        #[arg(long)]
        count_survival: bool,
    },
    /// Operator-norm convergence study against the matrix-exponential oracle.
    Convergence(Common),
}

fn run(cli: Cli) -> Result<String, CliError> {
    let (common, tail, count_survival) = match &cli.command {
        Command::Assemble(c)
        | Command::Sample(c)
        | Command::Propagate(c)
        | Command::Koopman(c)
        | Command::Convergence(c) => (c, None, false),
        Command::Committor { common, tail } => (common, *tail, false),
        Command::Coherence { common, count_survival } => (common, None, *count_survival),
    };
    let cfg = match (&common.config, common.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(p)) => RunConfig::from_preset(p),
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
    };
    if common.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let opts = RunOptions {
        out_dir: common.out.clone(),
        seed: common.seed,
        threads: common.threads,
        tail,
        count_survival,
    };
    match cli.command {
        Command::Assemble(_) => commands::assemble(&cfg, &opts),
        Command::Sample(_) => commands::sample(&cfg, &opts),
        Command::Propagate(_) => commands::propagate(&cfg, &opts),
        Command::Koopman(_) => commands::koopman(&cfg, &opts),
        Command::Committor { .. } => commands::committor(&cfg, &opts),
        Command::Coherence { .. } => commands::coherence(&cfg, &opts),
        Command::Convergence(_) => commands::convergence(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AJC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

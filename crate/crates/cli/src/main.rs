use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use glassvault::sim::{self, Scenario};

const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "glassvault",
    version,
    about = "Run exposure-notification scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its transcript.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Protocol)]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the scenario header.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Protocol,
    Ideal,
    Both,
}

impl From<ModeArg> for sim::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Protocol => Self::Protocol,
            ModeArg::Ideal => Self::Ideal,
            ModeArg::Both => Self::Both,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GV_LOG", "warn")).init();
    let Command::Run {
        scenario,
        mode,
        out,
        seed,
    } = Cli::parse().command;

    let mut s = match Scenario::load(&scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let report = match sim::run(&s, mode.into()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if let Err(e) = report.transcript.write_to(&out) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return ExitCode::FAILURE;
    }
    if let Some(d) = report.divergence {
        eprintln!("modes diverge at event {}", d.index);
        eprintln!("  protocol: {:?}", d.protocol);
        eprintln!("  ideal:    {:?}", d.ideal);
        return ExitCode::from(EXIT_DIVERGED);
    }
    log::info!(
        "{} events written to {}",
        report.transcript.events.len(),
        out.display()
    );
    ExitCode::SUCCESS
}

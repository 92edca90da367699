//! Command-line front end. Exit codes: 0 success, 1 a configured threshold
//! was not met, 2 usage or configuration error, 3 any other failure.

pub mod config;
pub mod drivers;

use crate::error::Error;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wavefront", version, about = "Spreading speeds, fronts and forced waves for shifting-habitat models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spreading speed of the scenario's model (prints `quantity,value`).
    Speed {
        #[arg(long)]
        config: PathBuf,
        /// Also write speeds.csv and speed_summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-step the model; writes run.csv, fronts.csv and diagnostics.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Forced wave by monotone iteration; writes wave.csv and wave.meta.json.
    Wave {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Long-time steady state; writes steady.csv (and oracle.csv on the half line).
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sampled order and translation checks; writes report.json.
    Hypotheses {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Repeat `simulate` over a range of one parameter; writes summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Model field name, or a JSON pointer into the scenario.
        #[arg(long)]
        param: String,
        /// `a:b:step`
        #[arg(long)]
        values: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn execute(cmd: Command, stdout: &mut dyn std::io::Write) -> Result<bool, Error> {
    let outcome = match cmd {
        Command::Speed { config, out } => drivers::speed(&config::load(&config)?, out.as_deref())?,
        Command::Simulate { config, out } => drivers::simulate_cmd(&config::load(&config)?, &base_dir(&config), &out)?,
        Command::Wave { config, out } => drivers::wave(&config::load(&config)?, &out)?,
        Command::Steady { config, out } => drivers::steady(&config::load(&config)?, &base_dir(&config), &out)?,
        Command::Hypotheses { config, out } => drivers::hypotheses(&config::load(&config)?, &out)?.0,
        Command::Sweep { config, param, values, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config { pointer: String::new(), msg: format!("{}: {e}", config.display()) })?;
            let values = drivers::parse_values(&values).map_err(|msg| Error::Config { pointer: "--values".into(), msg })?;
            drivers::sweep(&text, &base_dir(&config), &out, &param, &values)?
        }
    };
    stdout.write_all(outcome.to_csv().as_bytes())?;
    Ok(outcome.passed)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_THRESHOLD,
        Err(e) => {
            let _ = writeln!(stderr, "wavefront: {e}");
            exit_code(&e)
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

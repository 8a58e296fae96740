//! `rare-sim`: runs one receiver experiment and writes its CSV (and
//! optionally SVG) outputs.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when the
//! experiment itself fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rydberg_core::experiments::{self, Experiment, ExperimentConfig, OutputFormat};
use rydberg_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rare-sim",
    version,
    about = "Rydberg atomic receiver experiments"
)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; overrides the config's seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Probe transmission scan and Autler-Townes splitting.
    EitSpectrum,
    /// SQL vs classic antenna sensitivity over frequency.
    Sensitivity,
    /// Heterodyne PSK link: SER/BER against Es/N0.
    Link,
    /// Magnitude-only MIMO detection and SIMO combining gain.
    Mimo,
    /// Simultaneous reception of several bands.
    Multiband,
    /// Dual-band sensing and communication.
    Msac,
    /// Target vibration sensing.
    Vibration,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::EitSpectrum => Experiment::EitSpectrum,
            Command::Sensitivity => Experiment::Sensitivity,
            Command::Link => Experiment::Link,
            Command::Mimo => Experiment::Mimo,
            Command::Multiband => Experiment::Multiband,
            Command::Msac => Experiment::Msac,
            Command::Vibration => Experiment::Vibration,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `argv` (program name first), runs the experiment and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("rare-sim: {e}");
            return EXIT_CONFIG;
        }
    };
    let experiment = Experiment::from(cli.command);
    let seed = cfg.seed_or(cli.seed);
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::CsvSvg => OutputFormat::CsvSvg,
    };
    let report = match experiments::run(experiment, &cfg, seed, format) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("rare-sim {experiment}: {e}");
            return exit_code(&e);
        }
    };
    match report.write_to(&cli.out) {
        Ok(paths) => {
            for line in &report.summary {
                println!("{line}");
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("rare-sim: {e}");
            EXIT_RUNTIME
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbattery::single_excitation::DecayConvention;
use qbattery_cli::commands::{self, parse_window, RunFile};
use qbattery_cli::config::{Format, RunConfig, SpectrumConfig};
use qbattery_cli::verify::{self, VerifyOptions};
use qbattery_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "qbattery", version, about = "Storage-phase dynamics of dissipative spin-lattice quantum batteries")]
struct Cli {
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay-band table of the lattice in a config file.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Propagate the configured engine and write a trajectory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.path`; standard output when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `output.format`.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Energy excess of an engineered run over a reference run.
    Compare {
        /// Run of the engineered lattice.
        file_d: PathBuf,
        /// Run of the reference lattice.
        file_u: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Power-law fit window `t0:t1`; defaults to the final third of the run.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Cross-engine equivalence suite on chains of at most eight sites.
    Verify {
        /// Decay convention of the analytic engine under test.
        #[arg(long, default_value = "operator")]
        convention: DecayConvention,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Engine(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Spectrum { config, output, format } => {
            let cfg = SpectrumConfig::load(&read(&config)?)?;
            emit(output.as_deref(), &commands::spectrum(&cfg, format.unwrap_or_default())?)?;
        }
        Command::Run { config, output, format } => {
            let cfg = RunConfig::load(&read(&config)?)?;
            let text = commands::run(&cfg, format.unwrap_or(cfg.output.format))?;
            emit(output.as_deref().or(cfg.output.path.as_deref()), &text)?;
        }
        Command::Compare { file_d, file_u, output, format, window } => {
            let d = RunFile::parse(file_d.display().to_string(), &read(&file_d)?)?;
            let u = RunFile::parse(file_u.display().to_string(), &read(&file_u)?)?;
            let cmp = commands::compare(&d, &u, window)?;
            let text = match format {
                Format::Json => cmp.to_json(&d, &u),
                Format::Csv => cmp.to_csv(&d, &u),
            };
            emit(output.as_deref(), &text)?;
        }
        Command::Verify { convention } => {
            let checks = verify::run_suite(VerifyOptions { convention });
            print!("{}", verify::render(&checks));
            if !checks.iter().all(|c| c.passed()) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

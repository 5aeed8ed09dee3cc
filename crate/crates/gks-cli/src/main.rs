//! `gks`: periodic traveling waves of the generalized Kuramoto-Sivashinsky
//! equation from the command line. Profile solves, Bloch spectra, modulation
//! systems, the weak-dissipation limit, stability atlases, direct runs, and
//! the cross-module validation suite.
//!
//! Exit codes: 0 success, 2 a validation suite failed, 3 a solver did not
//! converge, 4 bad parameters, bad files, or i/o trouble.

mod atlas;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use gks_core::io::Json;
use gks_core::GksError;

use commands::{
    AtlasArgs, KdvLimitArgs, ProfileArgs, SimulateArgs, SpectrumArgs, ValidateArgs, WhithamArgs,
};
use config::Config;

#[derive(Parser)]
#[command(
    name = "gks",
    version,
    about = "Periodic traveling waves of the generalized Kuramoto-Sivashinsky equation: profiles, spectra, modulation systems, stability atlases, direct runs"
)]
struct Cli {
    /// Read parameter defaults from a `key = value` file (flags override).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the resolved parameters of this run to a config file.
    #[arg(long, global = true, value_name = "PATH")]
    emit_config: Option<PathBuf>,
    /// Report failures as a JSON record on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one wave profile; writes the binary container and a table.
    Profile(ProfileArgs),
    /// Bloch spectrum sweep plus the fitted low-frequency expansion.
    Spectrum(SpectrumArgs),
    /// First- and second-order modulation systems at one wave.
    Whitham(WhithamArgs),
    /// Three-component dispersion relation of the weak-dissipation limit.
    KdvLimit(KdvLimitArgs),
    /// Classify modulation stability across a wavenumber sweep.
    Atlas(AtlasArgs),
    /// Integrate a modulated wave train and record the final state.
    Simulate(SimulateArgs),
    /// Run the validation suites and print a pass/fail report.
    Validate(ValidateArgs),
}

fn run(cli: &Cli) -> gks_core::Result<i32> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let emit = cli.emit_config.as_ref();
    match &cli.command {
        Command::Profile(a) => a.run(&cfg, emit),
        Command::Spectrum(a) => a.run(&cfg, emit),
        Command::Whitham(a) => a.run(&cfg, emit),
        Command::KdvLimit(a) => a.run(&cfg, emit),
        Command::Atlas(a) => a.run(&cfg, emit),
        Command::Simulate(a) => a.run(&cfg, emit),
        Command::Validate(a) => a.run(&cfg, emit),
    }
}

/// 3 for solver trouble on valid input, 4 for anything wrong with the
/// request itself; suite failures exit 2 without passing through here.
fn exit_class(e: &GksError) -> u8 {
    match e {
        GksError::NonConvergence { .. } | GksError::Solvability { .. } | GksError::Linalg { .. } => 3,
        GksError::InvalidParameter { .. }
        | GksError::DegenerateLimit { .. }
        | GksError::Io(_)
        | GksError::Format { .. } => 4,
    }
}

fn error_kind(e: &GksError) -> &'static str {
    match e {
        GksError::NonConvergence { .. } => "non-convergence",
        GksError::InvalidParameter { .. } => "invalid-parameter",
        GksError::DegenerateLimit { .. } => "degenerate-limit",
        GksError::Solvability { .. } => "solvability",
        GksError::Linalg { .. } => "linear-algebra",
        GksError::Io(_) => "io",
        GksError::Format { .. } => "format",
    }
}

fn report_error(e: &GksError, json: bool) -> u8 {
    let code = exit_class(e);
    if json {
        let doc = Json::Object(vec![Json::key(
            "error",
            Json::Object(vec![
                Json::key("kind", Json::Str(error_kind(e).into())),
                Json::key("message", Json::Str(e.to_string())),
                Json::key("exit", Json::Int(code as i64)),
            ]),
        )]);
        eprintln!("{}", doc.render());
    } else {
        eprintln!("error: {e}");
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => ExitCode::from(report_error(&e, cli.json_errors)),
    }
}

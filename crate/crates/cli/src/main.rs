#![forbid(unsafe_code)]
//! Command-line front end for the averaging toolkit: certify operators and
//! representations, tabulate averaging-set laws, and decide innerness of
//! derivations, with reports in text, CSV, or JSON.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isometrize_cli::report::{Format, Report, Status};
use isometrize_cli::run::{self, defaults, Command, RunConfig};

/// Certify similarity to isometries and unitaries by ergodic averaging.
#[derive(Parser, Debug)]
#[command(name = "isometrize", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug)]
struct CommonArgs {
    /// Averaging/scan horizon (default: 4096 for operators, 64 for
    /// averaging-set reports, a per-group depth for representations).
    #[arg(long = "nmax")]
    nmax: Option<u64>,
    /// Certificate residual tolerance.
    #[arg(long, default_value_t = defaults::TOL)]
    tol: f64,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Certify a single operator similar to an isometry.
    AnalyzeOperator {
        /// Operator file: {"rows": r, "cols": c, "data": [[[re, im], …], …]}.
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Certify a group representation similar to a unitary one.
    UnitarizeRep {
        /// Representation file: {"group": …, "dim": n, "generators": {…}}.
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Boundary-decay tolerance for the averaging-set scan.
        #[arg(long = "decay-tol")]
        decay_tol: Option<f64>,
        /// Doubling exponent for the uniform-bound certificate.
        #[arg(long, requires = "kappa")]
        p: Option<u64>,
        /// Doubling constant for the uniform-bound certificate.
        #[arg(long, requires = "p")]
        kappa: Option<f64>,
    },
    /// Certify a semigroup representation similar to an isometric one.
    IsometrizeSemigroup {
        /// Representation file: {"group": …, "dim": n, "generators": {…}}.
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Boundary-decay tolerance for the averaging-set scan.
        #[arg(long = "decay-tol")]
        decay_tol: Option<f64>,
    },
    /// Tabulate averaging-set laws (translation ratios, symmetry,
    /// Tempelman and doubling diagnostics) for a named group.
    FolnerReport {
        /// Group name: Z^d or N^d (d 1..=4), heisenberg3, finite:<file>.
        #[arg(long)]
        group: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Set-growth exponent for the doubling diagnostic rows.
        #[arg(long)]
        p: Option<u64>,
    },
    /// Decide whether a derivation over a unitary representation is inner.
    DerivationReport {
        /// Representation file with an extra "derivation" object.
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Boundary-decay tolerance for the block-representation scan.
        #[arg(long = "decay-tol")]
        decay_tol: Option<f64>,
    },
}

/// Reads `ISOMETRIZE_SEED` (default 0 when unset).
fn read_seed() -> Result<u64, String> {
    match std::env::var("ISOMETRIZE_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            format!("ISOMETRIZE_SEED must be a nonnegative integer, got {text:?}")
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err("ISOMETRIZE_SEED must be valid unicode".into())
        }
    }
}

/// Renders the report, writes it to the requested sink exactly once, and
/// maps the status to the exit code.
fn emit(report: &Report, format: Format, output: Option<&Path>) -> ExitCode {
    let mut text = report.render(format);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    // CSV rows cannot carry the failure reason, so put it on stderr.
    if format == Format::Csv && report.status != Status::Certified {
        if let Some(reason) = &report.reason {
            eprintln!("{:?}: {reason}", report.status);
        }
    }
    match output {
        Some(path) => {
            if let Err(err) = std::fs::write(path, &text) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return ExitCode::from(Status::Error.exit_code());
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(report.status.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage errors are plain errors (exit 1); --help and --version
            // render on stdout and exit 0.
            let code = if err.use_stderr() {
                Status::Error.exit_code()
            } else {
                0
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let (command, common, decay_tol, p, kappa) = match cli.command {
        CliCommand::AnalyzeOperator { file, common } => {
            (Command::AnalyzeOperator { path: file }, common, None, None, None)
        }
        CliCommand::UnitarizeRep {
            file,
            common,
            decay_tol,
            p,
            kappa,
        } => (
            Command::UnitarizeRep { path: file },
            common,
            decay_tol,
            p,
            kappa,
        ),
        CliCommand::IsometrizeSemigroup {
            file,
            common,
            decay_tol,
        } => (
            Command::IsometrizeSemigroup { path: file },
            common,
            decay_tol,
            None,
            None,
        ),
        CliCommand::FolnerReport { group, common, p } => {
            (Command::FolnerReport { group }, common, None, p, None)
        }
        CliCommand::DerivationReport {
            file,
            common,
            decay_tol,
        } => (
            Command::DerivationReport { path: file },
            common,
            decay_tol,
            None,
            None,
        ),
    };

    let seed = match read_seed() {
        Ok(seed) => seed,
        Err(detail) => {
            let report = Report {
                command: command.name().into(),
                status: Status::Error,
                reason: Some(detail),
                certificate: None,
                corroboration_failure: None,
                diagnostics: Vec::new(),
            };
            return emit(&report, common.format, common.output.as_deref());
        }
    };

    let config = RunConfig {
        command,
        n_max: common.nmax,
        tol: common.tol,
        decay_tol,
        doubling_p: p,
        doubling_kappa: kappa,
        seed,
    };
    let report = run::run(&config);
    emit(&report, common.format, common.output.as_deref())
}

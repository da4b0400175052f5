//! Command-line front end.
//!
//! Exit codes: 0 success or all checks passed, 1 an inequality violation was
//! found, 2 invalid input. Every command writes a single JSON object to
//! standard output (or `key<TAB>value` lines for `kl --format text`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{self, PropertyReport, Proposition};
use crate::kl::{kl_gap_diagonal, kl_gaussian};
use crate::linalg::{random_diag, random_spd, validate_spd, SpdMatrix};
use crate::matrix_io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

const DEFAULT_CLOSED_FORM_TRIALS: usize = 10_000;
const DEFAULT_MC_TRIALS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "klmin", version, about = "Gaussian KL divergence, diagonal lower bound and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropSelector {
    P1,
    P2,
    P3,
    C1,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// KL(N(0,Σy) ‖ N(0,Σx)) from two CSV covariance files.
    Kl {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Run randomized property campaigns.
    Verify {
        #[arg(long, value_enum)]
        prop: PropSelector,
        /// Defaults to 10000 for p2/p3 and 100 for p1/c1.
        #[arg(long)]
        trials: Option<usize>,
        /// Dimension (total dimension of the block structure for p2).
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Condition target for the closed-form campaigns.
        #[arg(long, default_value_t = 1e4)]
        cond: f64,
        /// Monte Carlo samples per trial for p1/c1.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Write a random SPD (or diagonal) covariance matrix as CSV.
    Gen {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        cond: f64,
        #[arg(long)]
        diagonal: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Violation,
    InvalidInput,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::Violation => EXIT_VIOLATION,
            Status::InvalidInput => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliReport {
    pub command: String,
    #[serde(default)]
    pub inputs: Vec<InputInfo>,
    #[serde(default)]
    pub results: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<PropertyReport>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl CliReport {
    fn new(command: &str) -> Self {
        CliReport {
            command: command.to_string(),
            inputs: Vec::new(),
            results: BTreeMap::new(),
            reports: Vec::new(),
            status: Status::Ok,
            diagnostic: None,
        }
    }

    fn fail(mut self, err: &Error) -> Self {
        self.status = Status::InvalidInput;
        self.diagnostic = Some(err.to_string());
        self
    }

    fn all_finite(&self) -> bool {
        self.results.values().all(|v| v.is_finite()) && self.reports.iter().all(|r| r.worst_margin.is_finite())
    }
}

fn load_spd(path: &Path) -> Result<SpdMatrix> {
    validate_spd(&matrix_io::read_matrix(path)?)
}

/// `kl --x --y`: bound and gap are added only when Σx has literal zeros off the diagonal.
pub fn cmd_kl(path_x: &Path, path_y: &Path) -> CliReport {
    let mut report = CliReport::new("kl");
    report.inputs = vec![
        InputInfo { path: path_x.display().to_string(), dim: None },
        InputInfo { path: path_y.display().to_string(), dim: None },
    ];
    let outcome = (|| -> Result<()> {
        let sx = load_spd(path_x)?;
        report.inputs[0].dim = Some(sx.dim());
        let sy = load_spd(path_y)?;
        report.inputs[1].dim = Some(sy.dim());
        report.results.insert("kl_nats".into(), kl_gaussian(&sx, &sy)?.0);
        if sx.is_diagonal() {
            let g = kl_gap_diagonal(&sx.diagonal()?, &sy)?;
            report.results.insert("bound_nats".into(), g.bound.0);
            report.results.insert("gap_nats".into(), g.gap);
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => report,
        Err(e) => report.fail(&e),
    }
}

/// `verify --prop`: runs one or all campaigns.
pub fn cmd_verify(
    prop: PropSelector,
    trials: Option<usize>,
    dim: usize,
    seed: u64,
    cond: f64,
    samples: usize,
) -> CliReport {
    let mut report = CliReport::new("verify");
    let selected: Vec<Proposition> = match prop {
        PropSelector::P1 => vec![Proposition::P1],
        PropSelector::P2 => vec![Proposition::P2],
        PropSelector::P3 => vec![Proposition::P3],
        PropSelector::C1 => vec![Proposition::C1],
        PropSelector::All => Proposition::ALL.to_vec(),
    };
    for p in selected {
        let n_trials = trials.unwrap_or(match p {
            Proposition::P2 | Proposition::P3 => DEFAULT_CLOSED_FORM_TRIALS,
            Proposition::P1 | Proposition::C1 => DEFAULT_MC_TRIALS,
        });
        let result = match p {
            Proposition::P1 => harness::check_prop1(n_trials, dim, seed, samples),
            Proposition::P2 => harness::check_prop2_random(n_trials, dim..=dim, seed, cond),
            Proposition::P3 => harness::check_prop3(n_trials, dim, seed, cond),
            Proposition::C1 => harness::check_c1(n_trials, dim, seed, samples),
        };
        match result {
            Ok(r) => report.reports.push(r),
            Err(e) => return report.fail(&e),
        }
    }
    if report.reports.iter().any(|r| !r.passed()) {
        report.status = Status::Violation;
    }
    report
}

/// `gen`: writes a random covariance matrix to `out`.
pub fn cmd_gen(dim: usize, seed: u64, cond: f64, diagonal: bool, out: &Path) -> CliReport {
    let mut report = CliReport::new("gen");
    report.inputs = vec![InputInfo { path: out.display().to_string(), dim: Some(dim) }];
    let outcome = (|| -> Result<()> {
        let m = if diagonal {
            if !(cond >= 1.0 && cond.is_finite()) {
                return Err(Error::InvalidArgument(format!("condition target {cond} must be a finite value >= 1")));
            }
            let half = cond.sqrt();
            random_diag(dim, seed, 1.0 / half, half)?.to_matrix()
        } else {
            random_spd(dim, seed, cond)?
        };
        matrix_io::write_matrix(out, &m)
    })();
    match outcome {
        Ok(()) => report,
        Err(e) => report.fail(&e),
    }
}

fn emit_text(report: &CliReport, out: &mut dyn Write) -> std::io::Result<()> {
    for (k, v) in &report.results {
        writeln!(out, "{k}\t{v:?}")?;
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let (mut report, format) = match &cli.command {
        Command::Kl { x, y, format } => (cmd_kl(x, y), *format),
        Command::Verify { prop, trials, dim, seed, cond, samples } => {
            (cmd_verify(*prop, *trials, *dim, *seed, *cond, *samples), OutputFormat::Json)
        }
        Command::Gen { dim, seed, cond, diagonal, out: path } => {
            (cmd_gen(*dim, *seed, *cond, *diagonal, path), OutputFormat::Json)
        }
    };
    if report.status != Status::InvalidInput && !report.all_finite() {
        report.status = Status::InvalidInput;
        report.diagnostic = Some("NonFinite: a computed result is not finite".into());
    }
    if let Some(d) = &report.diagnostic {
        let _ = writeln!(err, "error: {d}");
    }
    let written = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)
            .map_err(std::io::Error::other)
            .and_then(|s| writeln!(out, "{s}")),
        OutputFormat::Text => emit_text(&report, out),
    };
    if written.is_err() {
        return EXIT_INVALID;
    }
    report.status.exit_code()
}

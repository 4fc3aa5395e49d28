//! `multiboson`: solve, scan and verify multi-mode boson Hamiltonians.
//!
//! Exit status: 0 when every check passes, 2 for configuration errors,
//! 3 when a numerical validation fails, 1 for I/O errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multiboson::bethe::SolverConfig;
use multiboson::models::PresetId;
use thiserror::Error;

use config::{ConfigError, ModelArgs};
use output::{emit, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(#[from] multiboson::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "multiboson", version, about = "Exact spectra and Bethe roots of multi-mode boson Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelFlags {
    /// Config file of `key = value` lines with dotted keys
    #[arg(long, value_name = "PATH")]
    config: Option<String>,
    /// Preset model: A, B or C
    #[arg(long)]
    preset: Option<String>,
    /// Number of creation-group modes
    #[arg(long)]
    r: Option<usize>,
    /// Number of annihilation-group modes
    #[arg(long)]
    s: Option<usize>,
    /// Powers k_i, comma separated
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Linear couplings w_i, comma separated
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    /// Quadratic couplings: `zero` or the upper triangle row-major
    #[arg(long, allow_hyphen_values = true)]
    wq: Option<String>,
    /// Interaction strength
    #[arg(long, allow_hyphen_values = true)]
    g: Option<String>,
    /// Occupation vector of any state in the sector
    #[arg(long)]
    occ: Option<String>,
}

impl ModelFlags {
    fn to_args(&self) -> ModelArgs {
        ModelArgs {
            config: self.config.clone(),
            preset: self.preset.clone(),
            r: self.r,
            s: self.s,
            k: self.k.clone(),
            w: self.w.clone(),
            wq: self.wq.clone(),
            g: self.g.clone(),
            occ: self.occ.clone(),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    /// Seed for randomized starts
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Newton target for the scaled residual
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Relative energy agreement required against exact diagonalization
    #[arg(long, default_value_t = 1e-8)]
    energy_tol: f64,
    /// Also search the Bethe equations from random starts
    #[arg(long)]
    direct: bool,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, tol: self.tol, energy_tol: self.energy_tol, direct: self.direct, ..SolverConfig::default() }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputFlags {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; relative paths resolve against $MULTIBOSON_OUTPUT_DIR when set
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-validate Bethe roots against exact diagonalization in one sector
    Solve {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Sweep one coupling over a grid
    Scan {
        #[command(flatten)]
        model: ModelFlags,
        /// Grid for g, as start:stop:step
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["coupling", "range"])]
        g_range: Option<String>,
        /// Coupling to sweep: g, w.<i> or wq.<i>.<j> (1-based)
        #[arg(long, requires = "range")]
        coupling: Option<String>,
        /// Grid for --coupling, as start:stop:step
        #[arg(long, allow_hyphen_values = true, requires = "coupling")]
        range: Option<String>,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Check the one-mode polynomial algebra identities for k = 1..=kmax
    VerifyAlgebra {
        #[arg(long, default_value_t = 4)]
        kmax: u32,
        /// Fock cutoff (at least 6k)
        #[arg(long)]
        trunc: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Compare the closed-form preset coefficients with the general expansion
    VerifyPresets {
        #[arg(long)]
        case: Option<PresetId>,
        #[arg(long, default_value_t = 50)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputFlags,
    },
    /// Bethe roots of every level, optionally with the differential operator
    Roots {
        #[command(flatten)]
        model: ModelFlags,
        /// Also print the P_i coefficients (structured text only)
        #[arg(long)]
        dump_diffop: bool,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        out: OutputFlags,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (outcome, out) = match cli.command {
        Command::Solve { model, solver, out } => (commands::solve(&model.to_args().resolve()?, &solver.config())?, out),
        Command::Scan { model, g_range, coupling, range, solver, out } => {
            let res = model.to_args().resolve()?;
            let (coupling, range) = match (g_range, coupling, range) {
                (Some(r), None, None) => (multiboson::fock::Coupling::Interaction, r),
                (None, Some(c), Some(r)) => (commands::parse_coupling(&c, res.model.modes())?, r),
                _ => return Err(ConfigError::field("range", "give --g-range, or --coupling with --range").into()),
            };
            let grid = commands::parse_range(&range)?;
            (commands::scan(&res, coupling, &grid, &solver.config())?, out)
        }
        Command::VerifyAlgebra { kmax, trunc, tol, out } => (commands::verify_algebra(kmax, trunc, tol), out),
        Command::VerifyPresets { case, draws, seed, out } => (commands::verify_presets(case, draws, seed)?, out),
        Command::Roots { model, dump_diffop, solver, out } => {
            if dump_diffop && out.format != Format::Text {
                return Err(ConfigError::field("format", "--dump-diffop requires --format structured-text").into());
            }
            (commands::roots(&model.to_args().resolve()?, &solver.config(), dump_diffop)?, out)
        }
    };
    let mut text = String::new();
    for (i, table) in outcome.tables.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&table.render(out.format)?);
    }
    emit(&text, out.output.as_deref())?;
    for f in &outcome.failures {
        eprintln!("check failed: {f}");
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

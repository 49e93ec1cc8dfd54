//! Command-line front end for the guided-spectra library: run computations
//! from a graph spec document (or a builtin example) and emit deterministic
//! machine-readable band tables, dispersion traces, and certificate reports.
//!
//! Exit codes are fixed for scripting: 0 ok, 2 validation failure, 3 I/O
//! error, 4 solver failure, 5 unsupported configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use guided_spectra::cylinder::CylinderWindow;
use guided_spectra::tolerances as tol;
use guided_spectra::Error;

mod commands;
mod output;

#[derive(Parser)]
#[command(
    name = "guided-bands",
    version,
    about = "Spectra of periodic lattices perturbed by lower-dimensional periodic guides",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph document and print its combinatorial summary.
    Validate {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Sweep the truncated fibers and report guided bands, flat bands,
    /// the dispersion trace, and bracketing certificates.
    Bands {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve the exact scalar dispersion relation (square-lattice host,
    /// single contact) and compare against the sweep.
    Feshbach {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Report flat bands certified by the vanishing-eigenvector criterion.
    FlatBands {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Report a-priori band enclosures and guide-eigenvalue bounds without
    /// running the sweep.
    Estimates {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Scale guide multiplicities over a t-ladder and report measured vs
    /// predicted band edges with fitted decay exponents.
    Asymptotics {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Multiplicity scales, ascending.
        #[arg(long = "t-list", value_delimiter = ',', default_values_t = [8u64, 16, 32])]
        t_list: Vec<u64>,
    },
    /// Emit a builtin example as a graph document.
    Example {
        #[command(flatten)]
        input: InputArgs,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Graph spec document path.
    #[arg(long, conflicts_with = "example")]
    input: Option<PathBuf>,
    /// Builtin example name (see `example --help` output for the list).
    #[arg(long)]
    example: Option<String>,
    /// Example parameter as key=value; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    param: Vec<(String, i64)>,
}

#[derive(Args, Clone, Copy)]
struct SolverArgs {
    /// Quasimomentum grid points per guide direction.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    /// Transverse truncation half width W.
    #[arg(long, default_value_t = 40)]
    window: i64,
    /// Transverse boundary condition of the truncated cylinder.
    #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
    boundary: BoundaryArg,
}

impl SolverArgs {
    fn window(&self) -> CylinderWindow {
        match self.boundary {
            BoundaryArg::Periodic => CylinderWindow::periodic(self.window),
            BoundaryArg::Dirichlet => CylinderWindow::dirichlet(self.window),
        }
    }
}

#[derive(Args, Clone, Copy)]
struct ToleranceArgs {
    /// Reporting slack when deciding whether a band reaches above the
    /// unperturbed spectrum.
    #[arg(long = "tol-ess", default_value_t = tol::ESSENTIAL_DISTANCE)]
    tol_ess: f64,
    /// Band width below which a reported branch is flagged flat.
    #[arg(long = "tol-flat", default_value_t = tol::FLAT_BAND)]
    tol_flat: f64,
    /// Residual bound for flat-band eigenvector certificates.
    #[arg(long = "eig-tol", default_value_t = tol::EIGENVECTOR_RESIDUAL)]
    eig_tol: f64,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum BoundaryArg {
    Dirichlet,
    Periodic,
}

impl BoundaryArg {
    fn name(&self) -> &'static str {
        match self {
            BoundaryArg::Dirichlet => "dirichlet",
            BoundaryArg::Periodic => "periodic",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Json,
    Csv,
}

impl FormatArg {
    fn name(&self) -> &'static str {
        match self {
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        }
    }
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got \"{s}\""))?;
    let value: i64 = value
        .parse()
        .map_err(|e| format!("parameter \"{key}\" is not an integer: {e}"))?;
    Ok((key.to_string(), value))
}

/// Exit-code contract: 0 ok, 2 validation, 3 I/O, 4 solver, 5 unsupported.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::WindowTooSmall(_)
        | Error::Degenerate(_)
        | Error::UnknownExample(_) => 2,
        Error::Io(_) => 3,
        Error::Solver(_) | Error::PoleAt(_) => 4,
        Error::Unsupported(_) => 5,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::Unsupported(_)) {
                eprintln!("hint: the `bands` subcommand handles this configuration");
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

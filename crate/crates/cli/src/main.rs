//! `heatpar`: heat kernels on weighted graphs from the command line.
//!
//! Exit status: 0 success, 2 input error, 3 numerical budget exceeded.

mod document;
mod methods;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatpar_core::bessel::{bessel_time_convolve, verify_intro_identity, watson_series};
use heatpar_core::oracle::compare_kernels;
use heatpar_core::HeatError;

use document::GraphDocument;
use methods::{kernel_table, paired_tables, run_parametrix, Boundary, Method, RunConfig};
use output::{Format, Sink};

pub const THREADS_VAR: &str = "HEATPAR_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad document, flags or parameters (status 2).
    Input(String),
    /// A numerical budget could not be met (status 3).
    Numerical(String),
    /// The reader closed our output early (e.g. `| head`); not an error.
    PipeClosed,
}

impl CliError {
    fn status(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::PipeClosed => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::PipeClosed => f.write_str("output closed"),
        }
    }
}

impl From<HeatError> for CliError {
    fn from(e: HeatError) -> Self {
        match e {
            HeatError::NonFinite { .. }
            | HeatError::NonConvergence { .. }
            | HeatError::Resolution { .. }
            | HeatError::Construction(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::PipeClosed;
        }
        CliError::Input(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "heatpar", version, about = "Parametrix construction of graph heat kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Graph document (TOML).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    /// Time steps M (uniform grid t_j = j·t_max/M).
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Neumann series truncation tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Method::Spectral)]
    method: Method,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Boundary condition for closed-form-halfline (default: dirichlet when
    /// verifying the dirichlet method, neumann otherwise).
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let boundary = self.boundary.unwrap_or(if self.method == Method::Dirichlet { Boundary::Dirichlet } else { Boundary::Neumann });
        let cfg = RunConfig { t_max: self.t_max, steps: self.steps, tol: self.tol, boundary };
        cfg.validate()?;
        Ok(cfg)
    }

    fn document(&self) -> Result<GraphDocument, CliError> {
        let text = std::fs::read_to_string(&self.graph)
            .map_err(|e| CliError::Input(format!("{}: {e}", self.graph.display())))?;
        GraphDocument::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", self.graph.display())),
            other => other,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a heat kernel on the time grid.
    Kernel(Common),
    /// Compare a method against a reference; status 3 if the budget is exceeded.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Method::Spectral)]
        reference: Method,
        /// Allowed sup-norm difference.
        #[arg(long, default_value_t = 1e-5)]
        budget: f64,
    },
    /// Check a Bessel identity numerically.
    Identity(IdentityArgs),
    /// Write the parametrix, its heat image, the Neumann correction F and the assembled kernel.
    Export(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IdentityName {
    /// ∫₀ˣ I_m(τ) I_n(x−τ) dτ = 2Σ_k I_{m+n+2k+1}(x)
    Watson,
    /// I_{x+y}(t) as an alternating series of Bessel convolutions
    Intro,
    /// the intro identity at x = 1, y = 0
    #[value(name = "halfline-special-1")]
    HalflineSpecial1,
    /// the intro identity at x = 2, y = 0
    #[value(name = "halfline-special-2")]
    HalflineSpecial2,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(value_enum)]
    name: IdentityName,
    #[arg(long, default_value_t = 0)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    n: u32,
    /// Watson: the argument x. Intro: the integer order x ≥ 1.
    #[arg(long, default_value_t = 1.0)]
    x: f64,
    #[arg(long, default_value_t = 0)]
    y: u32,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Watson series terms K.
    #[arg(long, default_value_t = 40)]
    terms: u32,
    /// Neumann order L of the intro identity.
    #[arg(long, default_value_t = 20)]
    order: usize,
    #[arg(long, default_value_t = 4000)]
    quad_steps: usize,
    /// Residual tolerance (default 1e-8 for watson, 1e-6 otherwise).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Input(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot configure thread pool: {e}")))
}

fn cmd_kernel(c: &Common) -> Result<(), CliError> {
    let doc = c.document()?;
    let table = kernel_table(&doc, c.method, &c.config()?)?;
    if let Some(note) = &table.note {
        eprintln!("{}: {note}", c.method.name());
    }
    Sink::open(c.out.as_deref())?.kernel(c.format, &c.method.name(), &doc, &table.snapshots)
}

fn cmd_verify(c: &Common, reference: Method, budget: f64) -> Result<(), CliError> {
    if !(budget >= 0.0) {
        return Err(CliError::Input(format!("--budget must be nonnegative, got {budget}")));
    }
    let doc = c.document()?;
    let (a, b) = paired_tables(&doc, c.method, reference, &c.config()?)?;
    let report = compare_kernels(&a.snapshots, &b.snapshots, budget)?;
    Sink::open(c.out.as_deref())?.report(c.format, &c.method.name(), &reference.name(), &report)?;
    if report.within_budget() {
        Ok(())
    } else {
        let (j, t) = report.first_exceeding.expect("outside budget");
        Err(CliError::Numerical(format!(
            "{} vs {}: sup error {:.3e} exceeds budget {budget:.3e} (first at t = {t}, error {:.3e})",
            c.method.name(),
            reference.name(),
            report.sup,
            report.per_time[j]
        )))
    }
}

fn cmd_identity(a: &IdentityArgs) -> Result<(), CliError> {
    let report = match a.name {
        IdentityName::Watson => {
            if a.quad_steps < 2 {
                return Err(CliError::Input("--quad-steps must be at least 2".into()));
            }
            let (rhs, tail) = watson_series(a.m, a.n, a.x, a.terms)?;
            // trapezoid at two resolutions, Richardson-extrapolated
            let coarse = bessel_time_convolve(a.m, a.n, a.x, a.quad_steps)?;
            let fine = bessel_time_convolve(a.m, a.n, a.x, 2 * a.quad_steps)?;
            let lhs = (4.0 * fine - coarse) / 3.0;
            output::IdentityLine { name: "watson", lhs, rhs, residual: (lhs - rhs).abs(), tail }
        }
        _ => {
            let (x, y, name) = match a.name {
                IdentityName::HalflineSpecial1 => (1, 0, "halfline-special-1"),
                IdentityName::HalflineSpecial2 => (2, 0, "halfline-special-2"),
                _ => {
                    if a.x.fract() != 0.0 || a.x < 1.0 {
                        return Err(CliError::Input(format!("intro identity needs an integer x ≥ 1, got {}", a.x)));
                    }
                    (a.x as u32, a.y, "intro")
                }
            };
            let r = verify_intro_identity(x, y, a.t, a.order, a.quad_steps)?;
            output::IdentityLine { name, lhs: r.lhs, rhs: r.rhs, residual: r.residual, tail: r.tail }
        }
    };
    let tol = a.tol.unwrap_or(if a.name == IdentityName::Watson { 1e-8 } else { 1e-6 });
    Sink::open(a.out.as_deref())?.identity(a.format, &report)?;
    if report.residual <= tol {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{}: residual {:.3e} exceeds {tol:.3e}", report.name, report.residual)))
    }
}

fn cmd_export(c: &Common) -> Result<(), CliError> {
    let doc = c.document()?;
    let run = run_parametrix(&doc, c.method, &c.config()?)?;
    eprintln!("{}: {}", c.method.name(), run.summary());
    let parts = [
        ("parametrix", &run.parametrix.kernel),
        ("heat_image", &run.parametrix.heat_image),
        ("correction", &run.series.f),
        ("kernel", &run.kernel),
    ];
    Sink::open(c.out.as_deref())?.series(c.format, &c.method.name(), &doc, &parts)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Kernel(c) => cmd_kernel(c),
        Command::Verify { common, reference, budget } => cmd_verify(common, *reference, *budget),
        Command::Identity(a) => cmd_identity(a),
        Command::Export(c) => cmd_export(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::PipeClosed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heatpar: {e}");
            ExitCode::from(e.status())
        }
    }
}

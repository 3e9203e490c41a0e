//! `cylflow` command-line driver.
//!
//! Exit codes: 0 success, 1 failed verification, 2 invalid configuration,
//! 3 numerical failure (divergence, loss of the graph condition, ...).

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod artifacts;
mod commands;
mod config;
mod verify;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use artifacts::OutputDir;
use config::{ConfigError, ConfigFile, Suite};

/// Why a run did not succeed; each maps to one exit code.
#[derive(Debug)]
pub enum Failure {
    Assertion(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn config(field: &str, message: impl std::fmt::Display) -> Self {
        Failure::Config(format!("invalid `{field}`: {message}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Assertion(m) => write!(f, "verification failed: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<cylflow::Error> for Failure {
    fn from(e: cylflow::Error) -> Self {
        use cylflow::Error as E;
        match e {
            E::Shape(_) | E::Domain(_) | E::Precondition(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(format!("{e:#}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cylflow",
    version,
    about = "Rescaled mean curvature flow over a round cylinder: spectra, flows, stable manifold"
)]
struct Cli {
    /// TOML file with one section per subcommand; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving the artifacts and manifest.json.
    #[arg(long, global = true, default_value = "cylflow-out")]
    out: PathBuf,

    /// Worker threads for parallel loops (defaults to every core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalue table of the linearised operator.
    Spectrum(SpectrumArgs),
    /// One frozen solve from a seed, along a given or the static path.
    Simulate(SimulateArgs),
    /// Fixed point of the frozen-path iteration and its report.
    Manifold(ManifoldArgs),
    /// Invariant suites; exits with 1 when a check fails.
    Verify(VerifyArgs),
    /// Surface point clouds of the unrescaled flow.
    Reconstruct(ReconstructArgs),
}

#[derive(Args, Debug, Default)]
struct TruncArgs {
    #[arg(long)]
    naxis: Option<usize>,
    /// Hermite degree per axis.
    #[arg(long)]
    ny: Option<usize>,
    /// Largest angular frequency.
    #[arg(long)]
    m_omega: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    a: Option<f64>,
    #[command(flatten)]
    trunc: TruncArgs,
}

#[derive(Args, Debug)]
struct ManifoldArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[command(flatten)]
    trunc: TruncArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    max_draws: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[command(flatten)]
    trunc: TruncArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    /// Frozen path JSON; the static path when absent.
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    trunc: TruncArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    y_points: Option<usize>,
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

macro_rules! set {
    ($cfg:expr, $args:expr, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v;
        })*
    };
}

macro_rules! set_trunc {
    ($cfg:expr, $args:expr) => {
        set!($cfg, $args.trunc, naxis, ny, m_omega)
    };
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::config("jobs", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config("jobs", e))?;
    }
    match cli.command {
        Command::Spectrum(args) => {
            let mut cfg = file.spectrum;
            set!(cfg, args, a);
            set_trunc!(cfg, args);
            cfg.validate()?;
            let mut out = OutputDir::create(&cli.out, "spectrum")?;
            out.write(
                "config.toml",
                config::section_toml("spectrum", &cfg).as_bytes(),
            )?;
            commands::spectrum(&cfg, &mut out)?;
            out.finish()?;
        }
        Command::Simulate(args) => {
            let mut cfg = file.simulate;
            set!(cfg, args, delta, seed, dt, tau_max, snapshot_every);
            set_trunc!(cfg, args);
            if args.a0.is_some() {
                cfg.a0 = args.a0;
            }
            if args.path.is_some() {
                cfg.path = args.path;
            }
            cfg.validate()?;
            let mut out = OutputDir::create(&cli.out, "simulate")?;
            out.write(
                "config.toml",
                config::section_toml("simulate", &cfg).as_bytes(),
            )?;
            commands::simulate(&cfg, &mut out)?;
            out.finish()?;
        }
        Command::Manifold(args) => {
            let mut cfg = file.manifold;
            set!(cfg, args, delta, seed, tol, max_iter, dt, tau_max, c0, max_draws);
            set_trunc!(cfg, args);
            if args.a0.is_some() {
                cfg.a0 = args.a0;
            }
            cfg.validate()?;
            let mut out = OutputDir::create(&cli.out, "manifold")?;
            out.write(
                "config.toml",
                config::section_toml("manifold", &cfg).as_bytes(),
            )?;
            commands::manifold(&cfg, &mut out)?;
            out.finish()?;
        }
        Command::Verify(args) => {
            let mut cfg = file.verify;
            set!(cfg, args, suite, delta, seed, samples, amplitude);
            set_trunc!(cfg, args);
            if args.path.is_some() {
                cfg.path = args.path;
            }
            cfg.validate()?;
            let mut out = OutputDir::create(&cli.out, "verify")?;
            out.write(
                "config.toml",
                config::section_toml("verify", &cfg).as_bytes(),
            )?;
            let result = verify::run(&cfg, &mut out);
            out.finish()?;
            result?;
        }
        Command::Reconstruct(args) => {
            let mut cfg = file.reconstruct;
            set!(
                cfg,
                args,
                path,
                t_final,
                times,
                y_max,
                y_points,
                theta_points,
                steps
            );
            cfg.validate()?;
            let mut out = OutputDir::create(&cli.out, "reconstruct")?;
            out.write(
                "config.toml",
                config::section_toml("reconstruct", &cfg).as_bytes(),
            )?;
            commands::reconstruct(&cfg, &mut out)?;
            out.finish()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cylflow: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

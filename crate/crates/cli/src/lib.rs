//! Command-line front end for `adiascope`.
//!
//! Every command reads a JSON [`config::RunConfig`], runs the core library
//! and writes plain text: CSV tables with a provenance comment line, or a
//! short report on stdout.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod format;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use adiascope::{
    adiabaticity_report, cp_scenario, drive_scenario, modulation_trace, run_point, solve_gamma,
    sweep_cp, sweep_drive, DriveKind, Error, Scenario, DEFAULT_SEED,
};

use config::{RunConfig, ScenarioConfig};

/// Failure of a command, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Numerical(Error::InvalidInput(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "adiascope", version, about = "Decompose driven quantum evolutions and measure adiabaticity")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ADIASCOPE_JOBS", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose one evolution and report every factor.
    Decompose(RunArgs),
    /// Error versus pulse count for CP sequences.
    SweepCp(RunArgs),
    /// Error versus N' for the continuous drives.
    SweepDrive(RunArgs),
    /// Solve for the modulation-cancelling drive amplitude.
    GammaSolve {
        /// Root tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Sample the modulation function between two levels.
    Modulation {
        #[command(flatten)]
        run: RunArgs,
        /// Level labels `k,l`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0usize, 1])]
        labels: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; overrides the config. Tables go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reconstruction tolerance for the decomposition.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// A loaded configuration with the hash of its bytes.
struct Loaded {
    config: RunConfig,
    hash: String,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = RunConfig::parse(text)?;
    Ok(Loaded {
        config,
        hash: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Runs a parsed command line, writing reports to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            builder = builder.num_threads(j as usize);
        }
        builder.build().map_err(|e| CliError::Usage(e.to_string()))?
    };
    let mut buffer = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buffer));
    stdout.write_all(&buffer)?;
    result
}

fn dispatch(command: Command, stdout: &mut Vec<u8>) -> Result<(), CliError> {
    match command {
        Command::Decompose(args) => decompose(&args, stdout),
        Command::SweepCp(args) => sweep(&args, stdout, Sweep::Cp),
        Command::SweepDrive(args) => sweep(&args, stdout, Sweep::Drive),
        Command::GammaSolve { tol } => {
            let s = solve_gamma(tol)?;
            writeln!(stdout, "gamma={}", format::format_g(s.gamma, 17))?;
            writeln!(stdout, "objective={}", format::format_g(s.objective, 6))?;
            Ok(())
        }
        Command::Modulation { run, labels } => modulation(&run, (labels[0], labels[1]), stdout),
    }
}

fn check_tol(args: &RunArgs) -> Result<(), CliError> {
    match args.tol {
        Some(t) if !(t > 0.0) || !t.is_finite() => Err(CliError::Usage(format!("--tol {t} must be positive"))),
        _ => Ok(()),
    }
}

fn single_scenario(config: &RunConfig) -> Result<(Scenario, String), CliError> {
    match &config.scenario {
        ScenarioConfig::Cp(c) => Ok((
            cp_scenario(&c.scenario())?,
            format!("cp theta={} n={}", format::num(c.theta), c.n),
        )),
        ScenarioConfig::Drive(d) => {
            let s = d.scenario();
            Ok((
                drive_scenario(&s)?,
                format!("{} theta={} nprime={}", s.kind, format::num(d.theta), format::num(d.nprime)),
            ))
        }
        _ => Err(CliError::Config("this command needs a `cp` or `drive` scenario".into())),
    }
}

fn output_path(args: &RunArgs, config: &RunConfig) -> Option<PathBuf> {
    args.out.clone().or_else(|| config.output.as_ref().map(PathBuf::from))
}

/// Writes `text` to the output file, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn decompose(args: &RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_tol(args)?;
    let loaded = load(&args.config)?;
    let config = &loaded.config;
    let (scenario, label) = single_scenario(config)?;
    let settings = config.run_settings(args.seed, args.tol);
    let (decomp, _) = run_point(&scenario, &settings)?;
    let report = adiabaticity_report(&decomp, &settings.quadrature)?;
    let seed = settings.quadrature.seed();

    let list = |v: &[f64]| v.iter().map(|x| format::num(*x)).collect::<Vec<_>>().join(" ");
    writeln!(stdout, "scenario: {label}")?;
    writeln!(stdout, "delta_u_err: {}", format::num(report.delta_u_err.value))?;
    if report.delta_u_err.standard_error > 0.0 {
        writeln!(stdout, "standard_error: {}", format::num(report.delta_u_err.standard_error))?;
    }
    writeln!(stdout, "err_distance: {}", format::num(report.err_distance))?;
    writeln!(stdout, "reconstruction_residual: {}", format::num(report.reconstruction_residual))?;
    if let Some(c) = report.cross_difference {
        writeln!(stdout, "cross_difference: {}", format::num(c))?;
    }
    writeln!(stdout, "dynamic_phases: {}", list(&report.dynamic_phases))?;
    writeln!(stdout, "geometric_phases: {}", list(&report.geometric_phases))?;
    writeln!(stdout, "transport_phases: {}", list(&report.transport_phases))?;

    if let Some(path) = output_path(args, config) {
        let dim = decomp.u_total.dim();
        let mut text = format::header_line(&loaded.hash, seed);
        text.push_str(&format!("# delta_u_err={}\n", format::num(report.delta_u_err.value)));
        text.push_str(&format!("# reconstruction_residual={}\n", format::num(report.reconstruction_residual)));
        if let Some(c) = report.cross_difference {
            text.push_str(&format!("# cross_difference={}\n", format::num(c)));
        }
        text.push_str(&format::matrix_columns(dim));
        text.push('\n');
        let mut factors = vec![
            ("u_total", &decomp.u_total),
            ("u_dyn", &decomp.u_dyn),
            ("u_g1", &decomp.u_g1),
            ("u_g2", &decomp.u_g2),
            ("u_geo", &decomp.u_geo),
            ("u_err", &decomp.u_err),
        ];
        if let Some(d) = &decomp.u_err_direct {
            factors.push(("u_err_direct", d));
        }
        for (name, u) in factors {
            text.push_str(&format::matrix_row(name, u.matrix()));
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    Ok(())
}

enum Sweep {
    Cp,
    Drive,
}

fn sweep(args: &RunArgs, stdout: &mut dyn Write, which: Sweep) -> Result<(), CliError> {
    check_tol(args)?;
    let loaded = load(&args.config)?;
    let config = &loaded.config;
    let settings = config.run_settings(args.seed, args.tol);
    let result = match (&config.scenario, which) {
        (ScenarioConfig::CpSweep(c), Sweep::Cp) => {
            let ns: Vec<usize> = (c.n_min..=c.n_max).collect();
            sweep_cp(c.theta, c.phi_0, c.phi_t, &ns, c.rotation.into(), &settings)?
        }
        (ScenarioConfig::DriveSweep(d), Sweep::Drive) => {
            let kinds: Vec<DriveKind> = d.drives.iter().map(|&k| k.into()).collect();
            sweep_drive(&kinds, &d.nprimes(), d.t_total, d.omega, d.theta, d.gamma, &settings)?
        }
        (_, Sweep::Cp) => return Err(CliError::Config("sweep-cp needs a `cp_sweep` scenario".into())),
        (_, Sweep::Drive) => return Err(CliError::Config("sweep-drive needs a `drive_sweep` scenario".into())),
    };
    let text = format::sweep_csv(&result, &loaded.hash);
    emit(output_path(args, config).as_deref(), &text, stdout)
}

fn modulation(args: &RunArgs, labels: (usize, usize), stdout: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load(&args.config)?;
    let config = &loaded.config;
    let (scenario, _) = single_scenario(config)?;
    let trace = modulation_trace(&scenario, labels, config.samples)?;
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let text = format::modulation_csv(&trace, &loaded.hash, seed);
    emit(output_path(args, config).as_deref(), &text, stdout)
}

//! `beamflat`: exact sequence tables, parametrization builds, feedforward
//! planning and beam simulation from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 computation failure, 3 I/O.

mod commands;
mod config;
mod error;
mod files;
mod pipeline;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use beamflat::exactseq::parse_rational;
use beamflat::feedforward::SummationMode;
use clap::{Args, Parser, Subcommand};

use commands::{NumberFormat, PlanParams, SimParams, TableSource, Which};
use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "beamflat",
    version,
    about = "Flatness-based motion planning for a flexible beam"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print an exact sequence table as CSV.
    Sequences {
        #[arg(long, value_enum)]
        which: Which,
        /// Highest index.
        #[arg(long = "K")]
        k: usize,
        #[arg(long, value_enum, default_value = "exact")]
        format: NumberFormat,
        /// Significant digits for `--format decimal`.
        #[arg(long, default_value_t = 17)]
        digits: usize,
    },
    /// Build and verify a coefficient table.
    Build(BuildArgs),
    /// Evaluate the feedforward input on a time grid.
    Plan(PlanArgs),
    /// Simulate the beam driven by a plan.
    Simulate(SimulateArgs),
    /// Run sequences, build, plan and simulate from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["flat", "bending", "file"])))]
struct BuildArgs {
    /// Flat parametrization with this `c00` (`p/q`, integer or decimal).
    #[arg(long, allow_hyphen_values = true)]
    flat: Option<String>,
    /// Bending-moment parametrization.
    #[arg(long)]
    bending: bool,
    /// JSON array of `c_k0` values.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Table order (default 40, or the file length).
    #[arg(long = "K")]
    k: Option<usize>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Table JSON written by `build`.
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    sigma: f64,
    /// Transition time.
    #[arg(long = "T", allow_hyphen_values = true)]
    duration: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y_start: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    y_end: f64,
    /// tail_epsilon, least_term or fixed_K (default: least_term for the
    /// bending-moment table, tail_epsilon otherwise).
    #[arg(long)]
    mode: Option<SummationMode>,
    /// Highest series index (default min(40, table order)).
    #[arg(long = "K-max")]
    k_max: Option<usize>,
    #[arg(long, default_value_t = beamflat::feedforward::DEFAULT_EPS_TAIL)]
    eps_tail: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Extend the grid past `T` up to this time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Working precision in decimal digits (default 512 bits).
    #[arg(long)]
    precision_digits: Option<u32>,
    #[arg(long, default_value_t = 17)]
    digits: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `plan.csv` written by `plan` (or any `t,u` CSV).
    #[arg(long)]
    plan: PathBuf,
    /// Number of grid intervals.
    #[arg(long = "N", default_value_t = beamflat::beamsim::DEFAULT_INTERVALS)]
    n: usize,
    /// Time step (default 1e-3 T).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 17)]
    digits: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override a config entry, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c00: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long = "T", allow_hyphen_values = true)]
    duration: Option<String>,
    #[arg(long)]
    precision_digits: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    dt: Option<String>,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sequences {
            which,
            k,
            format,
            digits,
        } => {
            let csv = commands::sequences_csv(which, k, format, digits);
            print_stdout(&csv)
        }
        Command::Build(args) => {
            let source = if let Some(c00) = &args.flat {
                TableSource::Flat(parse_rational(c00)?)
            } else if args.bending {
                TableSource::Bending
            } else {
                TableSource::File(args.file.clone().expect("clap enforces a source"))
            };
            let (table, report) = commands::build_and_verify(&source, args.k)?;
            let mut json = table.to_json_string();
            json.push('\n');
            match &args.out {
                Some(path) => files::write(path, &json)?,
                None => print_stdout(&json)?,
            }
            eprintln!("{}", report.summary());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Compute(report.summary()))
            }
        }
        Command::Plan(args) => {
            let table =
                beamflat::paramgen::CoefficientTable::from_json_str(&files::read(&args.table)?)?;
            let params = PlanParams {
                sigma: args.sigma,
                duration: args.duration,
                y_start: args.y_start,
                y_end: args.y_end,
                mode: args.mode,
                k_max: args.k_max,
                eps_tail: args.eps_tail,
                dt: args.dt,
                t_end: args.t_end,
                precision_digits: args.precision_digits,
                digits: args.digits,
            };
            let meta = commands::run_plan(&table, &params, &args.out)?;
            eprintln!(
                "wrote {} samples ({} summation, K_max = {}) to {}",
                meta.samples,
                meta.mode,
                meta.k_max,
                args.out.display()
            );
            Ok(())
        }
        Command::Simulate(args) => {
            let params = SimParams {
                intervals: args.n,
                dt: args.dt,
                digits: args.digits,
            };
            let report = commands::run_simulate(&args.plan, &params, &args.out)?;
            eprintln!(
                "final profile error {:.3e}, moment tracking error {:.3e}",
                report.metrics.final_profile_error_inf, report.metrics.moment_tracking_error_inf
            );
            Ok(())
        }
        Command::Pipeline(args) => {
            let mut cfg = RunConfig::from_file(&args.config)?;
            for pair in &args.overrides {
                cfg.set_pair(pair)?;
            }
            for (key, value) in [
                ("K", &args.k),
                ("c00", &args.c00),
                ("sigma", &args.sigma),
                ("T", &args.duration),
                ("precision_digits", &args.precision_digits),
                ("N", &args.n),
                ("dt", &args.dt),
            ] {
                if let Some(v) = value {
                    cfg.set(key, v)?;
                }
            }
            let summary = pipeline::run_pipeline(&cfg, &args.out)?;
            eprintln!(
                "T = {}: tracking error {:.3e}; T = {}: tracking error {:.3e}",
                summary.primary.duration,
                summary.primary.moment_tracking_error_inf,
                summary.compare.duration,
                summary.compare.moment_tracking_error_inf
            );
            Ok(())
        }
    }
}

fn print_stdout(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

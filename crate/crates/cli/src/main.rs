//! `gibbs-gps`: calibrate Gibbs posterior scales and reproduce the bundled
//! coverage studies from the command line.
//!
//! Exit codes: 0 on success (calibration converged / study complete),
//! 2 when calibration stopped at the iteration cap, 1 for usage or data
//! errors.

use std::fs::File;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gibbs_gps_core::{
    experiments, fixed_omega_study, gps_calibrate, run_coverage_study, CoverageMode, Dataset,
    GpsConfig, LossModel, Prior, ScenarioKind, ScenarioSpec,
};

#[derive(Parser)]
#[command(name = "gibbs-gps", version, about = "Gibbs posterior scaling (GPS) calibration and coverage studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the scale omega on a CSV dataset and print the SA trace.
    Calibrate(CalibrateArgs),
    /// Monte Carlo coverage study with per-replication GPS calibration.
    Study(StudyArgs),
    /// Coverage study at a fixed scale omega (no calibration).
    Fixed(FixedArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    /// Quantile-regression check loss.
    Check,
    /// Scalar squared error.
    Squared,
    /// Linear-classifier misclassification loss (expects ±1 labels).
    Misclassification,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Flat,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    NormalMean,
    Classification,
    Quantreg,
}

#[derive(Args)]
struct GpsArgs {
    /// Nominal miscoverage; intervals target 100(1-alpha)%.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap resamples.
    #[arg(short = 'B', long = "B", default_value_t = 100)]
    bootstrap: usize,
    /// Retained posterior draws per chain.
    #[arg(short = 'M', long = "M", default_value_t = 2000)]
    draws: usize,
    #[arg(long, default_value_t = 1.0)]
    omega_init: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Coverage event: per-coordinate-average, all-coordinates, or
    /// coordinate:<k>.
    #[arg(long, default_value = "per-coordinate-average", value_parser = parse_coverage_mode)]
    coverage_mode: CoverageMode,
    /// Re-enter chains with reduced burn-in as omega is updated.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GpsArgs {
    fn to_config(&self) -> GpsConfig {
        GpsConfig {
            alpha: self.alpha,
            bootstrap_samples: self.bootstrap,
            posterior_draws: self.draws,
            omega_init: self.omega_init,
            eps_tol: self.eps_tol,
            max_iter: self.max_iter,
            coverage_mode: self.coverage_mode,
            warm_start: self.warm_start,
            seed: self.seed,
            ..GpsConfig::default()
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// CSV dataset with header `x1..xp,y`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Quantile level for the check loss.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Distinguished covariate index for the misclassification loss.
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, value_enum, default_value_t = PriorArg::Flat)]
    prior: PriorArg,
    /// Standard deviation of the isotropic Gaussian prior.
    #[arg(long, default_value_t = 10.0)]
    prior_sd: f64,
    /// Write the SA trace CSV here instead of stdout.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    gps: GpsArgs,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    reps: usize,
    /// Normal-mean data standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Quantile level of the quantreg scenario.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 2.0)]
    theta0: f64,
    #[arg(long, default_value_t = 1.0)]
    theta1: f64,
    /// Error standard deviation of the quantreg scenario.
    #[arg(long, default_value_t = 2.0)]
    error_sd: f64,
    /// Label-noise standard deviation of the classification scenario.
    #[arg(long, default_value_t = 0.5)]
    noise_sd: f64,
    /// Report CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Calibrated omega CSV destination.
    #[arg(long)]
    omega_out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn to_spec(&self, seed: u64) -> ScenarioSpec {
        let kind = match self.scenario {
            ScenarioArg::NormalMean => ScenarioKind::NormalMean { sigma: self.sigma },
            ScenarioArg::Classification => {
                let mut kind = ScenarioKind::classification();
                if let ScenarioKind::Classification { noise_sd, .. } = &mut kind {
                    *noise_sd = self.noise_sd;
                }
                kind
            }
            ScenarioArg::Quantreg => ScenarioKind::Quantreg {
                tau: self.tau,
                theta0: self.theta0,
                theta1: self.theta1,
                error_sd: self.error_sd,
            },
        };
        ScenarioSpec::new(kind, self.n, seed)
    }
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    gps: GpsArgs,
}

#[derive(Args)]
struct FixedArgs {
    #[arg(long)]
    omega: f64,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_coverage_mode(value: &str) -> Result<CoverageMode, String> {
    match value {
        "per-coordinate-average" => Ok(CoverageMode::PerCoordinateAverage),
        "all-coordinates" => Ok(CoverageMode::AllCoordinates),
        other => match other.strip_prefix("coordinate:") {
            Some(k) => k
                .parse::<usize>()
                .map(CoverageMode::Coordinate)
                .map_err(|_| format!("bad coordinate index in {other:?}")),
            None => Err(format!(
                "unknown coverage mode {value:?} (want per-coordinate-average, all-coordinates, or coordinate:<k>)"
            )),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> gibbs_gps_core::Result<ExitCode> {
    match cli.command {
        Command::Calibrate(args) => calibrate(args),
        Command::Study(args) => study(args),
        Command::Fixed(args) => fixed(args),
    }
}

fn calibrate(args: CalibrateArgs) -> gibbs_gps_core::Result<ExitCode> {
    let labels = matches!(args.loss, LossArg::Misclassification);
    let file = File::open(&args.data)?;
    let data = Dataset::read_csv(file, labels)?;
    let loss = match args.loss {
        LossArg::Check => LossModel::check(args.tau, data.covariate_dim())?,
        LossArg::Squared => LossModel::squared_error(),
        LossArg::Misclassification => LossModel::misclassification(args.j, data.covariate_dim())?,
    };
    let prior = match args.prior {
        PriorArg::Flat => Prior::flat(),
        PriorArg::Gaussian => Prior::isotropic_gaussian(loss.param_dim(), args.prior_sd)?,
    };
    let cfg = args.gps.to_config();
    let result = gps_calibrate(&data, &loss, &prior, &cfg)?;

    println!(
        "omega_n = {} ({} after {} iterations)",
        result.omega_n,
        if result.converged { "converged" } else { "max_iter reached" },
        result.iterations
    );
    match &args.trace_out {
        Some(path) => result.write_trace_csv(File::create(path)?)?,
        None => result.write_trace_csv(io::stdout().lock())?,
    }
    Ok(ExitCode::from(if result.converged { 0 } else { 2 }))
}

fn study(args: StudyArgs) -> gibbs_gps_core::Result<ExitCode> {
    let spec = args.scenario.to_spec(args.gps.seed);
    let cfg = args.gps.to_config();
    let report = run_coverage_study(&spec, &cfg, args.scenario.reps)?;
    write_report(&args.scenario, &spec, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn fixed(args: FixedArgs) -> gibbs_gps_core::Result<ExitCode> {
    let spec = args.scenario.to_spec(args.seed);
    let report = fixed_omega_study(&spec, args.omega, args.scenario.reps)?;
    write_report(&args.scenario, &spec, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn write_report(
    args: &ScenarioArgs,
    spec: &ScenarioSpec,
    report: &gibbs_gps_core::StudyReport,
) -> gibbs_gps_core::Result<()> {
    match &args.out {
        Some(path) => experiments::write_study_csv(File::create(path)?, spec, report)?,
        None => experiments::write_study_csv(io::stdout().lock(), spec, report)?,
    }
    if let Some(path) = &args.omega_out {
        experiments::write_omega_csv(File::create(path)?, &report.omega_samples)?;
    }
    Ok(())
}

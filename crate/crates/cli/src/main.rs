mod clouds;
mod commands;
mod data;
mod error;
mod grid;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use triplex::{EstimatorKind, Family};

use crate::commands::{CloudSource, EstimateConfig, JointConfig, Marginal, OtMethod, SimFamily, SimulateConfig};
use crate::data::DataFile;
use crate::error::{CliError, CliResult};
use crate::grid::Grid;
use crate::output::{emit, Format};

#[derive(Parser)]
#[command(name = "triplex", version, about = "Triple-changes treatment effect estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SlackArgs {
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args)]
struct JointArgs {
    /// Grid for the untreated outcome `y0`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Grid>,
    /// Grid for the treated outcome `y1`; defaults to `--grid`.
    #[arg(long, allow_hyphen_values = true)]
    grid1: Option<Grid>,
    #[arg(long, value_enum, default_value_t = Marginal::Point)]
    marginal: Marginal,
}

#[derive(Subcommand)]
enum Command {
    /// Average treatment effect on the treated, with bootstrap interval.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        /// One of did, ddd, cic-emp, cic-mle, ccc-emp, ccc-mle.
        #[arg(long, default_value = "ccc-emp")]
        estimator: String,
        #[arg(long)]
        family: Option<Family>,
        /// Bootstrap replicates; 0 skips the interval.
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.90)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report the joint counterfactual CDF instead (needs ids).
        #[arg(long)]
        joint: bool,
        #[command(flatten)]
        joint_args: JointArgs,
        #[command(flatten)]
        slack: SlackArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bounds on the counterfactual CDF under relaxed assumptions.
    Bounds {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        slack: SlackArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Grid,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Joint CDF of untreated and treated outcomes for a followed panel.
    Joint {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        joint_args: JointArgs,
        #[command(flatten)]
        slack: SlackArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Plug-in asymptotic variance of the empirical estimator.
    Variance {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Relative-bias study on synthetic designs.
    Simulate {
        /// Comma-separated designs: linear, nonlinear, exponential.
        #[arg(long, default_value = "linear")]
        spec: String,
        #[arg(long, default_value = "did,ddd,ccc-emp,ccc-mle")]
        estimators: String,
        /// gaussian, exponential, loglinear, or native for the design's own families.
        #[arg(long, default_value = "native")]
        family: SimFamily,
        #[arg(long, default_value = "1000,4000")]
        n_grid: String,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Counterfactual point cloud by optimal transport.
    Ot {
        /// Directory with one file per cell, named like `s0d1t0.csv`.
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        cloud_dir: Option<PathBuf>,
        /// Use the cells of a data file as one-dimensional clouds.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OtMethod::Exact)]
        method: OtMethod,
        /// Entropic regularization; defaults to a scale-aware value.
        #[arg(long)]
        reg: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("TRIPLEX_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("TRIPLEX_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot size thread pool: {e}")))
}

fn joint_config(args: JointArgs, slack: &SlackArgs) -> CliResult<JointConfig> {
    let grid0 = args
        .grid
        .ok_or_else(|| CliError::input("--grid is required for the joint CDF"))?;
    Ok(JointConfig {
        grid1: args.grid1.unwrap_or(grid0),
        grid0,
        marginal: args.marginal,
        eps: slack.eps,
        delta: slack.delta,
    })
}

fn write(text: String, output: &OutputArgs) -> CliResult<()> {
    emit(&text, output.out.as_deref())
}

fn format_or(output: &OutputArgs, default: Format) -> Format {
    output.format.unwrap_or(default)
}

fn run_joint(data: &Path, args: JointArgs, slack: &SlackArgs, output: &OutputArgs) -> CliResult<()> {
    let file = DataFile::open(data)?;
    let report = commands::joint_report(&file, &joint_config(args, slack)?)?;
    write(commands::render_joint(&report, format_or(output, Format::Json)), output)
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Estimate {
            data,
            estimator,
            family,
            bootstrap,
            level,
            seed,
            joint,
            joint_args,
            slack,
            output,
        } => {
            if joint {
                return run_joint(&data, joint_args, &slack, &output);
            }
            let estimator = EstimatorKind::parse(&estimator, family).map_err(|e| CliError::input(e.to_string()))?;
            let file = DataFile::open(&data)?;
            let config = EstimateConfig {
                estimator,
                bootstrap,
                level,
                seed,
            };
            let report = commands::estimate_report(&file, &config)?;
            for note in &report.notes {
                eprintln!("warning: {note}");
            }
            write(
                commands::render_estimate(&report, format_or(&output, Format::Json)),
                &output,
            )
        }
        Command::Bounds {
            data,
            slack,
            grid,
            output,
        } => {
            let file = DataFile::open(&data)?;
            let report = commands::bounds_report(&file, slack.eps, slack.delta, &grid)?;
            write(
                commands::render_bounds(&report, format_or(&output, Format::Json)),
                &output,
            )
        }
        Command::Joint {
            data,
            joint_args,
            slack,
            output,
        } => run_joint(&data, joint_args, &slack, &output),
        Command::Variance { data, output } => {
            let file = DataFile::open(&data)?;
            let report = commands::variance_report(&file)?;
            write(
                commands::render_variance(&report, format_or(&output, Format::Json)),
                &output,
            )
        }
        Command::Simulate {
            spec,
            estimators,
            family,
            n_grid,
            reps,
            seed,
            output,
        } => {
            let config = SimulateConfig {
                specs: &spec,
                estimators: &estimators,
                family,
                n_grid: &n_grid,
                reps,
                seed,
            };
            let report = commands::simulate_report(&config)?;
            write(
                commands::render_simulate(&report, format_or(&output, Format::Csv)),
                &output,
            )
        }
        Command::Ot {
            cloud_dir,
            data,
            method,
            reg,
            output,
        } => {
            let file;
            let source = match (&cloud_dir, &data) {
                (Some(dir), _) => CloudSource::Dir(dir),
                (None, Some(path)) => {
                    file = DataFile::open(path)?;
                    CloudSource::Data(&file)
                }
                (None, None) => return Err(CliError::input("one of --cloud-dir or --data is required")),
            };
            let cloud = commands::ot_cloud(source, method, reg)?;
            write(
                commands::render_cloud(&cloud, method, format_or(&output, Format::Csv)),
                &output,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

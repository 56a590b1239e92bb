//! `dibgeo`: geometric clustering with the deterministic information
//! bottleneck from the command line.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, DibMode, FileConfig, RunConfig};
use error::CliError;

const DEFAULT_S_LIST: [f64; 3] = [0.5, 2.0, 4.0];
const DEFAULT_RESOLUTION: usize = 400;
const BOUNDARY_BINS: usize = 64;

#[derive(Parser, Debug)]
#[command(name = "dibgeo", version, about = "Geometric clustering with the deterministic information bottleneck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a preset dataset as point CSV.
    Generate {
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for points.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the smoothed joint p(x|i) as CSV and a heat map.
    SmoothDump {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve DIB at a single beta; writes assignments and a scatter plot.
    Cluster {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Beta sweep, information curve, kink angles and model selection.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset whose largest multi-cluster kink angle sets the bar for a
        /// robust solution; "none" disables the comparison.
        #[arg(long)]
        reference: Option<String>,
    },
    /// k-means, GMM and DIB decision boundaries for two clusters.
    Boundaries {
        #[command(flatten)]
        common: CommonArgs,
        /// Smoothing scales for the DIB curves.
        #[arg(long, value_delimiter = ',')]
        s_list: Option<Vec<f64>>,
        /// Lattice nodes per axis.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, value_enum)]
        dib_mode: Option<DibMode>,
        /// Tradeoff used to assign lattice points.
        #[arg(long)]
        classify_beta: Option<f64>,
        /// Tradeoff used to train the tabulated clusters.
        #[arg(long)]
        train_beta: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { preset, seed, out } => commands::generate(&preset, seed, out.as_deref()),
        Command::SmoothDump { common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            commands::smooth_dump(&RunConfig::resolve(&common, &file)?)
        }
        Command::Cluster { common, beta } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let cfg = RunConfig::resolve(&common, &file)?;
            let beta = beta.or(file.beta).ok_or_else(|| CliError::Usage("--beta is required".into()))?;
            commands::cluster(&cfg, beta)
        }
        Command::Sweep { common, reference } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let cfg = RunConfig::resolve(&common, &file)?;
            let reference = reference.or(file.reference).unwrap_or_else(|| "three_equal".into());
            commands::sweep(&cfg, (reference != "none").then_some(reference.as_str()))
        }
        Command::Boundaries {
            mut common,
            s_list,
            resolution,
            dib_mode,
            classify_beta,
            train_beta,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            if common.bins.is_none() && file.bins.is_none() {
                common.bins = Some(BOUNDARY_BINS);
            }
            let cfg = RunConfig::resolve(&common, &file)?;
            let opts = commands::BoundaryOptions {
                s_list: s_list.or(file.s_list).unwrap_or_else(|| DEFAULT_S_LIST.to_vec()),
                resolution: resolution.or(file.resolution).unwrap_or(DEFAULT_RESOLUTION),
                mode: dib_mode.or(file.dib_mode).unwrap_or(DibMode::Trained),
                classify_beta: classify_beta.or(file.classify_beta).unwrap_or(1.0),
                train_beta: train_beta.or(file.train_beta).unwrap_or(5.0),
            };
            commands::boundaries(&cfg, &opts)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

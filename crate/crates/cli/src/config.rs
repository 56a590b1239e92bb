//! Run configuration: flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dibgeo_core::selection::{default_init_clusters, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_BETA_STEPS, DEFAULT_RESTARTS};
use dibgeo_core::{geometric_schedule, load_points, preset_dataset, PointSet, Preset, SolverOptions, SweepConfig};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_S: f64 = 2.0;
pub const DEFAULT_BINS: usize = 32;
pub const DEFAULT_OUT: &str = "dibgeo-out";
/// Fraction of solves allowed to hit `max_iter` before exit code 3.
pub const DEFAULT_MAX_NONCONVERGED: f64 = 0.1;

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Preset name or path to a point CSV.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Smoothing scale.
    #[arg(long)]
    pub s: Option<f64>,
    /// Grid bins per dimension.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub beta_steps: Option<usize>,
    /// Random restarts per beta.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Initial cluster count for each restart.
    #[arg(long)]
    pub init_clusters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iteration cap for each solve.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Largest tolerated fraction of non-converged solves.
    #[arg(long)]
    pub max_nonconverged: Option<f64>,
    /// JSON file with any of the above keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a `--config` file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<String>,
    pub s: Option<f64>,
    pub bins: Option<usize>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub beta_steps: Option<usize>,
    pub restarts: Option<usize>,
    pub init_clusters: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_iter: Option<usize>,
    pub max_nonconverged: Option<f64>,
    pub beta: Option<f64>,
    pub s_list: Option<Vec<f64>>,
    pub resolution: Option<usize>,
    pub dib_mode: Option<DibMode>,
    pub reference: Option<String>,
    pub classify_beta: Option<f64>,
    pub train_beta: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DibMode {
    /// Tabulated clusters trained on the smoothed data.
    Trained,
    /// Closed-form score against the fitted mixture components.
    Scores,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: String,
    pub s: f64,
    pub bins: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_steps: usize,
    pub restarts: usize,
    pub init_clusters: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub solver: SolverOptions,
    pub max_nonconverged: f64,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be at least 1")))
    }
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> Result<Self, CliError> {
        let dataset = args
            .dataset
            .clone()
            .or_else(|| file.dataset.clone())
            .ok_or_else(|| CliError::Usage(format!("--dataset is required (preset: {})", Preset::valid_names())))?;
        let beta_min = positive("beta-min", args.beta_min.or(file.beta_min).unwrap_or(DEFAULT_BETA_MIN))?;
        let beta_max = positive("beta-max", args.beta_max.or(file.beta_max).unwrap_or(DEFAULT_BETA_MAX))?;
        if beta_max < beta_min {
            return Err(CliError::Usage(format!("--beta-max {beta_max} is below --beta-min {beta_min}")));
        }
        let max_nonconverged = args
            .max_nonconverged
            .or(file.max_nonconverged)
            .unwrap_or(DEFAULT_MAX_NONCONVERGED);
        if !(0.0..=1.0).contains(&max_nonconverged) {
            return Err(CliError::Usage("--max-nonconverged must lie in [0, 1]".into()));
        }
        Ok(RunConfig {
            dataset,
            s: positive("s", args.s.or(file.s).unwrap_or(DEFAULT_S))?,
            bins: at_least_one("bins", args.bins.or(file.bins).unwrap_or(DEFAULT_BINS))?,
            beta_min,
            beta_max,
            beta_steps: at_least_one("beta-steps", args.beta_steps.or(file.beta_steps).unwrap_or(DEFAULT_BETA_STEPS))?,
            restarts: at_least_one("restarts", args.restarts.or(file.restarts).unwrap_or(DEFAULT_RESTARTS))?,
            init_clusters: args
                .init_clusters
                .or(file.init_clusters)
                .map(|v| at_least_one("init-clusters", v))
                .transpose()?,
            seed: args.seed.or(file.seed).unwrap_or(0),
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into()),
            solver: SolverOptions {
                max_iter: at_least_one("max-iter", args.max_iter.or(file.max_iter).unwrap_or(SolverOptions::default().max_iter))?,
                ..SolverOptions::default()
            },
            max_nonconverged,
        })
    }

    /// Preset at this seed, or a CSV file.
    pub fn load_dataset(&self) -> Result<PointSet, CliError> {
        load_dataset(&self.dataset, self.seed)
    }

    /// Defaults to `min(N, 2 x expected, 16)`; `expected` is the label count
    /// when the data carries labels and 8 otherwise.
    pub fn init_clusters_for(&self, points: &PointSet) -> usize {
        let chosen = self
            .init_clusters
            .unwrap_or_else(|| default_init_clusters(points.len(), points.n_labels().unwrap_or(8)));
        chosen.min(points.len())
    }

    pub fn sweep_config(&self, points: &PointSet) -> Result<SweepConfig, CliError> {
        let mut config = SweepConfig::new(self.init_clusters_for(points), self.seed);
        config.schedule = geometric_schedule(self.beta_min, self.beta_max, self.beta_steps)?;
        config.restarts = self.restarts;
        config.solver = self.solver;
        Ok(config)
    }

    pub fn create_out(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

pub fn load_dataset(name: &str, seed: u64) -> Result<PointSet, CliError> {
    if let Ok(preset) = name.parse::<Preset>() {
        return Ok(preset_dataset(preset, seed));
    }
    let path = Path::new(name);
    if path.exists() {
        return Ok(load_points(path)?);
    }
    Err(CliError::Usage(format!(
        "{name:?} is neither a preset nor an existing file; valid presets: {}",
        Preset::valid_names()
    )))
}

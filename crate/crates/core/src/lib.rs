//! Geometric clustering with the deterministic information bottleneck.
//!
//! Points are smoothed into a joint distribution over data indices and grid
//! cells ([`smoothing`]), clustered by hard DIB iteration with merge passes
//! ([`dib`]) across a sweep of tradeoff parameters, and the number of
//! clusters is read off the kinks of the resulting information curve
//! ([`selection`]). [`baselines`] holds k-means, EM mixtures and the
//! two-Gaussian boundary analysis.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod dib;
pub mod error;
pub mod info;
pub mod selection;
pub mod smoothing;

pub use data::{
    load_points, preset_dataset, sample_mixture, save_points, write_points, GaussianComponent, MixtureSpec,
    PointSet, Preset,
};
pub use dib::{
    dib_cost, dib_solve, dib_solve_from, dib_solve_restarts, dib_step, ib_step, merge_pass, HardClustering,
    MergeOutcome, SoftClustering, Solution, SolutionRecord, SolverOptions, UpdateMode,
};
pub use error::{Error, Result};
pub use info::{entropy, fractional_spatial_info, kl_divergence, mutual_information, DiscreteDistribution};
pub use selection::{
    beta_sweep, beta_sweep_solutions, geometric_schedule, information_curve, kink_angle, select_n_clusters,
    CurvePoint, InformationCurve, Selection, SweepConfig,
};
pub use smoothing::{build_grid, delta_joint, smooth_joint, Grid, JointDistribution};

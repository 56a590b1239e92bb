//! Deterministic information bottleneck on a tabulated joint `p(i, x)`.
//!
//! Each step reassigns every data point to
//! `argmax_c ln q(c) - beta * KL[p(x|i) || q(x|c)]` using the cluster
//! masses and conditionals of the previous step, then recomputes
//! `q(c) = n_c / N` and `q(x|c)` as the plain average of member rows. After
//! the local iteration settles, a merge pass looks for the pair of clusters
//! whose fusion lowers `L = H(T) - beta * I(T;x)` the most; the two phases
//! alternate until neither changes anything.
//!
//! The cost is a coordinate-descent objective for this update (up to a
//! constant it equals `-sum_i p(i) ln q(c_i) + beta * sum_i p(i) KL[...]`),
//! so a step never raises `L`. The solver counts any step that does, and
//! the test suites treat a non-zero count as a failure.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::smoothing::JointDistribution;

/// Allowed growth of `L` across one step before it is counted as a violation.
pub const COST_INCREASE_TOLERANCE: f64 = 1e-9;

/// Hard assignment of data points to clusters, with the induced cluster
/// masses and conditionals. Cluster indices are always contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct HardClustering {
    assignment: Vec<usize>,
    counts: Vec<usize>,
    cluster_mass: Vec<f64>,
    conditional: Array2<f64>,
}

impl HardClustering {
    /// Build from arbitrary labels. Labels are compacted to `0..n_c` keeping
    /// their relative order.
    pub fn from_assignment(joint: &JointDistribution, labels: &[usize]) -> Result<Self> {
        if labels.len() != joint.n_points() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: joint.n_points(),
            });
        }
        let assignment = compact(labels);
        Ok(Self::build(joint, assignment))
    }

    /// Every point alone in its own cluster.
    pub fn identity(joint: &JointDistribution) -> Self {
        Self::build(joint, (0..joint.n_points()).collect())
    }

    /// All points in one cluster.
    pub fn single(joint: &JointDistribution) -> Self {
        Self::build(joint, vec![0; joint.n_points()])
    }

    fn build(joint: &JointDistribution, assignment: Vec<usize>) -> Self {
        let n_c = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let n = assignment.len();
        let mut counts = vec![0usize; n_c];
        let mut conditional = Array2::zeros((n_c, joint.n_cells()));
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            conditional.row_mut(c).scaled_add(1.0, &joint.row(i));
        }
        for (mut row, &k) in conditional.axis_iter_mut(Axis(0)).zip(&counts) {
            row /= k as f64;
        }
        let cluster_mass = counts.iter().map(|&k| k as f64 / n as f64).collect();
        HardClustering {
            assignment,
            counts,
            cluster_mass,
            conditional,
        }
    }

    pub fn n_points(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `q(c)`
    pub fn cluster_mass(&self) -> &[f64] {
        &self.cluster_mass
    }

    /// `q(x|c)`, one row per cluster.
    pub fn cluster_conditional(&self) -> &Array2<f64> {
        &self.conditional
    }

    pub fn members(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == c)
            .map(|(i, _)| i)
    }

    /// `H(T)` in nats.
    pub fn entropy(&self) -> f64 {
        self.cluster_mass.iter().map(|&q| entropy_term(q)).fold(0.0, |a, b| a + b)
    }

    /// `I(T;x)` in nats.
    pub fn info_tx(&self, joint: &JointDistribution) -> f64 {
        let log_px = log_location_marginal(joint);
        (0..self.n_clusters())
            .map(|c| info_term(self.cluster_mass[c], self.conditional.row(c).as_slice().unwrap(), &log_px))
            .sum::<f64>()
            .max(0.0)
    }

    /// Canonical digest of the partition: invariant under relabelling.
    pub fn digest(&self) -> String {
        partition_digest(&self.assignment)
    }
}

fn entropy_term(q: f64) -> f64 {
    if q > 0.0 {
        -q * q.ln()
    } else {
        0.0
    }
}

/// `q(c) * KL[q(x|c) || p(x)]`
fn info_term(mass: f64, cond: &[f64], log_px: &[f64]) -> f64 {
    mass * cond
        .iter()
        .zip(log_px)
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &lp)| q * (q.ln() - lp))
        .sum::<f64>()
}

fn log_location_marginal(joint: &JointDistribution) -> Vec<f64> {
    joint
        .location_marginal()
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// Relabel to `0..k` keeping the order of the original label values.
fn compact(labels: &[usize]) -> Vec<usize> {
    let mut used: Vec<usize> = labels.to_vec();
    used.sort_unstable();
    used.dedup();
    labels
        .iter()
        .map(|l| used.binary_search(l).expect("label present"))
        .collect()
}

/// Relabel by order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

pub fn partition_digest(labels: &[usize]) -> String {
    let mut h = Sha256::new();
    for l in canonical_labels(labels) {
        h.update((l as u64).to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `L = H(T) - beta I(T;x)` for a clustering.
pub fn dib_cost(joint: &JointDistribution, clustering: &HardClustering, beta: f64) -> f64 {
    clustering.entropy() - beta * clustering.info_tx(joint)
}

/// `KL[p(x|i) || cond(x|k)]` for every data point `i` and every row `k` of
/// `cond`, with `+inf` wherever `p(x|i)` has mass outside the row's support.
pub fn divergence_matrix(joint: &JointDistribution, cond: &Array2<f64>) -> Array2<f64> {
    let log_cond = cond.mapv(|v| if v > 0.0 { v.ln() } else { 0.0 });
    let cross = joint.conditional().dot(&log_cond.t());
    let mut kl = cross;
    for ((i, _), v) in kl.indexed_iter_mut() {
        *v = (joint.row_neg_entropy()[i] - *v).max(0.0);
    }
    for (k, row) in cond.axis_iter(Axis(0)).enumerate() {
        let zeros: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= 0.0)
            .map(|(x, _)| x)
            .collect();
        if zeros.is_empty() {
            continue;
        }
        for i in 0..joint.n_points() {
            let p = joint.row_slice(i);
            if zeros.iter().any(|&x| p[x] > 0.0) {
                kl[(i, k)] = f64::INFINITY;
            }
        }
    }
    kl
}

/// `ln w - beta * d` with the conventions that `beta = 0` ignores `d` and an
/// infinite divergence is never chosen.
fn score(log_mass: f64, beta: f64, divergence: f64) -> f64 {
    if beta == 0.0 {
        log_mass
    } else if divergence.is_infinite() {
        f64::NEG_INFINITY
    } else {
        log_mass - beta * divergence
    }
}

/// Index of the largest finite score; lowest index on ties.
fn argmax_finite(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, s) in scores.into_iter().enumerate() {
        if s == f64::NEG_INFINITY || s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

/// Ordering of the assignment update within one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Every point is scored against the previous step's `q(c)` and `q(x|c)`.
    #[default]
    Synchronous,
    /// Cluster statistics are refreshed after each individual reassignment.
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Convergence threshold on `|delta L|`, nats.
    pub tol: f64,
    pub mode: UpdateMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 500,
            tol: 1e-10,
            mode: UpdateMode::Synchronous,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be finite and non-negative, got {beta}")))
    }
}

/// Cell holding most of a row's mass; identifies "same location" for
/// unsmoothed rows.
fn dominant_cell(row: &[f64]) -> usize {
    argmax_finite(row.iter().copied()).unwrap_or(0)
}

/// One synchronous-or-sequential DIB update.
pub fn dib_step(
    joint: &JointDistribution,
    beta: f64,
    current: &HardClustering,
    mode: UpdateMode,
) -> Result<HardClustering> {
    check_beta(beta)?;
    if current.n_points() != joint.n_points() {
        return Err(Error::LengthMismatch {
            left: current.n_points(),
            right: joint.n_points(),
        });
    }
    match mode {
        UpdateMode::Synchronous => Ok(synchronous_step(joint, beta, current)),
        UpdateMode::Sequential => Ok(sequential_step(joint, beta, current)),
    }
}

fn synchronous_step(joint: &JointDistribution, beta: f64, current: &HardClustering) -> HardClustering {
    let n_c = current.n_clusters();
    let log_mass: Vec<f64> = current.cluster_mass().iter().map(|q| q.ln()).collect();
    let kl = if beta == 0.0 {
        Array2::zeros((joint.n_points(), n_c))
    } else {
        divergence_matrix(joint, current.cluster_conditional())
    };
    let mut extra = 0;
    let assignment: Vec<usize> = (0..joint.n_points())
        .map(|i| {
            let scores = (0..n_c).map(|c| score(log_mass[c], beta, kl[(i, c)]));
            argmax_finite(scores).unwrap_or_else(|| {
                // Unreachable for consistent clusterings: a point's own
                // cluster always covers its support.
                let cell = dominant_cell(joint.row_slice(i));
                (0..n_c)
                    .find(|&c| {
                        current
                            .members(c)
                            .any(|j| dominant_cell(joint.row_slice(j)) == cell)
                    })
                    .unwrap_or_else(|| {
                        extra += 1;
                        n_c + extra - 1
                    })
            })
        })
        .collect();
    HardClustering::build(joint, compact(&assignment))
}

fn sequential_step(joint: &JointDistribution, beta: f64, current: &HardClustering) -> HardClustering {
    let n = joint.n_points();
    let m = joint.n_cells();
    let mut counts = current.counts().to_vec();
    let mut sums = current.cluster_conditional().clone();
    for (mut row, &k) in sums.axis_iter_mut(Axis(0)).zip(&counts) {
        row *= k as f64;
    }
    let log_row = |sum: ndarray::ArrayView1<f64>, k: usize| -> Vec<f64> {
        sum.iter()
            .map(|&v| if v > 0.0 { (v / k as f64).ln() } else { f64::NEG_INFINITY })
            .collect()
    };
    let mut logs: Vec<Vec<f64>> = (0..counts.len()).map(|c| log_row(sums.row(c), counts[c])).collect();
    let mut assignment = current.assignment().to_vec();

    for i in 0..n {
        let p = joint.row_slice(i);
        let neg_ent = joint.row_neg_entropy()[i];
        let scores = (0..counts.len()).map(|c| {
            if counts[c] == 0 {
                return f64::NEG_INFINITY;
            }
            let log_mass = (counts[c] as f64 / n as f64).ln();
            if beta == 0.0 {
                return log_mass;
            }
            let mut cross = 0.0;
            for x in 0..m {
                if p[x] > 0.0 {
                    cross += p[x] * logs[c][x];
                }
            }
            score(log_mass, beta, (neg_ent - cross).max(0.0))
        });
        let old = assignment[i];
        let new = argmax_finite(scores).unwrap_or(old);
        if new != old {
            sums.row_mut(new).scaled_add(1.0, &joint.row(i));
            counts[old] -= 1;
            counts[new] += 1;
            assignment[i] = new;
            // Subtracting the row would cancel tiny tail masses to exact
            // zeros, so the old cluster is summed again from its members.
            let mut fresh = sums.row_mut(old);
            fresh.fill(0.0);
            for j in (0..n).filter(|&j| assignment[j] == old) {
                fresh.scaled_add(1.0, &joint.row(j));
            }
            if counts[old] > 0 {
                logs[old] = log_row(sums.row(old), counts[old]);
            }
            logs[new] = log_row(sums.row(new), counts[new]);
        }
    }
    // Rebuild from scratch so the conditionals carry no accumulated drift.
    HardClustering::build(joint, compact(&assignment))
}

/// Result of one merge pass.
#[derive(Clone, Debug)]
pub struct MergeOutcome {
    pub clustering: HardClustering,
    /// Pair merged (indices in the input clustering), if any.
    pub merged: Option<(usize, usize)>,
    pub cost_before: f64,
    /// `L` of the best candidate as evaluated before applying it.
    pub predicted_cost: f64,
}

/// Evaluate `L` for every pairwise merge and apply the best one if it
/// strictly lowers `L`.
pub fn merge_pass(joint: &JointDistribution, beta: f64, current: &HardClustering) -> Result<MergeOutcome> {
    check_beta(beta)?;
    let n_c = current.n_clusters();
    let log_px = log_location_marginal(joint);
    let mass = current.cluster_mass();
    let cond = current.cluster_conditional();
    let h: Vec<f64> = mass.iter().map(|&q| entropy_term(q)).collect();
    let info: Vec<f64> = (0..n_c)
        .map(|c| info_term(mass[c], cond.row(c).as_slice().unwrap(), &log_px))
        .collect();
    let cost_before = h.iter().sum::<f64>() - beta * info.iter().sum::<f64>();

    let pairs: Vec<(usize, usize)> = (0..n_c).flat_map(|a| (a + 1..n_c).map(move |b| (a, b))).collect();
    let candidates: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            let q = mass[a] + mass[b];
            let (wa, wb) = (mass[a] / q, mass[b] / q);
            let merged: Vec<f64> = cond
                .row(a)
                .iter()
                .zip(cond.row(b))
                .map(|(&x, &y)| wa * x + wb * y)
                .collect();
            let d_h = entropy_term(q) - h[a] - h[b];
            let d_i = info_term(q, &merged, &log_px) - info[a] - info[b];
            cost_before + d_h - beta * d_i
        })
        .collect();

    let best = candidates
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (k, &l)| match acc {
            Some((_, b)) if l >= b => acc,
            _ => Some((k, l)),
        });
    let threshold = cost_before - 1e-12 * cost_before.abs().max(1.0);
    match best {
        Some((k, predicted)) if predicted < threshold => {
            let (a, b) = pairs[k];
            let labels: Vec<usize> = current
                .assignment()
                .iter()
                .map(|&c| if c == b { a } else { c })
                .collect();
            Ok(MergeOutcome {
                clustering: HardClustering::build(joint, compact(&labels)),
                merged: Some((a, b)),
                cost_before,
                predicted_cost: predicted,
            })
        }
        _ => Ok(MergeOutcome {
            clustering: current.clone(),
            merged: None,
            cost_before,
            predicted_cost: cost_before,
        }),
    }
}

/// One converged DIB solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub beta: f64,
    pub s: Option<f64>,
    #[serde(rename = "n_c")]
    pub n_clusters: usize,
    #[serde(rename = "entropy_T")]
    pub entropy_t: f64,
    #[serde(rename = "info_TX")]
    pub info_tx: f64,
    /// `I(i;x)` of the joint the solution was computed on.
    #[serde(rename = "info_IX")]
    pub info_ix: f64,
    /// `I(T;x) / I(i;x)`; absent when the joint carries no spatial information.
    pub frac_info: Option<f64>,
    #[serde(rename = "cost_L")]
    pub cost: f64,
    pub digest: String,
    pub assignment: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub merges: usize,
    /// Steps or merges that raised `L` by more than the tolerance.
    pub cost_increases: usize,
}

impl SolutionRecord {
    pub fn from_clustering(joint: &JointDistribution, clustering: &HardClustering, beta: f64) -> Self {
        let entropy_t = clustering.entropy();
        let info_tx = clustering.info_tx(joint);
        let info_ix = joint.info_ix();
        SolutionRecord {
            beta,
            s: joint.smoothing(),
            n_clusters: clustering.n_clusters(),
            entropy_t,
            info_tx,
            info_ix,
            frac_info: (info_ix > 1e-14).then(|| info_tx / info_ix),
            cost: entropy_t - beta * info_tx,
            digest: clustering.digest(),
            assignment: clustering.assignment().to_vec(),
            converged: true,
            iterations: 0,
            merges: 0,
            cost_increases: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub record: SolutionRecord,
    pub clustering: HardClustering,
}

/// Seed for an independent stream derived from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random assignment into exactly `min(k, N)` non-empty clusters: a random
/// choice of points seeds each cluster and the rest are assigned uniformly.
pub fn random_clustering(joint: &JointDistribution, k: usize, seed: u64) -> HardClustering {
    let n = joint.n_points();
    let k = k.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = if rank < k { rank } else { rng.random_range(0..k) };
    }
    HardClustering::build(joint, compact(&labels))
}

/// Solve from a random start: local DIB iteration to convergence, then a
/// merge pass, repeated until a full cycle changes nothing.
pub fn dib_solve(
    joint: &JointDistribution,
    beta: f64,
    init_clusters: usize,
    seed: u64,
    options: &SolverOptions,
) -> Result<Solution> {
    check_beta(beta)?;
    if init_clusters == 0 || init_clusters > joint.n_points() {
        return Err(Error::InvalidArgument(format!(
            "init_clusters must be in [1, {}], got {init_clusters}",
            joint.n_points()
        )));
    }
    let start = random_clustering(joint, init_clusters, seed);
    dib_solve_from(joint, beta, start, options)
}

/// [`dib_solve`] from a given starting clustering.
pub fn dib_solve_from(
    joint: &JointDistribution,
    beta: f64,
    start: HardClustering,
    options: &SolverOptions,
) -> Result<Solution> {
    check_beta(beta)?;
    let mut clustering = start;
    let mut cost = dib_cost(joint, &clustering, beta);
    let mut iterations = 0;
    let mut merges = 0;
    let mut increases = 0;
    let mut converged = true;

    loop {
        let mut settled = false;
        for _ in 0..options.max_iter {
            let next = dib_step(joint, beta, &clustering, options.mode)?;
            let next_cost = dib_cost(joint, &next, beta);
            iterations += 1;
            if next_cost > cost + COST_INCREASE_TOLERANCE {
                increases += 1;
                log::warn!("DIB step raised L from {cost} to {next_cost} at beta={beta}");
            }
            let unchanged = next.assignment() == clustering.assignment();
            let small = (next_cost - cost).abs() < options.tol;
            clustering = next;
            cost = next_cost;
            if unchanged || small {
                settled = true;
                break;
            }
        }
        if !settled {
            converged = false;
        }

        let outcome = merge_pass(joint, beta, &clustering)?;
        if outcome.merged.is_none() {
            break;
        }
        let merged_cost = dib_cost(joint, &outcome.clustering, beta);
        if merged_cost > cost + COST_INCREASE_TOLERANCE {
            increases += 1;
            log::warn!("merge raised L from {cost} to {merged_cost} at beta={beta}");
        }
        clustering = outcome.clustering;
        cost = merged_cost;
        merges += 1;
    }

    let mut record = SolutionRecord::from_clustering(joint, &clustering, beta);
    record.converged = converged;
    record.iterations = iterations;
    record.merges = merges;
    record.cost_increases = increases;
    Ok(Solution { record, clustering })
}

/// Best-`L` solution over `restarts` independent random starts. Ties keep
/// the earliest restart.
pub fn dib_solve_restarts(
    joint: &JointDistribution,
    beta: f64,
    init_clusters: usize,
    seed: u64,
    restarts: usize,
    options: &SolverOptions,
) -> Result<Solution> {
    let restarts = restarts.max(1);
    let solutions: Vec<Solution> = (0..restarts)
        .into_par_iter()
        .map(|r| dib_solve(joint, beta, init_clusters, derive_seed(seed, r as u64), options))
        .collect::<Result<_>>()?;
    Ok(best_of(solutions))
}

pub(crate) fn best_of(solutions: Vec<Solution>) -> Solution {
    let increases: usize = solutions.iter().map(|s| s.record.cost_increases).sum();
    let mut best = solutions
        .into_iter()
        .reduce(|a, b| if b.record.cost < a.record.cost { b } else { a })
        .expect("at least one restart");
    // Violations in discarded restarts still count.
    best.record.cost_increases = increases;
    best
}

/// Soft encoder `q(t|i)` with its induced marginal and conditionals.
#[derive(Clone, Debug)]
pub struct SoftClustering {
    encoder: Array2<f64>,
    marginal: Vec<f64>,
    conditional: Array2<f64>,
}

impl SoftClustering {
    pub fn from_encoder(joint: &JointDistribution, encoder: Array2<f64>) -> Result<Self> {
        if encoder.nrows() != joint.n_points() || encoder.ncols() == 0 {
            return Err(Error::LengthMismatch {
                left: encoder.nrows(),
                right: joint.n_points(),
            });
        }
        for (i, row) in encoder.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("encoder row {i} is not a distribution")));
            }
        }
        let pi = joint.point_mass();
        let marginal: Vec<f64> = encoder.sum_axis(Axis(0)).iter().map(|v| v * pi).collect();
        let mut conditional = encoder.t().dot(joint.conditional()) * pi;
        for (mut row, &q) in conditional.axis_iter_mut(Axis(0)).zip(&marginal) {
            if q > 0.0 {
                row /= q;
            } else {
                row.fill(0.0);
            }
        }
        Ok(SoftClustering {
            encoder,
            marginal,
            conditional,
        })
    }

    /// `q(t|i)`, `N x T`.
    pub fn encoder(&self) -> &Array2<f64> {
        &self.encoder
    }

    /// `q(t)`
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// `q(x|t)`, `T x M`.
    pub fn conditional(&self) -> &Array2<f64> {
        &self.conditional
    }
}

/// One IB update: `q(t|i) ~ q(t) exp(-beta KL[p(x|i) || q(x|t)])` with
/// `q(t)` and `q(x|t)` induced by `current`.
pub fn ib_step(joint: &JointDistribution, beta: f64, current: &Array2<f64>) -> Result<SoftClustering> {
    check_beta(beta)?;
    let prev = SoftClustering::from_encoder(joint, current.clone())?;
    let t = current.ncols();
    let kl = if beta == 0.0 {
        Array2::zeros((joint.n_points(), t))
    } else {
        divergence_matrix(joint, prev.conditional())
    };
    let log_mass: Vec<f64> = prev
        .marginal()
        .iter()
        .map(|&q| if q > 0.0 { q.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut encoder = Array2::zeros((joint.n_points(), t));
    for i in 0..joint.n_points() {
        let logits: Vec<f64> = (0..t)
            .map(|c| {
                if log_mass[c] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    score(log_mass[c], beta, kl[(i, c)])
                }
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            encoder.row_mut(i).assign(&current.row(i));
            continue;
        }
        let weights: Vec<f64> = logits.iter().map(|&l| (l - top).exp()).collect();
        let z: f64 = weights.iter().sum();
        for (c, w) in weights.into_iter().enumerate() {
            encoder[(i, c)] = w / z;
        }
    }
    SoftClustering::from_encoder(joint, encoder)
}

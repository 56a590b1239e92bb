//! Information curves and kink-angle model selection.
//!
//! Solutions from a beta sweep are placed in the `(H(T), I(T;x))` plane.
//! The upper-left Pareto set is trimmed to its concave majorant; on that
//! curve the chord slopes either side of a solution give the range of
//! `1/beta` over which it is optimal, and the kink angle
//! `pi/2 - atan(beta_min) - atan(1/beta_max)` measures how wide that range
//! is. The solution with the widest kink picks the number of clusters.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dib::{best_of, derive_seed, dib_solve, Solution, SolutionRecord, SolverOptions};
use crate::error::{Error, Result};
use crate::smoothing::JointDistribution;

pub const DEFAULT_BETA_MIN: f64 = 0.1;
pub const DEFAULT_BETA_MAX: f64 = 1e4;
pub const DEFAULT_BETA_STEPS: usize = 60;
pub const DEFAULT_RESTARTS: usize = 5;
pub const MAX_INIT_CLUSTERS: usize = 16;

/// `steps` values spaced geometrically from `min` to `max` inclusive.
pub fn geometric_schedule(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_min <= beta_max and steps > 0 (got {min}, {max}, {steps})"
        )));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let ratio = (max / min).ln() / (steps - 1) as f64;
    let mut out: Vec<f64> = (0..steps).map(|k| min * (ratio * k as f64).exp()).collect();
    out[steps - 1] = max;
    Ok(out)
}

/// Initial cluster count for a dataset expected to hold `expected` clusters.
pub fn default_init_clusters(n_points: usize, expected: usize) -> usize {
    n_points.min(2 * expected.max(1)).clamp(1, MAX_INIT_CLUSTERS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schedule: Vec<f64>,
    pub restarts: usize,
    pub init_clusters: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl SweepConfig {
    pub fn new(init_clusters: usize, seed: u64) -> Self {
        SweepConfig {
            schedule: geometric_schedule(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX, DEFAULT_BETA_STEPS)
                .expect("default schedule is valid"),
            restarts: DEFAULT_RESTARTS,
            init_clusters,
            seed,
            solver: SolverOptions::default(),
        }
    }
}

/// Best-of-`restarts` DIB solution at every beta of the schedule.
pub fn beta_sweep(joint: &JointDistribution, config: &SweepConfig) -> Result<Vec<SolutionRecord>> {
    Ok(beta_sweep_solutions(joint, config)?
        .into_iter()
        .map(|s| s.record)
        .collect())
}

/// Like [`beta_sweep`] but keeps the clusterings.
pub fn beta_sweep_solutions(joint: &JointDistribution, config: &SweepConfig) -> Result<Vec<Solution>> {
    if config.schedule.is_empty() {
        return Err(Error::InvalidArgument("empty beta schedule".into()));
    }
    if config.schedule.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("beta schedule must be ascending".into()));
    }
    let restarts = config.restarts.max(1);
    let init = config.init_clusters.min(joint.n_points());
    let jobs: Vec<(usize, usize)> = (0..config.schedule.len())
        .flat_map(|k| (0..restarts).map(move |r| (k, r)))
        .collect();
    let mut solved: Vec<Solution> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let seed = derive_seed(derive_seed(config.seed, k as u64), r as u64);
            dib_solve(joint, config.schedule[k], init, seed, &config.solver)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(config.schedule.len());
    for _ in 0..config.schedule.len() {
        let rest = solved.split_off(restarts);
        out.push(best_of(std::mem::replace(&mut solved, rest)));
    }
    Ok(out)
}

/// Per-solution annotations on an information curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Not dominated by any other solution.
    pub on_frontier: bool,
    /// On the concave majorant of the frontier.
    pub on_hull: bool,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    /// Kink angle in radians; interior hull points only.
    pub theta: Option<f64>,
    /// Smallest and largest swept beta that produced this partition.
    pub observed_beta: (f64, f64),
}

/// Solutions sorted by `H(T)` with frontier and kink annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationCurve {
    pub solutions: Vec<SolutionRecord>,
    pub points: Vec<CurvePoint>,
}

impl InformationCurve {
    pub fn frontier(&self) -> impl Iterator<Item = (&SolutionRecord, &CurvePoint)> {
        self.solutions
            .iter()
            .zip(&self.points)
            .filter(|(_, p)| p.on_frontier)
    }

    pub fn hull(&self) -> impl Iterator<Item = (&SolutionRecord, &CurvePoint)> {
        self.solutions.iter().zip(&self.points).filter(|(_, p)| p.on_hull)
    }

    pub fn frontier_len(&self) -> usize {
        self.points.iter().filter(|p| p.on_frontier).count()
    }

    /// Frontier rows as CSV: `H,I,n_c,frac_info,on_hull,beta_min,beta_max,theta`.
    pub fn write_frontier_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "H,I,n_c,frac_info,on_hull,beta_min,beta_max,theta")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for (r, p) in self.frontier() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.entropy_t,
                r.info_tx,
                r.n_clusters,
                opt(r.frac_info),
                p.on_hull,
                opt(p.beta_min),
                opt(p.beta_max),
                opt(p.theta)
            )?;
        }
        Ok(())
    }
}

fn dedup_key(r: &SolutionRecord) -> (usize, i64, i64) {
    (
        r.n_clusters,
        (r.entropy_t / 1e-9).round() as i64,
        (r.info_tx / 1e-9).round() as i64,
    )
}

/// Deduplicate, sort by `H`, and flag the non-dominated set and its concave
/// majorant.
pub fn pareto_frontier(records: &[SolutionRecord]) -> InformationCurve {
    let mut order: Vec<(usize, i64, i64)> = Vec::new();
    let mut groups: HashMap<(usize, i64, i64), (SolutionRecord, f64, f64)> = HashMap::new();
    for r in records {
        let key = dedup_key(r);
        match groups.get_mut(&key) {
            Some((_, lo, hi)) => {
                *lo = lo.min(r.beta);
                *hi = hi.max(r.beta);
            }
            None => {
                order.push(key);
                groups.insert(key, (r.clone(), r.beta, r.beta));
            }
        }
    }
    let mut entries: Vec<(SolutionRecord, CurvePoint)> = order
        .into_iter()
        .map(|k| {
            let (r, lo, hi) = groups.remove(&k).expect("key recorded");
            let point = CurvePoint {
                observed_beta: (lo, hi),
                ..CurvePoint::default()
            };
            (r, point)
        })
        .collect();
    entries.sort_by(|(a, _), (b, _)| {
        a.entropy_t
            .total_cmp(&b.entropy_t)
            .then(b.info_tx.total_cmp(&a.info_tx))
            .then(a.n_clusters.cmp(&b.n_clusters))
    });

    // Sorted by H ascending then I descending: a solution is on the frontier
    // iff its I beats everything to its left.
    let mut best_i = f64::NEG_INFINITY;
    for (r, p) in entries.iter_mut() {
        if r.info_tx > best_i {
            p.on_frontier = true;
            best_i = r.info_tx;
        }
    }

    let frontier: Vec<usize> = (0..entries.len()).filter(|&k| entries[k].1.on_frontier).collect();
    for k in upper_hull(&frontier, |k| (entries[k].0.entropy_t, entries[k].0.info_tx)) {
        entries[k].1.on_hull = true;
    }

    let (solutions, points) = entries.into_iter().unzip();
    InformationCurve { solutions, points }
}

/// Concave majorant of points already sorted by x with increasing y.
/// Points on a chord are kept.
fn upper_hull(indices: &[usize], xy: impl Fn(usize) -> (f64, f64)) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(indices.len());
    for &k in indices {
        let (cx, cy) = xy(k);
        while hull.len() >= 2 {
            let (ax, ay) = xy(hull[hull.len() - 2]);
            let (bx, by) = xy(hull[hull.len() - 1]);
            // b strictly below chord a-c => drop b
            let cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
            if cross > 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    hull
}

/// `pi/2 - atan(beta_min) - atan(1/beta_max)`, clamped to `[0, pi/2]`.
///
/// For non-negative slopes this equals `atan(beta_max) - atan(beta_min)`,
/// which is the form evaluated so equal slopes give exactly zero.
pub fn kink_angle(beta_min: f64, beta_max: f64) -> f64 {
    let theta = if beta_min >= 0.0 && beta_max >= 0.0 {
        beta_max.atan() - beta_min.atan()
    } else {
        FRAC_PI_2 - beta_min.atan() - beta_max.recip().atan()
    };
    theta.clamp(0.0, FRAC_PI_2)
}

/// Annotate interior hull points with chord-derived `beta_min`,
/// `beta_max` and kink angle. Extreme points are left without an angle.
pub fn kink_angles(mut curve: InformationCurve) -> InformationCurve {
    let hull: Vec<usize> = (0..curve.points.len()).filter(|&k| curve.points[k].on_hull).collect();
    for p in curve.points.iter_mut() {
        p.beta_min = None;
        p.beta_max = None;
        p.theta = None;
    }
    let chord_beta = |a: &SolutionRecord, b: &SolutionRecord| {
        let d_i = b.info_tx - a.info_tx;
        let d_h = b.entropy_t - a.entropy_t;
        if d_i <= 0.0 {
            f64::INFINITY
        } else {
            d_h / d_i
        }
    };
    for w in 0..hull.len() {
        let k = hull[w];
        if w > 0 {
            curve.points[k].beta_min = Some(chord_beta(&curve.solutions[hull[w - 1]], &curve.solutions[k]));
        }
        if w + 1 < hull.len() {
            curve.points[k].beta_max = Some(chord_beta(&curve.solutions[k], &curve.solutions[hull[w + 1]]));
        }
        if let (Some(lo), Some(hi)) = (curve.points[k].beta_min, curve.points[k].beta_max) {
            curve.points[k].theta = Some(kink_angle(lo, hi));
        }
    }
    curve
}

/// Frontier extraction followed by kink annotation.
pub fn information_curve(records: &[SolutionRecord]) -> InformationCurve {
    kink_angles(pareto_frontier(records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub n_clusters: usize,
    pub theta: Option<f64>,
    /// No interior frontier point existed; fell back to the most
    /// informative solution.
    pub fallback: bool,
}

/// Cluster count of the solution with the largest kink angle, ties toward
/// fewer clusters.
pub fn select_n_clusters(curve: &InformationCurve) -> Result<Selection> {
    let best = curve
        .solutions
        .iter()
        .zip(&curve.points)
        .filter_map(|(r, p)| p.theta.map(|t| (r.n_clusters, t)))
        .fold(None::<(usize, f64)>, |acc, (n, t)| match acc {
            Some((bn, bt)) if t < bt || (t == bt && n >= bn) => acc,
            _ => Some((n, t)),
        });
    if let Some((n, t)) = best {
        return Ok(Selection {
            n_clusters: n,
            theta: Some(t),
            fallback: false,
        });
    }
    let top = curve
        .solutions
        .iter()
        .max_by(|a, b| a.info_tx.total_cmp(&b.info_tx))
        .ok_or_else(|| Error::InvalidArgument("empty information curve".into()))?;
    log::warn!("no interior frontier point; falling back to the most informative solution");
    Ok(Selection {
        n_clusters: top.n_clusters,
        theta: None,
        fallback: true,
    })
}

/// Largest kink angle for each cluster count present on the hull interior.
pub fn theta_by_n_clusters(curve: &InformationCurve) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (r, p) in curve.solutions.iter().zip(&curve.points) {
        if let Some(t) = p.theta {
            let e = out.entry(r.n_clusters).or_insert(t);
            if t > *e {
                *e = t;
            }
        }
    }
    out
}

/// Largest fractional information reached for each cluster count.
pub fn frac_info_by_n_clusters(records: &[SolutionRecord]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for r in records {
        if let Some(f) = r.frac_info {
            let e = out.entry(r.n_clusters).or_insert(f);
            if f > *e {
                *e = f;
            }
        }
    }
    out
}

//! Decision boundaries of point classifiers in the plane.
//!
//! A classifier is evaluated on a lattice; every cell whose corners disagree
//! contributes marching-squares segments, and each crossing is refined by
//! bisection along its lattice edge.

use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::data::PointSet;
use crate::dib::HardClustering;
use crate::error::{Error, Result};
use crate::smoothing::{JointDistribution, UNDERFLOW_EXPONENT};

pub type Polyline = Vec<[f64; 2]>;

const REFINE_STEPS: usize = 30;

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Region {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("empty region {lo:?}..{hi:?}")));
        }
        Ok(Region { lo, hi })
    }

    /// Bounding box of a 2-D point set, padded by `pad` on every side.
    pub fn around(points: &PointSet, pad: f64) -> Result<Self> {
        if points.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "boundaries need 2-D points, got d = {}",
                points.dim()
            )));
        }
        let (lo, hi) = points.bounding_box();
        Region::new([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    /// Lattice spacing along each axis for `resolution` nodes per axis.
    pub fn spacing(&self, resolution: usize) -> [f64; 2] {
        let steps = (resolution.max(2) - 1) as f64;
        [(self.hi[0] - self.lo[0]) / steps, (self.hi[1] - self.lo[1]) / steps]
    }

    fn node(&self, spacing: [f64; 2], r: usize, c: usize) -> [f64; 2] {
        [self.lo[0] + c as f64 * spacing[0], self.lo[1] + r as f64 * spacing[1]]
    }
}

/// Edge of the lattice: `(vertical, r, c)` runs from node `(r, c)` to
/// `(r, c + 1)` when horizontal and to `(r + 1, c)` when vertical.
type EdgeId = (bool, usize, usize);

/// Label-change contour of `classifier` over `region` on a
/// `resolution x resolution` lattice. Empty when the label is uniform.
///
/// Each label's region is outlined separately, except the largest label,
/// so two-label problems yield each boundary exactly once.
pub fn decision_boundary<F>(classifier: F, region: &Region, resolution: usize) -> Result<Vec<Polyline>>
where
    F: Fn(&[f64]) -> usize + Sync,
{
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 2, got {resolution}")));
    }
    let n = resolution;
    let spacing = region.spacing(n);
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|r| (0..n).map(|c| classifier(&region.node(spacing, r, c))).collect())
        .collect();
    let labels = Array2::from_shape_fn((n, n), |(r, c)| rows[r][c]);
    let mut present: Vec<usize> = labels.iter().copied().collect();
    present.sort_unstable();
    present.dedup();
    let mut out = Vec::new();
    if present.len() < 2 {
        return Ok(out);
    }
    for &label in &present[..present.len() - 1] {
        let inside = labels.mapv(|l| l == label);
        out.extend(contour(&classifier, label, &inside, region, spacing));
    }
    Ok(out)
}

fn contour<F>(classifier: &F, label: usize, inside: &Array2<bool>, region: &Region, spacing: [f64; 2]) -> Vec<Polyline>
where
    F: Fn(&[f64]) -> usize + Sync,
{
    let n = inside.nrows();
    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            let b = [inside[(r, c)], inside[(r, c + 1)], inside[(r + 1, c + 1)], inside[(r + 1, c)]];
            // bottom, right, top, left
            let edges: [EdgeId; 4] = [(false, r, c), (true, r, c + 1), (false, r + 1, c), (true, r, c)];
            let crossed: Vec<usize> = (0..4).filter(|&e| b[e] != b[(e + 1) % 4]).collect();
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    let centre = [
                        region.lo[0] + (c as f64 + 0.5) * spacing[0],
                        region.lo[1] + (r as f64 + 0.5) * spacing[1],
                    ];
                    if (classifier(&centre) == label) == b[1] {
                        // corners 1 and 3 connect through the centre
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    } else {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    }
                }
                _ => {}
            }
        }
    }
    if segments.is_empty() {
        return Vec::new();
    }

    let mut ids: Vec<EdgeId> = segments.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let points: HashMap<EdgeId, [f64; 2]> = ids
        .par_iter()
        .map(|&id| (id, refine(classifier, label, inside, region, spacing, id)))
        .collect();

    let mut incident: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(k);
        incident.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // open chains first, starting from edges touched by a single segment
    let starts: Vec<(EdgeId, usize)> = segments
        .iter()
        .enumerate()
        .flat_map(|(k, &(a, b))| [(a, k), (b, k)])
        .filter(|(id, _)| incident[id].len() == 1)
        .collect();
    for (id, k) in starts {
        if !used[k] {
            lines.push(walk(&segments, &incident, &mut used, id, k, &points));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            let start = segments[k].0;
            lines.push(walk(&segments, &incident, &mut used, start, k, &points));
        }
    }
    lines
}

fn walk(
    segments: &[(EdgeId, EdgeId)],
    incident: &HashMap<EdgeId, Vec<usize>>,
    used: &mut [bool],
    start: EdgeId,
    first: usize,
    points: &HashMap<EdgeId, [f64; 2]>,
) -> Polyline {
    let mut line = vec![points[&start]];
    let (mut at, mut k) = (start, first);
    loop {
        used[k] = true;
        let (a, b) = segments[k];
        at = if a == at { b } else { a };
        line.push(points[&at]);
        match incident[&at].iter().find(|&&j| !used[j]) {
            Some(&j) => k = j,
            None => break,
        }
    }
    line
}

/// Bisect along a lattice edge for the point where membership of `label` flips.
fn refine<F>(classifier: &F, label: usize, inside: &Array2<bool>, region: &Region, spacing: [f64; 2], id: EdgeId) -> [f64; 2]
where
    F: Fn(&[f64]) -> usize,
{
    let (vertical, r, c) = id;
    let (r2, c2) = if vertical { (r + 1, c) } else { (r, c + 1) };
    let mut a = region.node(spacing, r, c);
    let mut b = region.node(spacing, r2, c2);
    let a_in = inside[(r, c)];
    for _ in 0..REFINE_STEPS {
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if (classifier(&m) == label) == a_in {
            a = m;
        } else {
            b = m;
        }
    }
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn distance_to_set(p: [f64; 2], set: &[Polyline]) -> f64 {
    let mut best = f64::INFINITY;
    for line in set {
        if line.len() == 1 {
            best = best.min(point_segment_distance(p, line[0], line[0]));
        }
        for w in line.windows(2) {
            best = best.min(point_segment_distance(p, w[0], w[1]));
        }
    }
    best
}

/// Largest distance from a vertex of `from` to the curves of `to`.
pub fn directed_hausdorff(from: &[Polyline], to: &[Polyline]) -> f64 {
    from.par_iter()
        .flat_map_iter(|line| line.iter().copied())
        .map(|p| distance_to_set(p, to))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance between two curve sets; infinite when
/// exactly one of them is empty.
pub fn hausdorff_distance(a: &[Polyline], b: &[Polyline]) -> f64 {
    let empty = |s: &[Polyline]| s.iter().all(|l| l.is_empty());
    match (empty(a), empty(b)) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => directed_hausdorff(a, b).max(directed_hausdorff(b, a)),
    }
}

/// CSV with header `curve,piece,x1,x2`, one row per vertex.
pub fn write_polylines_csv<W: Write>(out: W, curves: &[(&str, &[Polyline])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "piece", "x1", "x2"]).map_err(csv_error)?;
    for (name, lines) in curves {
        for (piece, line) in lines.iter().enumerate() {
            for p in line {
                w.write_record([name.to_string(), piece.to_string(), p[0].to_string(), p[1].to_string()])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// A trained hard clustering extended to new points: the point is smoothed
/// at the training scale and assigned by `argmax_c ln q(c) - beta KL[p(x|new) || q(x|c)]`.
#[derive(Clone, Debug)]
pub struct DibClassifier {
    axis_centers: Vec<Vec<f64>>,
    s: f64,
    beta: f64,
    log_mass: Vec<f64>,
    /// `ln q(x|c)` with zeros where `q(x|c) = 0`.
    log_conditional: Array2<f64>,
    /// Cells outside each cluster's support.
    holes: Vec<Vec<usize>>,
    cluster_means: Vec<Vec<f64>>,
}

impl DibClassifier {
    pub fn new(joint: &JointDistribution, clustering: &HardClustering, beta: f64) -> Result<Self> {
        let (Some(grid), Some(s)) = (joint.grid(), joint.smoothing()) else {
            return Err(Error::InvalidArgument(
                "classifier needs a smoothed joint distribution on a grid".into(),
            ));
        };
        if clustering.n_points() != joint.n_points() {
            return Err(Error::LengthMismatch {
                left: clustering.n_points(),
                right: joint.n_points(),
            });
        }
        let centers = grid.centers();
        let axis_centers = grid
            .edges()
            .iter()
            .map(|e| e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
            .collect();
        let cond = clustering.cluster_conditional();
        let cluster_means = cond
            .outer_iter()
            .map(|row| {
                let m = row.dot(&centers);
                m.to_vec()
            })
            .collect();
        Ok(DibClassifier {
            s,
            beta,
            log_mass: clustering.cluster_mass().iter().map(|m| m.ln()).collect(),
            log_conditional: cond.mapv(|v| if v > 0.0 { v.ln() } else { 0.0 }),
            holes: cond
                .outer_iter()
                .map(|row| (0..row.len()).filter(|&m| row[m] <= 0.0).collect())
                .collect(),
            cluster_means,
            axis_centers,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.log_mass.len()
    }

    /// The smoothed test point over the grid cells. The Gaussian factorizes
    /// over axes, so only `sum_k bins_k` exponentials are needed.
    pub fn smoothed(&self, x: &[f64]) -> Vec<f64> {
        self.smoothed_with_neg_entropy(x).0
    }

    /// Smoothed row and its `sum p ln p`, read off the exponents.
    fn smoothed_with_neg_entropy(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let scale = -0.5 / (self.s * self.s);
        let mut exps: Vec<f64> = vec![0.0];
        let mut factors: Vec<f64> = vec![1.0];
        for (centers, &xk) in self.axis_centers.iter().zip(x) {
            let e: Vec<f64> = centers.iter().map(|c| (c - xk) * (c - xk) * scale).collect();
            let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let f: Vec<f64> = e.iter().map(|v| (v - top).exp()).collect();
            let mut next_e = Vec::with_capacity(exps.len() * e.len());
            let mut next_f = Vec::with_capacity(exps.len() * e.len());
            for (&pe, &pf) in exps.iter().zip(&factors) {
                for (&ce, &cf) in e.iter().zip(&f) {
                    next_e.push(pe + ce - top);
                    next_f.push(pf * cf);
                }
            }
            exps = next_e;
            factors = next_f;
        }
        for (v, &e) in factors.iter_mut().zip(&exps) {
            if e < UNDERFLOW_EXPONENT {
                *v = 0.0;
            }
        }
        let total: f64 = factors.iter().sum();
        factors.iter_mut().for_each(|v| *v /= total);
        let weighted = Array1::from(exps).dot(&ArrayView1::from(&factors[..]));
        (factors, weighted - total.ln())
    }

    /// Divergence of the smoothed point from every cluster.
    pub fn divergences(&self, x: &[f64]) -> Vec<f64> {
        let (p, neg_entropy) = self.smoothed_with_neg_entropy(x);
        let cross = self.log_conditional.dot(&ArrayView1::from(&p[..]));
        cross
            .iter()
            .zip(&self.holes)
            .map(|(&cr, holes)| {
                if holes.iter().any(|&m| p[m] > 0.0) {
                    f64::INFINITY
                } else {
                    (neg_entropy - cr).max(0.0)
                }
            })
            .collect()
    }

    /// Cluster index; when the point overlaps no cluster's support the
    /// nearest cluster mean wins.
    pub fn classify(&self, x: &[f64]) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (c, kl) in self.divergences(x).into_iter().enumerate() {
            if kl.is_infinite() {
                continue;
            }
            let score = self.log_mass[c] - self.beta * kl;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((c, score));
            }
        }
        if let Some((c, _)) = best {
            return c;
        }
        let dist = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        (0..self.cluster_means.len())
            .min_by(|&a, &b| dist(&self.cluster_means[a]).total_cmp(&dist(&self.cluster_means[b])))
            .unwrap_or(0)
    }
}

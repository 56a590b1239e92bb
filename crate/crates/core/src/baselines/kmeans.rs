//! Lloyd's algorithm with k-means++ seeding.

use ndarray::{Array2, ArrayView1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::PointSet;
use crate::dib::derive_seed;
use crate::error::{Error, Result};

const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    /// `k x d`
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after every assignment pass of the winning run.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn predict(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }
}

fn sq_dist(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and its squared distance.
fn nearest(centroids: &Array2<f64>, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = sq_dist(row, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seed(points: &PointSet, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.len();
    let mut centroids = Array2::zeros((k, points.dim()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.points().row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(centroids.row(0), points.point(i)))
        .collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point coincides with a centroid already
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&points.points().row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(centroids.row(c), points.point(i)));
        }
    }
    centroids
}

fn lloyd(points: &PointSet, mut centroids: Array2<f64>) -> KMeansResult {
    let n = points.len();
    let k = centroids.nrows();
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(&centroids, points.point(i));
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
            dists[i] = d;
            inertia += d;
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &points.points().row(i));
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // empty cluster: reseed at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]))
                    .expect("n > 0");
                centroids.row_mut(c).assign(&points.points().row(far));
                dists[far] = 0.0;
            }
        }
    }
    let inertia = *history.last().expect("at least one pass");
    KMeansResult {
        centroids,
        assignment,
        inertia,
        inertia_history: history,
    }
}

/// Best-inertia k-means over `restarts` k-means++ seedings.
pub fn kmeans(points: &PointSet, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in [1, {}], got {k}",
            points.len()
        )));
    }
    (0..restarts.max(1))
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            lloyd(points, plus_plus_seed(points, k, &mut rng))
        })
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .ok_or_else(|| Error::InvalidArgument("no restarts".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preset_dataset, Preset};
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_cluster_is_the_mean() {
        let p = preset_dataset(Preset::ThreeEqual, 1);
        let r = kmeans(&p, 1, 0, 3).unwrap();
        let mean = p.mean();
        assert_abs_diff_eq!(r.centroids[(0, 0)], mean[0], epsilon = 1e-12);
        assert_abs_diff_eq!(r.centroids[(0, 1)], mean[1], epsilon = 1e-12);
        let total: f64 = (0..p.len())
            .map(|i| {
                let x = p.point(i);
                (x[0] - mean[0]).powi(2) + (x[1] - mean[1]).powi(2)
            })
            .sum();
        assert_abs_diff_eq!(r.inertia, total, epsilon = 1e-9);
    }

    #[test]
    fn two_points_two_clusters() {
        let p = PointSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 1.0]], None).unwrap();
        let r = kmeans(&p, 2, 9, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_ne!(r.assignment[0], r.assignment[1]);
    }

    #[test]
    fn lloyd_invariants() {
        let p = preset_dataset(Preset::FiveMultiscale, 2);
        let r = kmeans(&p, 5, 4, 5).unwrap();
        assert!(r.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        for i in 0..p.len() {
            assert_eq!(r.assignment[i], r.predict(p.point(i)));
        }
        for c in 0..5 {
            let members: Vec<usize> = (0..p.len()).filter(|&i| r.assignment[i] == c).collect();
            assert!(!members.is_empty());
            for d in 0..2 {
                let m = members.iter().map(|&i| p.point(i)[d]).sum::<f64>() / members.len() as f64;
                assert_abs_diff_eq!(r.centroids[(c, d)], m, epsilon = 1e-9);
            }
        }
        assert!(kmeans(&p, 0, 0, 1).is_err());
        assert!(kmeans(&p, 251, 0, 1).is_err());
    }
}

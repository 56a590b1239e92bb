//! Exact information measures on tabulated distributions, in nats.
//!
//! Conventions: `0 ln 0 = 0`, `0 ln(0/q) = 0`, and `p ln(p/0) = +inf` for
//! `p > 0`.

use ndarray::{Array2, ArrayView2, Axis};

use crate::dib::HardClustering;
use crate::error::{Error, Result};
use crate::smoothing::JointDistribution;

/// A validated probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution(Vec<f64>);

impl DiscreteDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if probabilities.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteDistribution(probabilities))
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteDistribution(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }

    pub fn kl(&self, other: &DiscreteDistribution) -> Result<f64> {
        kl_divergence(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for DiscreteDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).fold(0.0, |a, b| a + b)
}

/// `KL[p || q]`; `+inf` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Mutual information between the row and column variables of a joint
/// table whose entries sum to one.
pub fn mutual_information(joint: ArrayView2<'_, f64>) -> f64 {
    let rows = joint.sum_axis(Axis(1));
    let cols = joint.sum_axis(Axis(0));
    let mut total = 0.0;
    for ((r, c), &p) in joint.indexed_iter() {
        if p > 0.0 {
            total += p * (p / (rows[r] * cols[c])).ln();
        }
    }
    total.max(0.0)
}

/// The `(c, x)` joint `sum_i q(c|i) p(i) p(x|i)` induced by a hard clustering.
pub fn cluster_location_joint(clustering: &HardClustering, joint: &JointDistribution) -> Result<Array2<f64>> {
    if clustering.n_points() != joint.n_points() {
        return Err(Error::LengthMismatch {
            left: clustering.n_points(),
            right: joint.n_points(),
        });
    }
    let mut table = Array2::zeros((clustering.n_clusters(), joint.n_cells()));
    let pi = joint.point_mass();
    for (i, &c) in clustering.assignment().iter().enumerate() {
        table.row_mut(c).scaled_add(pi, &joint.row(i));
    }
    Ok(table)
}

/// `I(c;x) / I(i;x)`: the share of the available spatial information a
/// clustering keeps.
pub fn fractional_spatial_info(clustering: &HardClustering, joint: &JointDistribution) -> Result<f64> {
    let available = mutual_information(joint.joint_table().view());
    if available <= 1e-14 {
        return Err(Error::NoSpatialInformation);
    }
    let kept = mutual_information(cluster_location_joint(clustering, joint)?.view());
    Ok(kept / available)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn entropy_values() {
        assert_abs_diff_eq!(DiscreteDistribution::uniform(8).entropy(), 8f64.ln(), epsilon = 1e-15);
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
        assert_abs_diff_eq!(entropy(&[0.5, 0.25, 0.25]), 1.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn kl_values() {
        let p = DiscreteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.kl(&p).unwrap(), 0.0);
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), f64::INFINITY);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_abs_diff_eq!(kl_divergence(&[0.75, 0.25], &[0.5, 0.5]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.13081, epsilon = 1e-5);
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
        // zero mass in p where q is zero is fine
        assert_abs_diff_eq!(kl_divergence(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn mi_values() {
        let pr = [0.2, 0.8];
        let pc = [0.1, 0.6, 0.3];
        let product = Array2::from_shape_fn((2, 3), |(r, c)| pr[r] * pc[c]);
        assert_abs_diff_eq!(mutual_information(product.view()), 0.0, epsilon = 1e-15);

        let diag = Array2::from_shape_fn((5, 5), |(r, c)| if r == c { 0.2 } else { 0.0 });
        assert_abs_diff_eq!(mutual_information(diag.view()), 5f64.ln(), epsilon = 1e-14);

        let j = array![[0.1, 0.2, 0.0], [0.3, 0.05, 0.35]];
        assert_abs_diff_eq!(
            mutual_information(j.view()),
            mutual_information(j.t()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DiscreteDistribution::new(vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![1.5, -0.5]).is_err());
    }
}

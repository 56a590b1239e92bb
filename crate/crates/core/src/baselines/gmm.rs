//! Full-covariance Gaussian mixture fitted by expectation maximization.

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};

use crate::data::{GaussianComponent, GaussianDensity, PointSet};
use crate::dib::derive_seed;
use crate::error::{Error, Result};

use super::kmeans::kmeans;

#[derive(Clone, Debug)]
pub struct GmmResult {
    pub components: Vec<GaussianComponent>,
    /// `N x k`, rows sum to one.
    pub responsibilities: Array2<f64>,
    pub log_likelihood: f64,
    pub log_likelihood_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A covariance had to be regularized with a small ridge.
    pub ridge_applied: bool,
}

impl GmmResult {
    /// Hard maximum-likelihood label: `argmax_k ln w_k + ln N(x; mu_k, Sigma_k)`.
    pub fn predict(&self, x: &[f64]) -> usize {
        classify(&self.densities(), &self.log_weights(), x)
    }

    pub fn densities(&self) -> Vec<GaussianDensity> {
        self.components.iter().map(GaussianComponent::density).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight.ln()).collect()
    }
}

pub(crate) fn classify(densities: &[GaussianDensity], log_weights: &[f64], x: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, (d, lw)) in densities.iter().zip(log_weights).enumerate() {
        let s = lw + d.log_pdf(x);
        if s > best.1 {
            best = (k, s);
        }
    }
    best.0
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<DMatrix<f64>>,
}

fn data_variance(points: &PointSet) -> f64 {
    let mean = points.mean();
    let n = points.len() as f64;
    let total: f64 = (0..points.len())
        .map(|i| {
            points
                .point(i)
                .iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum();
    let v = total / (n * points.dim() as f64);
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Weighted MLE of mean and covariance given responsibilities in column `k`.
fn m_step(points: &PointSet, resp: &Array2<f64>, ridge: f64, ridge_applied: &mut bool) -> Params {
    let n = points.len();
    let d = points.dim();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let col = resp.column(c);
        let nk: f64 = col.sum();
        let nk_safe = nk.max(f64::MIN_POSITIVE);
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(points.point(i)) {
                *m += col[i] * x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk_safe);
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..n {
            let x = points.point(i);
            for r in 0..d {
                for s in 0..d {
                    cov[(r, s)] += col[i] * (x[r] - mean[r]) * (x[s] - mean[s]);
                }
            }
        }
        cov /= nk_safe;
        if cov.clone().cholesky().is_none() || nk < 1e-12 {
            *ridge_applied = true;
            for r in 0..d {
                cov[(r, r)] += ridge;
            }
        }
        weights.push(nk / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    Params { weights, means, covs }
}

/// E-step: responsibilities and the log-likelihood of the current parameters.
fn e_step(points: &PointSet, params: &Params) -> (Array2<f64>, f64) {
    let n = points.len();
    let k = params.weights.len();
    let densities: Vec<Option<GaussianDensity>> = params
        .means
        .iter()
        .zip(&params.covs)
        .map(|(m, c)| GaussianDensity::new(m, c))
        .collect();
    let mut resp = Array2::zeros((n, k));
    let mut ll = 0.0;
    for i in 0..n {
        let x = points.point(i);
        let logs: Vec<f64> = (0..k)
            .map(|c| match &densities[c] {
                Some(d) if params.weights[c] > 0.0 => params.weights[c].ln() + d.log_pdf(x),
                _ => f64::NEG_INFINITY,
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        ll += top + z.ln();
        for c in 0..k {
            resp[(i, c)] = (logs[c] - top).exp() / z;
        }
    }
    (resp, ll)
}

fn fit_once(points: &PointSet, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<GmmResult> {
    let n = points.len();
    let ridge = 1e-6 * data_variance(points);
    let init = kmeans(points, k, seed, 1)?;
    let mut resp = Array2::zeros((n, k));
    for (i, &c) in init.assignment.iter().enumerate() {
        resp[(i, c)] = 1.0;
    }
    let mut ridge_applied = false;
    let mut params = m_step(points, &resp, ridge, &mut ridge_applied);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (r, ll) = e_step(points, &params);
        resp = r;
        history.push(ll);
        if history.len() >= 2 {
            let prev = history[history.len() - 2];
            if (ll - prev).abs() < tol {
                converged = true;
                break;
            }
        }
        if iterations >= max_iter {
            break;
        }
        params = m_step(points, &resp, ridge, &mut ridge_applied);
        iterations += 1;
    }
    let components = (0..k)
        .map(|c| {
            let d = points.dim();
            let cov = (0..d)
                .map(|r| (0..d).map(|s| params.covs[c][(r, s)]).collect())
                .collect();
            GaussianComponent::new(params.means[c].clone(), cov, params.weights[c].max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;
    Ok(GmmResult {
        components,
        responsibilities: resp,
        log_likelihood: *history.last().expect("one E-step"),
        log_likelihood_history: history,
        iterations,
        converged,
        ridge_applied,
    })
}

/// Best-likelihood EM fit over `restarts` k-means initializations.
pub fn gmm_em(
    points: &PointSet,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<GmmResult> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in [1, {}], got {k}",
            points.len()
        )));
    }
    let mut best: Option<GmmResult> = None;
    for r in 0..restarts.max(1) {
        let fit = fit_once(points, k, derive_seed(seed, r as u64), max_iter, tol)?;
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Rows of a responsibility table, for checks.
pub fn responsibility_row_sums(resp: &Array2<f64>) -> Vec<f64> {
    resp.sum_axis(Axis(1)).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preset_dataset, Preset};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_component_is_the_sample_moments() {
        let p = preset_dataset(Preset::SymmetricPlusSkew, 3);
        let fit = gmm_em(&p, 1, 0, 1, 100, 1e-10).unwrap();
        let c = &fit.components[0];
        let mean = p.mean();
        let n = p.len() as f64;
        for r in 0..2 {
            assert_abs_diff_eq!(c.mean[r], mean[r], epsilon = 1e-10);
            for s in 0..2 {
                let cov: f64 = (0..p.len())
                    .map(|i| (p.point(i)[r] - mean[r]) * (p.point(i)[s] - mean[s]))
                    .sum::<f64>()
                    / n;
                assert_abs_diff_eq!(c.covariance[r][s], cov, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(c.weight, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn em_invariants_and_recovery() {
        let p = preset_dataset(Preset::SymmetricPlusSkew, 5);
        let fit = gmm_em(&p, 2, 1, 3, 500, 1e-10).unwrap();
        for s in responsibility_row_sums(&fit.responsibilities) {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        assert!(fit
            .log_likelihood_history
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9));
        let truth = Preset::SymmetricPlusSkew.mixture();
        for g in truth.components() {
            let closest = fit
                .components
                .iter()
                .map(|c| ((c.mean[0] - g.mean[0]).powi(2) + (c.mean[1] - g.mean[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 0.3, "mean error {closest}");
        }
    }

    #[test]
    fn duplicate_points_get_a_ridge() {
        let rows = vec![vec![1.0, 1.0]; 6];
        let p = PointSet::from_rows(&rows, None).unwrap();
        let fit = gmm_em(&p, 1, 0, 1, 20, 1e-10).unwrap();
        assert!(fit.ridge_applied);
        assert!(fit.log_likelihood.is_finite());
    }
}

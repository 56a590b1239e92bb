//! Closed-form scores for classifying a point between Gaussian clusters.
//!
//! The GMM hard score of a point is `ln w - T` with
//! `T = (x - mu)^T Sigma^-1 (x - mu) / 2 + ln|Sigma| / 2`. The DIB score
//! smooths the point into `N(x, s^2 I)` and uses
//! `ln w - beta KL[N(x, s^2 I) || N(mu, Sigma)]`. For diagonal
//! `Sigma = diag(sigma_1^2, sigma_2^2)` the divergence is
//!
//! ```text
//! s^2 (sigma_1^2 + sigma_2^2) / (2 sigma_1^2 sigma_2^2)
//!   + x_1^2 / (2 sigma_1^2) + x_2^2 / (2 sigma_2^2) - k/2 + ln(sigma_1 sigma_2 / s^2)
//! ```
//!
//! which differs from `T` only by terms that vanish as `s -> 0` when the
//! clusters share `beta = 1` or equal weights.
//!
//! Covariances are variances: `diag(sigma_1, sigma_2)` in the two-cluster
//! setup means per-axis standard deviations `sigma_1`, `sigma_2`.

use crate::data::GaussianComponent;

/// `ln w - T` for the component's own weight.
pub fn gmm_hard_score(point: &[f64], component: &GaussianComponent) -> f64 {
    let d = component.density();
    component.weight.ln() - 0.5 * (d.mahalanobis_sq(point) + d.log_det())
}

/// `KL[N(point, s^2 I) || N(mu, Sigma)]` in nats.
pub fn gaussian_kl_from_isotropic(point: &[f64], s: f64, component: &GaussianComponent) -> f64 {
    let d = component.density();
    let k = component.dim() as f64;
    let trace: f64 = (0..component.dim()).map(|r| d.precision()[(r, r)]).sum();
    0.5 * (s * s * trace + d.mahalanobis_sq(point) - k + d.log_det() - k * (s * s).ln())
}

/// `ln weight - beta KL[N(point, s^2 I) || component]`.
pub fn dib_point_score(point: &[f64], s: f64, component: &GaussianComponent, weight: f64, beta: f64) -> f64 {
    weight.ln() - beta * gaussian_kl_from_isotropic(point, s, component)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Some(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Root of `f` on the line, searching outward from `[lo, hi]`.
fn bracketed_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let width = hi - lo;
    for grow in [0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
        let (a, b) = (lo - grow * width, hi + grow * width);
        if let Some(r) = bisect_root(&f, a, b, 1e-13 * (1.0 + b.abs())) {
            return Some(r);
        }
    }
    None
}

/// One axis-aligned cluster at the origin with standard deviations
/// `(sigma1, sigma2)` and one isotropic cluster of standard deviation
/// `sigma` at `(separation, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoClusterSetup {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub separation: f64,
    pub w1: f64,
    pub w2: f64,
}

impl TwoClusterSetup {
    pub fn symmetric(sigma: f64, separation: f64) -> Self {
        TwoClusterSetup {
            sigma1: sigma,
            sigma2: sigma,
            sigma,
            separation,
            w1: 0.5,
            w2: 0.5,
        }
    }

    pub fn with_weights(self, w1: f64, w2: f64) -> Self {
        TwoClusterSetup { w1, w2, ..self }
    }

    pub fn components(&self) -> [GaussianComponent; 2] {
        [
            GaussianComponent::diagonal(vec![0.0, 0.0], &[self.sigma1.powi(2), self.sigma2.powi(2)], self.w1)
                .expect("positive variances"),
            GaussianComponent::isotropic(vec![self.separation, 0.0], self.sigma.powi(2), self.w2)
                .expect("positive variance"),
        ]
    }

    /// GMM hard score difference (cluster 1 minus cluster 2).
    pub fn gmm_margin(&self, x: &[f64]) -> f64 {
        let [a, b] = self.components();
        gmm_hard_score(x, &a) - gmm_hard_score(x, &b)
    }

    /// DIB score difference (cluster 1 minus cluster 2).
    pub fn dib_margin(&self, x: &[f64], s: f64, beta: f64) -> f64 {
        let [a, b] = self.components();
        dib_point_score(x, s, &a, self.w1, beta) - dib_point_score(x, s, &b, self.w2, beta)
    }

    pub fn gmm_label(&self, x: &[f64]) -> usize {
        usize::from(self.gmm_margin(x) < 0.0)
    }

    pub fn dib_label(&self, x: &[f64], s: f64, beta: f64) -> usize {
        usize::from(self.dib_margin(x, s, beta) < 0.0)
    }

    /// Where the GMM boundary crosses the `x_1` axis.
    pub fn gmm_root_x1(&self) -> Option<f64> {
        bracketed_root(|x| self.gmm_margin(&[x, 0.0]), 0.0, self.separation)
    }

    /// Where the DIB boundary crosses the `x_1` axis.
    pub fn dib_root_x1(&self, s: f64, beta: f64) -> Option<f64> {
        bracketed_root(|x| self.dib_margin(&[x, 0.0], s, beta), 0.0, self.separation)
    }
}

/// Axis crossings of the DIB boundary with weights `(w1, w2)` at tradeoff
/// `beta`, and of the GMM boundary with weights `w^(1/beta)` renormalized.
/// The two coincide as `s -> 0`.
pub fn weight_rescaling_check(setup: &TwoClusterSetup, beta: f64, s: f64) -> (Option<f64>, Option<f64>) {
    let dib = setup.dib_root_x1(s, beta);
    let (a, b) = (setup.w1.powf(1.0 / beta), setup.w2.powf(1.0 / beta));
    let rescaled = setup.with_weights(a / (a + b), b / (a + b));
    (dib, rescaled.gmm_root_x1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bisector_for_equal_clusters() {
        let setup = TwoClusterSetup::symmetric(1.3, 5.0);
        for y in [-3.0, 0.0, 2.2] {
            assert_abs_diff_eq!(setup.gmm_margin(&[2.5, y]), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hard_score_at_center() {
        let sigma: f64 = 1.7;
        let c = GaussianComponent::isotropic(vec![0.0, 0.0], sigma * sigma, 1.0).unwrap();
        // ln w - T with w = 1 and T = ln sigma^2
        assert_abs_diff_eq!(gmm_hard_score(&[0.0, 0.0], &c), -(sigma * sigma).ln(), epsilon = 1e-12);
    }

    #[test]
    fn diagonal_hard_score_matches_closed_form() {
        let (s1, s2) = (0.8f64, 2.1f64);
        let c = GaussianComponent::diagonal(vec![0.0, 0.0], &[s1 * s1, s2 * s2], 0.3).unwrap();
        let x = [1.2, -0.7];
        let t1 = x[0] * x[0] / (2.0 * s1 * s1) + x[1] * x[1] / (2.0 * s2 * s2) + (s1 * s2).ln();
        assert_abs_diff_eq!(gmm_hard_score(&x, &c), 0.3f64.ln() - t1, epsilon = 1e-12);
    }

    #[test]
    fn kl_closed_forms() {
        let s = 0.6;
        let p = [0.4, -1.1];
        let same = GaussianComponent::isotropic(p.to_vec(), s * s, 1.0).unwrap();
        assert_abs_diff_eq!(gaussian_kl_from_isotropic(&p, s, &same), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dib_point_score(&p, s, &same, 0.25, 3.0), 0.25f64.ln(), epsilon = 1e-12);

        // axis-aligned cluster at the origin
        let (s1, s2) = (0.8f64, 2.1f64);
        let c1 = GaussianComponent::diagonal(vec![0.0, 0.0], &[s1 * s1, s2 * s2], 1.0).unwrap();
        let kl1 = s * s * (s1 * s1 + s2 * s2) / (2.0 * s1 * s1 * s2 * s2)
            + p[0] * p[0] / (2.0 * s1 * s1)
            + p[1] * p[1] / (2.0 * s2 * s2)
            - 1.0
            + (s1 * s2 / (s * s)).ln();
        assert_abs_diff_eq!(gaussian_kl_from_isotropic(&p, s, &c1), kl1, epsilon = 1e-12);

        // isotropic cluster evaluated at its own center
        let (sigma, l) = (1.4f64, 4.0);
        let c2 = GaussianComponent::isotropic(vec![l, 0.0], sigma * sigma, 1.0).unwrap();
        let kl2 = s * s / (sigma * sigma) - 1.0 + (sigma * sigma / (s * s)).ln();
        assert_abs_diff_eq!(gaussian_kl_from_isotropic(&[l, 0.0], s, &c2), kl2, epsilon = 1e-12);
    }

    #[test]
    fn unequal_weight_boundary_root() {
        // Independent oracle: scan-and-bisect on the raw Gaussian log densities.
        let f = |x: f64| {
            let l1 = (2.0f64).ln() - 0.5 * x * x;
            let l2 = (1.0f64).ln() - 0.5 * (x - 4.0) * (x - 4.0);
            l1 - l2
        };
        let mut a = 0.0;
        let mut b = 4.0;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                a = m
            } else {
                b = m
            }
        }
        let oracle = 0.5 * (a + b);
        // frozen: 2 + ln(2)/4
        assert_abs_diff_eq!(oracle, 2.173_286_795_139_986_3, epsilon = 1e-12);
        let setup = TwoClusterSetup::symmetric(1.0, 4.0).with_weights(2.0, 1.0);
        assert_abs_diff_eq!(setup.gmm_root_x1().unwrap(), oracle, epsilon = 1e-10);
    }

    #[test]
    fn small_s_matches_gmm_signs() {
        use rand::{Rng, SeedableRng};
        let setup = TwoClusterSetup {
            sigma1: 0.7,
            sigma2: 1.6,
            sigma: 1.0,
            separation: 4.0,
            w1: 0.5,
            w2: 0.5,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.random_range(-4.0..8.0), rng.random_range(-5.0..5.0)];
            let g = setup.gmm_margin(&x);
            if g.abs() < 1e-4 {
                continue;
            }
            assert_eq!(setup.dib_margin(&x, 1e-3, 1.0).signum(), g.signum());
        }
    }

    #[test]
    fn rescaling_identities() {
        let base = TwoClusterSetup::symmetric(1.0, 4.0).with_weights(0.7, 0.3);
        let (dib, gmm) = weight_rescaling_check(&base, 1.0, 1e-3);
        assert_abs_diff_eq!(dib.unwrap(), base.gmm_root_x1().unwrap(), epsilon = 1e-6);
        assert_abs_diff_eq!(gmm.unwrap(), base.gmm_root_x1().unwrap(), epsilon = 1e-9);

        let even = TwoClusterSetup::symmetric(1.0, 4.0);
        for beta in [1.0, 2.0, 7.5] {
            let (d, g) = weight_rescaling_check(&even, beta, 1e-3);
            assert_abs_diff_eq!(d.unwrap(), 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(g.unwrap(), 2.0, epsilon = 1e-9);
        }
    }
}

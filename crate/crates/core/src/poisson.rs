//! DC-signal estimation over the Poisson channel: minimax Bayesian,
//! clipped ML, and uniform-prior filters.

use crate::capacity::{adaptive_simpson, log_sum_exp};
use crate::distributions::DiscreteDistribution;

/// A DC estimation scenario: constant intensity in [lo, hi] over [0, T].
#[derive(Debug, Clone, Copy)]
pub struct DcScenario {
    pub lo: f64,
    pub hi: f64,
    pub horizon: f64,
    pub truth: f64,
}

impl DcScenario {
    pub fn new(lo: f64, hi: f64, horizon: f64, truth: f64) -> Self {
        assert!(lo > 0.0 && hi > lo && horizon > 0.0);
        assert!((lo..=hi).contains(&truth));
        Self { lo, hi, horizon, truth }
    }
}

/// Posterior mean of X given Y_t = count under a finite prior, computed in
/// the log domain: sum_i x_i p_i e^{-x_i t} (x_i t)^count / normalizer.
pub fn poisson_posterior_mean(prior: &DiscreteDistribution, t: f64, count: u64) -> f64 {
    assert!(t >= 0.0);
    if t == 0.0 {
        return prior.mean();
    }
    let logw: Vec<f64> = prior
        .iter()
        .map(|(x, p)| p.ln() - x * t + count as f64 * (x * t).ln())
        .collect();
    let lse = log_sum_exp(&logw);
    prior
        .iter()
        .zip(&logw)
        .map(|((x, _), &lw)| x * (lw - lse).exp())
        .sum()
}

/// Clipped maximum-likelihood estimate min{max{lo, count/t}, hi}.
/// By convention t = 0 returns lo.
pub fn ml_clipped(t: f64, count: u64, lo: f64, hi: f64) -> f64 {
    if t <= 0.0 {
        return lo;
    }
    (count as f64 / t).clamp(lo, hi)
}

/// Bayes estimate under the uniform prior on [lo, hi]:
/// (Y+1)/t + (e^{-lo t} lo^{Y+1} - e^{-hi t} hi^{Y+1}) / (t * int_lo^hi e^{-xt} x^Y dx),
/// with all terms combined in the log domain. t = 0 returns the prior mean.
pub fn uniform_prior_filter(t: f64, count: u64, lo: f64, hi: f64) -> f64 {
    assert!(lo > 0.0 && hi > lo);
    if t <= 0.0 {
        return 0.5 * (lo + hi);
    }
    let y = count as f64;
    // peak of the integrand exponent over [lo, hi]; factoring it out keeps
    // the quadrature and the boundary terms in range for large counts
    let exponent = |x: f64| y * x.ln() - x * t;
    let x_star = (y / t).clamp(lo, hi);
    let m = exponent(x_star);
    let integrand = |x: f64| (exponent(x) - m).exp();
    let integral = adaptive_simpson(&integrand, lo, hi, 1e-13);
    // boundary terms: e^{-at} a^{y+1} - e^{-At} A^{y+1} = a e^{g(a)} - A e^{g(A)}
    let term_lo = lo * (exponent(lo) - m).exp();
    let term_hi = hi * (exponent(hi) - m).exp();
    let est = (y + 1.0) / t + (term_lo - term_hi) / (t * integral);
    // posterior mean of a prior supported on [lo, hi]
    debug_assert!(est > lo - 1e-9 && est < hi + 1e-9, "estimate {est} outside ({lo},{hi})");
    est.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn posterior_mean_single_atom() {
        let prior = DiscreteDistribution::point_mass(1.3);
        for &(t, c) in &[(0.0, 0u64), (2.0, 5), (10.0, 0)] {
            assert_abs_diff_eq!(poisson_posterior_mean(&prior, t, c), 1.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn posterior_mean_at_zero_time_is_prior_mean() {
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(poisson_posterior_mean(&prior, 0.0, 0), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn posterior_mean_matches_direct_two_term_formula() {
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let (t, count) = (10.0f64, 20u64);
        let w1 = 0.5 * (-0.5 * t).exp() * (0.5 * t).powi(count as i32);
        let w2 = 0.5 * (-2.0 * t).exp() * (2.0 * t).powi(count as i32);
        let direct = (0.5 * w1 + 2.0 * w2) / (w1 + w2);
        assert_abs_diff_eq!(
            poisson_posterior_mean(&prior, t, count),
            direct,
            epsilon = 1e-12
        );
    }

    #[test]
    fn posterior_mean_monotone_in_count() {
        let prior =
            DiscreteDistribution::new(vec![0.5, 1.0, 1.5, 2.0], vec![0.4, 0.2, 0.2, 0.2]).unwrap();
        for t in [0.5, 2.0, 7.5, 10.0] {
            let mut prev = f64::NEG_INFINITY;
            for count in 0..60u64 {
                let est = poisson_posterior_mean(&prior, t, count);
                assert!(est >= prev - 1e-12, "t={t} count={count}");
                assert!((0.5..=2.0).contains(&est));
                prev = est;
            }
        }
    }

    #[test]
    fn ml_clipped_examples() {
        assert_abs_diff_eq!(ml_clipped(1.0, 0, 0.5, 2.0), 0.5);
        assert_abs_diff_eq!(ml_clipped(2.0, 3, 0.5, 2.0), 1.5);
        assert_abs_diff_eq!(ml_clipped(2.0, 10, 0.5, 2.0), 2.0);
        assert_abs_diff_eq!(ml_clipped(0.0, 7, 0.5, 2.0), 0.5);
    }

    #[test]
    fn uniform_filter_stays_in_bounds() {
        for t in [0.1, 1.0, 5.0, 10.0] {
            for count in [0u64, 1, 5, 20, 60] {
                let est = uniform_prior_filter(t, count, 0.5, 2.0);
                assert!((0.5..=2.0).contains(&est), "t={t} count={count} est={est}");
            }
        }
    }

    #[test]
    fn uniform_filter_small_time_limit_is_midpoint() {
        let est = uniform_prior_filter(1e-6, 0, 0.5, 2.0);
        assert_abs_diff_eq!(est, 1.25, epsilon = 1e-4);
    }

    #[test]
    fn uniform_filter_matches_bayes_quadrature_oracle() {
        // independent oracle: E[X L]/E[L] by direct quadrature under the
        // uniform prior, L(x) = e^{-xt}(xt)^y
        let (lo, hi) = (0.5, 2.0);
        for &(t, count) in &[(10.0, 10u64), (3.0, 2), (10.0, 40), (1.0, 0)] {
            let y = count as f64;
            let num = adaptive_simpson(&|x: f64| x * (-x * t).exp() * (x * t).powf(y), lo, hi, 1e-14);
            let den = adaptive_simpson(&|x: f64| (-x * t).exp() * (x * t).powf(y), lo, hi, 1e-14);
            let oracle = num / den;
            assert_abs_diff_eq!(
                uniform_prior_filter(t, count, lo, hi),
                oracle,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn uniform_filter_agrees_with_fine_discretization() {
        // 400-atom uniform discretization of [lo, hi]
        let (lo, hi) = (0.5, 2.0);
        let n = 400;
        let atoms: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
            .collect();
        let prior = DiscreteDistribution::normalize(&vec![1.0; n], &atoms).unwrap();
        for t in [0.5, 2.0, 5.0, 10.0] {
            for count in [0u64, 3, 10, 30, 60] {
                let a = uniform_prior_filter(t, count, lo, hi);
                let b = poisson_posterior_mean(&prior, t, count);
                assert!((a - b).abs() <= 1e-3, "t={t} count={count}: {a} vs {b}");
            }
        }
    }
}

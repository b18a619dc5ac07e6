//! Path simulation for the Gaussian and Poisson observation channels and
//! Monte-Carlo evaluation of cmle, regret, and the analytic output-KL
//! oracle for DC sources.
//!
//! Trials are independent tasks keyed by (seed, trial); aggregation sums
//! per-trial results in trial-index order, so parallel and serial runs
//! produce identical bytes.

use crate::capacity::{adaptive_simpson, ln_factorial_table, log_sum_exp, poisson_truncation};
use crate::distributions::DiscreteDistribution;
use crate::gaussian::BasisSystem;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("filter returned nonpositive estimate {0} under the poisson loss")]
    NonpositiveEstimate(f64),
}

/// Discretized sample path of (X_t, Y_t) on a uniform grid.
#[derive(Debug, Clone)]
pub struct PathRecord {
    /// strictly increasing times 0 = t_0 < ... < t_M = T
    pub grid: Vec<f64>,
    /// signal samples X_{t_k}
    pub x: Vec<f64>,
    /// cumulative observation: Y_t for the Gaussian channel, the counting
    /// process N_t for the Poisson channel
    pub y: Vec<f64>,
    pub dt: f64,
    pub seed: u64,
}

impl PathRecord {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }
}

/// Deterministic per-trial RNG stream: independent streams keyed by
/// (seed, trial) so trial-level parallelism cannot change results.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    // splitmix64 over the pair
    let mut z = seed ^ trial.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31) ^ trial)
}

/// Euler-Maruyama path of dY = X dt + dW for X_t = sum a_i phi_i(t).
/// With `noise` off the path is the exact grid integral of X (test hook).
pub fn simulate_awgn(
    basis: &BasisSystem,
    coef: &[f64],
    dt: f64,
    seed: u64,
    noise: bool,
) -> PathRecord {
    let horizon = basis.horizon();
    let steps = (horizon / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = Vec::with_capacity(steps + 1);
    let mut x = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let sqrt_dt = dt.sqrt();
    let mut yv = 0.0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        grid.push(t);
        x.push(basis.signal(coef, t));
        y.push(yv);
        if k < steps {
            let xi: f64 = if noise { rng.sample(StandardNormal) } else { 0.0 };
            yv += basis.signal(coef, t) * dt + sqrt_dt * xi;
        }
    }
    PathRecord { grid, x, y, dt, seed }
}

/// DC Gaussian path: constant signal x over [0, T].
pub fn simulate_awgn_dc(x: f64, horizon: f64, dt: f64, seed: u64) -> PathRecord {
    let steps = (horizon / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = dt.sqrt();
    let mut grid = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut yv = 0.0;
    for k in 0..=steps {
        grid.push(k as f64 * dt);
        xs.push(x);
        y.push(yv);
        if k < steps {
            let xi: f64 = rng.sample(StandardNormal);
            yv += x * dt + sqrt_dt * xi;
        }
    }
    PathRecord { grid, x: xs, y, dt, seed }
}

/// Homogeneous Poisson counting process with intensity x: exact
/// exponential inter-arrival sampling, counts registered onto the grid.
pub fn simulate_poisson(x: f64, horizon: f64, dt: f64, seed: u64) -> PathRecord {
    assert!(x > 0.0);
    let steps = (horizon / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen::<f64>();
        t += -u.ln() / x;
        if t > horizon {
            break;
        }
        arrivals.push(t);
    }
    let mut grid = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut y = Vec::with_capacity(steps + 1);
    let mut idx = 0usize;
    for k in 0..=steps {
        let tk = k as f64 * dt;
        while idx < arrivals.len() && arrivals[idx] <= tk {
            idx += 1;
        }
        grid.push(tk);
        xs.push(x);
        y.push(idx as f64);
    }
    PathRecord { grid, x: xs, y, dt, seed }
}

/// Loss functions for cmle integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// l(x, xh) = (x - xh)^2 / 2
    HalfSquared,
    /// l(x, xh) = x log(x/xh) - x + xh
    NaturalPoisson,
}

impl Loss {
    pub fn eval(&self, x: f64, xh: f64) -> Result<f64, SimError> {
        match self {
            Loss::HalfSquared => Ok(0.5 * (x - xh) * (x - xh)),
            Loss::NaturalPoisson => {
                if xh <= 0.0 {
                    return Err(SimError::NonpositiveEstimate(xh));
                }
                let term = if x > 0.0 { x * (x / xh).ln() } else { 0.0 };
                Ok(term - x + xh)
            }
        }
    }
}

/// Trapezoidal time integral of the loss along one path for a causal
/// filter evaluated at every grid point.
pub fn path_loss<F>(path: &PathRecord, filter: F, loss: Loss) -> Result<f64, SimError>
where
    F: Fn(&PathRecord, usize) -> f64,
{
    let m = path.grid.len();
    let mut acc = 0.0;
    let mut prev = loss.eval(path.x[0], filter(path, 0))?;
    for k in 1..m {
        let cur = loss.eval(path.x[k], filter(path, k))?;
        acc += 0.5 * (prev + cur) * (path.grid[k] - path.grid[k - 1]);
        prev = cur;
    }
    Ok(acc)
}

/// Monte-Carlo estimate of cmle = E int_0^T l(X_t, Xhat_t) dt.
///
/// `paths` builds the trial path from its index; `filter` must be causal
/// (consume only samples up to the given grid index). Returns
/// (mean, stderr) with stderr = sample std / sqrt(trials).
pub fn cmle_estimate<P, F>(
    paths: P,
    filter: F,
    loss: Loss,
    trials: u64,
) -> Result<(f64, f64), SimError>
where
    P: Fn(u64) -> PathRecord + Sync,
    F: Fn(&PathRecord, usize) -> f64 + Sync,
{
    let losses: Result<Vec<f64>, SimError> = (0..trials)
        .into_par_iter()
        .map(|trial| path_loss(&paths(trial), &filter, loss))
        .collect();
    let losses = losses?;
    // ordered reduction: sum in trial-index order
    let mean = losses.iter().sum::<f64>() / trials as f64;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
        / (trials.max(2) - 1) as f64;
    Ok((mean, (var / trials as f64).sqrt()))
}

/// One row of a regret report.
#[derive(Debug, Clone)]
pub struct RegretRow {
    pub source_id: String,
    pub cmle: f64,
    pub stderr: f64,
    pub regret: f64,
    pub analytic_kl: Option<f64>,
}

/// Per-source cmle/regret summary with the worst case highlighted.
#[derive(Debug, Clone)]
pub struct RegretReport {
    pub filter_name: String,
    pub rows: Vec<RegretRow>,
    pub trials: u64,
}

impl RegretReport {
    pub fn worst_case(&self) -> &RegretRow {
        self.rows
            .iter()
            .max_by(|a, b| a.regret.partial_cmp(&b.regret).unwrap())
            .expect("nonempty report")
    }
}

/// Per-source regret of a named filter battery over deterministic sources
/// (benchmark cmle is zero) or sources with a supplied benchmark.
pub fn regret_report<P, F>(
    filter_name: &str,
    sources: &[(String, f64)], // (id, benchmark cmle)
    paths: P,
    filter: F,
    loss: Loss,
    trials: u64,
) -> Result<RegretReport, SimError>
where
    P: Fn(usize, u64) -> PathRecord + Sync,
    F: Fn(usize, &PathRecord, usize) -> f64 + Sync,
{
    let mut rows = Vec::with_capacity(sources.len());
    for (si, (id, benchmark)) in sources.iter().enumerate() {
        let (mean, stderr) = cmle_estimate(
            |trial| paths(si, trial),
            |p, k| filter(si, p, k),
            loss,
            trials,
        )?;
        rows.push(RegretRow {
            source_id: id.clone(),
            cmle: mean,
            stderr,
            regret: mean - benchmark,
            analytic_kl: None,
        });
    }
    Ok(RegretReport { filter_name: filter_name.to_string(), rows, trials })
}

/// Analytic KL between output laws for DC sources, where sufficiency
/// reduces the path divergence to the terminal statistic:
/// Gaussian -> D(N(xT, T) || mixture of N(x_i T, T));
/// Poisson  -> D(Poi(xT) || mixture of Poi(x_i T)).
pub fn kl_output_oracle_gaussian(x: f64, mixture: &DiscreteDistribution, horizon: f64) -> f64 {
    let t = horizon;
    let sd = t.sqrt();
    let mean = x * t;
    let lo = mean - 10.0 * sd;
    let hi = mean + 10.0 * sd;
    let atoms: Vec<f64> = mixture.atoms().iter().map(|&a| a * t).collect();
    let log_probs: Vec<f64> = mixture.probs().iter().map(|&p| p.ln()).collect();
    let f = |y: f64| {
        let d = (y - mean) / sd;
        let logp = -0.5 * d * d - 0.5 * (2.0 * std::f64::consts::PI * t).ln();
        let logq_terms: Vec<f64> = atoms
            .iter()
            .zip(&log_probs)
            .map(|(&m, &lp)| {
                let dq = (y - m) / sd;
                lp - 0.5 * dq * dq - 0.5 * (2.0 * std::f64::consts::PI * t).ln()
            })
            .collect();
        let logq = log_sum_exp(&logq_terms);
        logp.exp() * (logp - logq)
    };
    adaptive_simpson(&f, lo, hi, 1e-10).max(0.0)
}

/// Truncated-sum Poisson output divergence. Returns +infinity if the
/// mixture places no mass consistent with the source (zero atoms).
pub fn kl_output_oracle_poisson(x: f64, mixture: &DiscreteDistribution, horizon: f64) -> f64 {
    if mixture.atoms().iter().any(|&a| a <= 0.0) && mixture.len() == 1 {
        return f64::INFINITY;
    }
    let lam = x * horizon;
    let max_lam = mixture.atoms()[mixture.len() - 1].max(x) * horizon;
    let y_max = poisson_truncation(max_lam.max(lam));
    let lnf = ln_factorial_table(y_max);
    let mut d = 0.0;
    for (y, &lnf_y) in lnf.iter().enumerate().take(y_max + 1) {
        let logp = -lam + y as f64 * lam.ln() - lnf_y;
        let logq_terms: Vec<f64> = mixture
            .iter()
            .map(|(a, p)| {
                let l = a * horizon;
                p.ln() - l + y as f64 * l.ln() - lnf_y
            })
            .collect();
        let logq = log_sum_exp(&logq_terms);
        if logq == f64::NEG_INFINITY && logp > f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        d += logp.exp() * (logp - logq);
    }
    d.max(0.0)
}

/// Bayes filter for a DC Gaussian source with a finite prior: the
/// posterior over atoms given Y_t has log-weights x Y_t - x^2 t / 2.
pub fn gaussian_dc_posterior_mean(prior: &DiscreteDistribution, t: f64, y_t: f64) -> f64 {
    if t <= 0.0 {
        return prior.mean();
    }
    let logw: Vec<f64> = prior
        .iter()
        .map(|(x, p)| p.ln() + x * y_t - 0.5 * x * x * t)
        .collect();
    let lse = log_sum_exp(&logw);
    prior
        .iter()
        .zip(&logw)
        .map(|((x, _), &lw)| x * (lw - lse).exp())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn awgn_zero_signal_terminal_moments() {
        // over 10^4 paths, Y_T should be N(0, T)
        let basis = BasisSystem::haar(1, 10.0);
        let coef = [0.0];
        let n = 10_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for trial in 0..n {
            let rng_seed = trial_rng(42, trial).gen::<u64>();
            let p = simulate_awgn(&basis, &coef, 0.01, rng_seed, true);
            let yt = *p.y.last().unwrap();
            sum += yt;
            sumsq += yt * yt;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 * (10.0f64 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 10.0).abs() <= 1.0, "var {var}");
    }

    #[test]
    fn awgn_zero_noise_is_exact_integral() {
        let basis = BasisSystem::haar(2, 10.0);
        let coef = [1.0, 0.5];
        let p = simulate_awgn(&basis, &coef, 0.01, 7, false);
        // exact grid integral: left Riemann sum of a piecewise-constant
        // signal whose breakpoints align with the grid
        let mut acc = 0.0;
        for k in 0..p.grid.len() {
            assert_abs_diff_eq!(p.y[k], acc, epsilon = 1e-12);
            acc += basis.signal(&coef, p.grid[k]) * 0.01;
        }
    }

    #[test]
    fn awgn_fixed_seed_replays() {
        let basis = BasisSystem::haar(2, 10.0);
        let a = simulate_awgn(&basis, &[1.0, -1.0], 0.01, 99, true);
        let b = simulate_awgn(&basis, &[1.0, -1.0], 0.01, 99, true);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn poisson_terminal_count_moment() {
        let n = 10_000u64;
        let mut sum = 0.0;
        for trial in 0..n {
            let rng_seed = trial_rng(5, trial).gen::<u64>();
            let p = simulate_poisson(1.0, 10.0, 0.01, rng_seed);
            sum += *p.y.last().unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - 10.0).abs() <= 4.0 * (10.0f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn poisson_small_rate_empty_probability() {
        let x = 0.05;
        let horizon = 10.0;
        let n = 10_000u64;
        let mut empty = 0u64;
        for trial in 0..n {
            let rng_seed = trial_rng(6, trial).gen::<u64>();
            let p = simulate_poisson(x, horizon, 0.1, rng_seed);
            if *p.y.last().unwrap() == 0.0 {
                empty += 1;
            }
        }
        let frac = empty as f64 / n as f64;
        let expect = (-x * horizon).exp();
        assert!((frac - expect).abs() <= 4.0 * (expect * (1.0 - expect) / n as f64).sqrt());
    }

    #[test]
    fn poisson_fixed_seed_replays() {
        let a = simulate_poisson(1.5, 10.0, 0.01, 123);
        let b = simulate_poisson(1.5, 10.0, 0.01, 123);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn poisson_counts_nondecreasing() {
        let p = simulate_poisson(2.0, 10.0, 0.01, 11);
        for w in p.y.windows(2) {
            assert!(w[1] >= w[0]);
            assert_eq!(w[0].fract(), 0.0);
        }
    }

    #[test]
    fn cmle_oracle_filter_is_zero() {
        let basis = BasisSystem::haar(1, 10.0);
        let (mean, _) = cmle_estimate(
            |trial| simulate_awgn(&basis, &[2.0], 0.01, trial, true),
            |p, k| p.x[k],
            Loss::HalfSquared,
            16,
        )
        .unwrap();
        assert_abs_diff_eq!(mean, 0.0);
    }

    #[test]
    fn cmle_constant_filter_no_noise() {
        // DC truth x = 1.5, constant estimate 1.0, no noise:
        // cmle = T * (x - xh)^2 / 2 exactly
        let basis = BasisSystem::haar(1, 10.0);
        let coef = [1.5 * 10.0f64.sqrt()]; // signal == 1.5 on [0,10]
        let (mean, _) = cmle_estimate(
            |_| simulate_awgn(&basis, &coef, 0.01, 0, false),
            |_, _| 1.0,
            Loss::HalfSquared,
            2,
        )
        .unwrap();
        assert_abs_diff_eq!(mean, 10.0 * 0.5 * 0.25, epsilon = 1e-9);
    }

    #[test]
    fn duncan_identity_scalar_gaussian() {
        // X ~ N(0,1) DC, exact Bayes filter Y_t/(1+t); the causal MSE
        // integral (twice the half-squared cmle) equals ln(1+T)
        let horizon = 10.0;
        let trials = 4_000u64;
        let (mean, stderr) = cmle_estimate(
            |trial| {
                let mut rng = trial_rng(17, trial);
                let x: f64 = rng.sample(StandardNormal);
                simulate_awgn_dc(x, horizon, 0.01, rng.gen())
            },
            |p, k| gaussian_dc_posterior_mean_gaussian_prior(p.y[k], p.grid[k]),
            Loss::HalfSquared,
            trials,
        )
        .unwrap();
        let mse_integral = 2.0 * mean;
        let expect = (1.0f64 + horizon).ln();
        assert!(
            (mse_integral - expect).abs() <= 3.0 * 2.0 * stderr,
            "got {mse_integral}, expected {expect}, stderr {stderr}"
        );
    }

    fn gaussian_dc_posterior_mean_gaussian_prior(y_t: f64, t: f64) -> f64 {
        y_t / (1.0 + t)
    }

    #[test]
    fn kl_gaussian_oracle_point_mass_is_zero() {
        let m = DiscreteDistribution::point_mass(1.0);
        assert_abs_diff_eq!(kl_output_oracle_gaussian(1.0, &m, 10.0), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn kl_gaussian_matches_trapezoid_oracle() {
        let m = DiscreteDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let t = 1.0;
        let val = kl_output_oracle_gaussian(0.0, &m, t);
        // trapezoid grid over [-9, 9], step 1e-3
        let step = 1e-3;
        let n = (18.0 / step) as usize;
        let mut acc = 0.0;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * t).sqrt();
        for k in 0..=n {
            let y = -9.0 + k as f64 * step;
            let p = norm * (-0.5 * y * y / t).exp();
            let q = 0.5 * norm * (-0.5 * (y + 1.0) * (y + 1.0) / t).exp()
                + 0.5 * norm * (-0.5 * (y - 1.0) * (y - 1.0) / t).exp();
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * step * p * (p / q).ln();
        }
        assert_abs_diff_eq!(val, acc, epsilon = 1e-6);
    }

    #[test]
    fn kl_poisson_matches_direct_sum() {
        let m = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let horizon = 10.0;
        let val = kl_output_oracle_poisson(1.0, &m, horizon);
        // direct truncated sum to y = 200
        let lnf = ln_factorial_table(200);
        let lam = 10.0f64;
        let mut acc = 0.0;
        for (y, &lnf_y) in lnf.iter().enumerate().take(201) {
            let p = (-lam + y as f64 * lam.ln() - lnf_y).exp();
            let q = 0.5 * (-5.0f64 + y as f64 * 5.0f64.ln() - lnf_y).exp()
                + 0.5 * (-20.0f64 + y as f64 * 20.0f64.ln() - lnf_y).exp();
            if p > 0.0 {
                acc += p * (p / q).ln();
            }
        }
        assert_abs_diff_eq!(val, acc, epsilon = 1e-8);
    }

    #[test]
    fn halving_dt_within_statistical_error() {
        // discretization convergence at 10^3 trials
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let run = |dt: f64| {
            cmle_estimate(
                |trial| {
                    let rng_seed = trial_rng(31, trial).gen::<u64>();
                    simulate_awgn_dc(1.0, 10.0, dt, rng_seed)
                },
                |p, k| gaussian_dc_posterior_mean(&prior, p.grid[k], p.y[k]),
                Loss::HalfSquared,
                1000,
            )
            .unwrap()
        };
        let (a, sa) = run(0.01);
        let (b, sb) = run(0.005);
        assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn replay_determinism() {
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let run = || {
            cmle_estimate(
                |trial| {
                    let rng_seed = trial_rng(8, trial).gen::<u64>();
                    simulate_poisson(1.0, 10.0, 0.01, rng_seed)
                },
                |p, k| poisson_posterior_mean_wrap(&prior, p, k),
                Loss::NaturalPoisson,
                64,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    fn poisson_posterior_mean_wrap(prior: &DiscreteDistribution, p: &PathRecord, k: usize) -> f64 {
        crate::poisson::poisson_posterior_mean(prior, p.grid[k], p.y[k] as u64)
    }
}

//! Sparse-signal estimation over the continuous-time AWGN channel:
//! orthonormal basis machinery, sufficient statistics, whitening, and the
//! comparison filters (minimax Bayes, ML with thresholding, linear
//! no-sparsity, genie-aided).

use crate::distributions::DiscreteDistribution;
use crate::sim::PathRecord;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default enumeration cap for the joint atom grid of the i.i.d. prior.
pub const ENUMERATION_CAP: usize = 300_000;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("time {0} is beyond the path horizon {1}")]
    BeyondHorizon(f64, f64),
    #[error("joint atom grid of size {0} exceeds the enumeration cap {1}; reduce n or merge atoms")]
    EnumerationCap(usize, usize),
    #[error("support index {0} out of range 1..={1}")]
    BadSupport(usize, usize),
}

/// A real function on [0,T] that is constant on each cell of a partition.
/// `breaks` has one more entry than `values`.
#[derive(Debug, Clone)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(breaks.len(), values.len() + 1);
        Self { breaks, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.breaks[0] || t > *self.breaks.last().unwrap() {
            return 0.0;
        }
        // right-continuous; the last cell includes its right endpoint
        let idx = match self.breaks.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.values.len() - 1),
            Err(i) => i - 1,
        };
        self.values[idx.min(self.values.len() - 1)]
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

/// n orthonormal signals phi_i on [0,T] with closed-form Gram process.
#[derive(Debug, Clone)]
pub struct BasisSystem {
    n: usize,
    horizon: f64,
    funcs: Vec<PiecewiseConstant>,
}

impl BasisSystem {
    /// First `n` functions of the Haar system rescaled to [0,T]:
    /// the constant 1/sqrt(T), then wavelets in the standard level-major
    /// enumeration (level 0 first, positions left to right).
    pub fn haar(n: usize, horizon: f64) -> Self {
        assert!(n >= 1 && horizon > 0.0);
        let t = horizon;
        let mut funcs = Vec::with_capacity(n);
        funcs.push(PiecewiseConstant::new(vec![0.0, t], vec![1.0 / t.sqrt()]));
        let mut level = 0u32;
        let mut pos = 0usize;
        while funcs.len() < n {
            let cells = 1usize << level;
            let width = t / cells as f64;
            let amp = (cells as f64 / t).sqrt();
            let lo = pos as f64 * width;
            let mid = lo + 0.5 * width;
            let hi = lo + width;
            funcs.push(PiecewiseConstant::new(
                vec![lo, mid, hi],
                vec![amp, -amp],
            ));
            pos += 1;
            if pos == cells {
                pos = 0;
                level += 1;
            }
        }
        Self { n, horizon, funcs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, i: usize, t: f64) -> f64 {
        self.funcs[i].eval(t)
    }

    /// Gram matrix Gamma(t) with entries int_0^t phi_i phi_j ds, exact for
    /// piecewise-constant integrands.
    pub fn gram(&self, t: f64) -> DMatrix<f64> {
        let t = t.clamp(0.0, self.horizon);
        let mut g = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let mut cuts: Vec<f64> = self.funcs[i]
                    .breaks()
                    .iter()
                    .chain(self.funcs[j].breaks())
                    .copied()
                    .filter(|&b| b < t)
                    .collect();
                cuts.push(t);
                cuts.push(0.0);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    acc += (w[1] - w[0]) * self.funcs[i].eval(mid) * self.funcs[j].eval(mid);
                }
                g[(i, j)] = acc;
                g[(j, i)] = acc;
            }
        }
        g
    }

    /// Signal value at t for a coefficient vector: sum_i a_i phi_i(t).
    pub fn signal(&self, coef: &[f64], t: f64) -> f64 {
        coef.iter()
            .enumerate()
            .map(|(i, &a)| a * self.eval(i, t))
            .sum()
    }
}

/// Whitened vector observation at a fixed time: eigenvalues of Gamma(t)
/// at or below the truncation threshold dropped, noise covariance of z
/// is the identity on the effective subspace.
#[derive(Debug, Clone)]
pub struct WhitenedObservation {
    pub t: f64,
    /// effective eigenvalues, ascending, all > threshold
    pub eigvals: Vec<f64>,
    /// n x effective_dim matrix of the retained eigenvectors
    pub v: DMatrix<f64>,
    /// whitened observation Lambda^{-1/2} V^T ytilde
    pub z: DVector<f64>,
    /// design matrix Lambda^{1/2} V^T (effective_dim x n)
    pub design: DMatrix<f64>,
}

impl WhitenedObservation {
    pub fn effective_dim(&self) -> usize {
        self.eigvals.len()
    }

    /// True when every eigenvalue was dropped; filters must fall back to
    /// the prior mean.
    pub fn is_degenerate(&self) -> bool {
        self.eigvals.is_empty()
    }
}

/// Relative rank-truncation threshold: 1e-10 times the largest eigenvalue.
pub fn default_eigen_tol(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigen();
    1e-10 * eig.eigenvalues.iter().cloned().fold(0.0, f64::max)
}

/// Eigendecompose Gamma(t), drop eigenvalues <= `eigen_tol`, and whiten.
pub fn whiten(
    basis: &BasisSystem,
    t: f64,
    ytilde: &DVector<f64>,
    eigen_tol: f64,
) -> WhitenedObservation {
    whiten_gram(&basis.gram(t), t, ytilde, eigen_tol)
}

/// Whitening against an explicit Gram matrix (used when the Gram comes
/// from a discretized path rather than the closed form).
pub fn whiten_gram(
    gram: &DMatrix<f64>,
    t: f64,
    ytilde: &DVector<f64>,
    eigen_tol: f64,
) -> WhitenedObservation {
    let n = gram.nrows();
    let eig = gram.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > eigen_tol)
        .collect();
    let eff = kept.len();
    let mut v = DMatrix::zeros(n, eff);
    let mut eigvals = Vec::with_capacity(eff);
    for (c, &i) in kept.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
        eigvals.push(eig.eigenvalues[i]);
    }
    let mut z = DVector::zeros(eff);
    let mut design = DMatrix::zeros(eff, n);
    for c in 0..eff {
        let proj = v.column(c).dot(ytilde);
        z[c] = proj / eigvals[c].sqrt();
        let row = v.column(c) * eigvals[c].sqrt();
        design.set_row(c, &row.transpose());
    }
    WhitenedObservation { t, eigvals, v, z, design }
}

/// Ito-style left-endpoint approximation of the stochastic integrals
/// int_0^t phi_i dY_s over the recorded path increments.
pub fn sufficient_stats(
    path: &PathRecord,
    basis: &BasisSystem,
    t: f64,
) -> Result<DVector<f64>, FilterError> {
    let horizon = *path.grid.last().unwrap();
    if t > horizon + 1e-12 {
        return Err(FilterError::BeyondHorizon(t, horizon));
    }
    let mut y = DVector::zeros(basis.n());
    for k in 0..path.grid.len() - 1 {
        if path.grid[k + 1] > t + 1e-12 {
            break;
        }
        let dy = path.y[k + 1] - path.y[k];
        for i in 0..basis.n() {
            y[i] += basis.eval(i, path.grid[k]) * dy;
        }
    }
    Ok(y)
}

/// Per-coordinate prior for the coefficient vector.
#[derive(Debug, Clone)]
pub enum CoefficientPrior {
    /// i.i.d. finite-support prior per coordinate.
    IidDiscrete(DiscreteDistribution),
    /// zero-mean Gaussian with the given per-coordinate variance.
    GaussianSpherical { variance: f64 },
    /// Gaussian on a known support (genie side information).
    GaussianOnSupport { variance: f64, support: Vec<usize> },
}

/// Exhaustive-enumeration Bayes filter for an i.i.d. discrete coefficient
/// prior. Precomputes the per-coordinate atom table; each estimate call
/// walks the m^n joint grid with log-domain weights.
pub struct MinimaxFilter {
    atoms: Vec<f64>,
    log_probs: Vec<f64>,
    prior_mean: f64,
    n: usize,
}

/// Drop the smallest-mass atoms of `prior` until the i.i.d. joint grid
/// m^n fits under `cap`, then renormalize. The capacity solver can return
/// trace atoms (mass ~1e-4) that are immaterial to the Bayes estimate but
/// multiply the enumeration cost by their count to the n-th power.
pub fn prune_prior_for_enumeration(
    prior: &DiscreteDistribution,
    n: usize,
    cap: usize,
) -> DiscreteDistribution {
    let mut pairs: Vec<(f64, f64)> =
        prior.atoms().iter().copied().zip(prior.probs().iter().copied()).collect();
    while pairs.len() > 1
        && pairs.len().checked_pow(n as u32).is_none_or(|t| t > cap)
    {
        let (idx, _) = pairs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap();
        pairs.remove(idx);
    }
    let (atoms, masses): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    DiscreteDistribution::normalize(&masses, &atoms)
        .expect("pruned prior keeps at least one atom of positive mass")
}

impl MinimaxFilter {
    pub fn new(prior: &DiscreteDistribution, n: usize) -> Result<Self, FilterError> {
        Self::with_cap(prior, n, ENUMERATION_CAP)
    }

    pub fn with_cap(
        prior: &DiscreteDistribution,
        n: usize,
        cap: usize,
    ) -> Result<Self, FilterError> {
        let m = prior.len();
        let total = m.checked_pow(n as u32).unwrap_or(usize::MAX);
        if total > cap {
            return Err(FilterError::EnumerationCap(total, cap));
        }
        Ok(Self {
            atoms: prior.atoms().to_vec(),
            log_probs: prior.probs().iter().map(|&p| p.ln()).collect(),
            prior_mean: prior.mean(),
            n,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.atoms.len().pow(self.n as u32)
    }

    /// Posterior mean of the coefficient vector given the whitened
    /// observation. Log-sum-exp stabilization with a running maximum.
    pub fn estimate(&self, obs: &WhitenedObservation) -> DVector<f64> {
        if obs.is_degenerate() {
            return DVector::from_element(self.n, self.prior_mean);
        }
        let m = self.atoms.len();
        let n = self.n;

        // ||z - D a||^2 = ||z||^2 - 2 b'a + a'G a with b = D'z, G = D'D;
        // a single odometer digit change updates the quadratic form in O(n)
        // over flat slices, avoiding per-atom residual vectors
        let gram = obs.design.transpose() * &obs.design; // row-major n x n
        let g: Vec<f64> = (0..n * n).map(|idx| gram[(idx / n, idx % n)]).collect();
        let b: Vec<f64> = (0..n).map(|i| obs.design.column(i).dot(&obs.z)).collect();
        let z2 = obs.z.norm_squared();

        // coordinate 0 is the innermost sweep: with the other coordinates
        // frozen at r, lw(d0) = logp_rest + pre[d0] - 0.5*(z2 + quad_r)
        // - (q_r[0] - b[0])*atom[d0], so each inner atom costs two flops
        let pre: Vec<f64> = (0..m)
            .map(|d| self.log_probs[d] - 0.5 * g[0] * self.atoms[d] * self.atoms[d])
            .collect();

        // odometer over coordinates 1..n; state tracks r with a_0 = 0
        let mut digits = vec![0usize; n]; // digits[0] unused by the odometer
        let mut logp_rest = self.log_probs[0] * (n - 1) as f64;
        let a0 = self.atoms[0];
        let mut q: Vec<f64> = (0..n)
            .map(|i| a0 * g[i * n + 1..(i + 1) * n].iter().sum::<f64>())
            .collect();
        let mut quad =
            a0 * q[1..].iter().sum::<f64>() - 2.0 * a0 * b[1..].iter().sum::<f64>();

        // online log-sum-exp accumulation
        let mut max_lw = f64::NEG_INFINITY;
        let mut sum_w = 0.0;
        let mut sum_wa = vec![0.0f64; n];
        let outer = self.grid_size() / m;
        for _ in 0..outer {
            let base = logp_rest - 0.5 * (z2 + quad);
            let slope = q[0] - b[0];
            // inner sweep over coordinate 0; accumulate locally, then fold
            let mut w_blk = 0.0;
            let mut wa_blk = 0.0;
            for (&pre_d, &atom_d) in pre.iter().zip(&self.atoms) {
                let lw = base + pre_d - slope * atom_d;
                if lw > max_lw {
                    let scale = (max_lw - lw).exp();
                    sum_w *= scale;
                    w_blk *= scale;
                    wa_blk *= scale;
                    for s in sum_wa.iter_mut() {
                        *s *= scale;
                    }
                    max_lw = lw;
                }
                // atoms more than 40 nats below the mode are invisible next
                // to sum_w >= 1; skipping their exp dominates the loop cost
                let dd = lw - max_lw;
                if dd > -40.0 {
                    let w = dd.exp();
                    w_blk += w;
                    wa_blk += w * atom_d;
                }
            }
            sum_w += w_blk;
            sum_wa[0] += wa_blk;
            for i in 1..n {
                sum_wa[i] += w_blk * self.atoms[digits[i]];
            }
            // advance the outer odometer, folding each change into the form
            for i in 1..n {
                let old = self.atoms[digits[i]];
                logp_rest -= self.log_probs[digits[i]];
                let next = if digits[i] + 1 < m { digits[i] + 1 } else { 0 };
                digits[i] = next;
                logp_rest += self.log_probs[next];
                let delta = self.atoms[next] - old;
                quad += delta * (2.0 * (q[i] - b[i]) + delta * g[i * n + i]);
                let row = &g[i * n..(i + 1) * n];
                for (qj, &gij) in q.iter_mut().zip(row) {
                    *qj += delta * gij;
                }
                if next != 0 {
                    break;
                }
            }
        }
        DVector::from_iterator(n, sum_wa.iter().map(|&s| s / sum_w))
    }

    /// Estimate plus the full normalized posterior over the joint atom
    /// grid in odometer order (coordinate 0 fastest).
    pub fn estimate_with_weights(&self, obs: &WhitenedObservation) -> (DVector<f64>, Vec<f64>) {
        let total = self.grid_size();
        if obs.is_degenerate() {
            let w = self.joint_prior_weights();
            return (DVector::from_element(self.n, self.prior_mean), w);
        }
        let mut logw = Vec::with_capacity(total);
        let mut digits = vec![0usize; self.n];
        for _ in 0..total {
            let mut logp = 0.0;
            let mut resid = obs.z.clone();
            for (i, &d) in digits.iter().enumerate() {
                logp += self.log_probs[d];
                resid -= obs.design.column(i) * self.atoms[d];
            }
            logw.push(logp - 0.5 * resid.norm_squared());
            advance(&mut digits, self.atoms.len());
        }
        let lse = crate::capacity::log_sum_exp(&logw);
        let weights: Vec<f64> = logw.iter().map(|&l| (l - lse).exp()).collect();
        let mut mean = vec![0.0; self.n];
        let mut digits = vec![0usize; self.n];
        for &w in &weights {
            for (mi, &d) in mean.iter_mut().zip(&digits) {
                *mi += w * self.atoms[d];
            }
            advance(&mut digits, self.atoms.len());
        }
        (DVector::from_vec(mean), weights)
    }

    fn joint_prior_weights(&self) -> Vec<f64> {
        let total = self.grid_size();
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0usize; self.n];
        for _ in 0..total {
            out.push(digits.iter().map(|&d| self.log_probs[d].exp()).product());
            advance(&mut digits, self.atoms.len());
        }
        out
    }
}

fn advance(digits: &mut [usize], m: usize) {
    for d in digits.iter_mut() {
        if *d + 1 < m {
            *d += 1;
            return;
        }
        *d = 0;
    }
}

/// Thresholding mode for the ML filter.
#[derive(Debug, Clone, Copy)]
pub enum Threshold {
    None,
    /// keep the k largest-magnitude entries
    Hard(usize),
    /// shrink every entry toward zero by tau
    Soft(f64),
}

/// Moore-Penrose least squares estimate from the whitened observation,
/// optionally thresholded. Degenerate observations give the zero vector.
pub fn ml_filter(obs: &WhitenedObservation, n: usize, threshold: Threshold) -> DVector<f64> {
    if obs.is_degenerate() {
        return DVector::zeros(n);
    }
    let pinv = obs
        .design
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("svd of a finite matrix");
    let mut a = pinv * &obs.z;
    match threshold {
        Threshold::None => a,
        Threshold::Hard(k) => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| a[j].abs().partial_cmp(&a[i].abs()).unwrap());
            for &i in idx.iter().skip(k) {
                a[i] = 0.0;
            }
            a
        }
        Threshold::Soft(tau) => {
            for v in a.iter_mut() {
                *v = v.signum() * (v.abs() - tau).max(0.0);
            }
            a
        }
    }
}

/// Bayes estimate under an i.i.d. N(0,P) coefficient prior:
/// P V_eff (P Lambda_eff + I)^{-1} V_eff^T ytilde, evaluated via the
/// stored whitened pieces.
pub fn linear_nosparsity_filter(obs: &WhitenedObservation, power: f64) -> DVector<f64> {
    let n = obs.v.nrows();
    if obs.is_degenerate() {
        return DVector::zeros(n);
    }
    // V^T ytilde = Lambda^{1/2} z, so the estimate is
    // P V diag(sqrt(lambda) / (P lambda + 1)) z
    let mut scaled = obs.z.clone();
    for (zi, &lam) in scaled.iter_mut().zip(&obs.eigvals) {
        *zi *= power * lam.sqrt() / (power * lam + 1.0);
    }
    &obs.v * scaled
}

/// Genie-aided estimate: Gaussian conditioning with prior N(0, nP/k) on
/// the known support, zero elsewhere.
pub fn genie_filter(
    obs: &WhitenedObservation,
    support: &[usize],
    n: usize,
    power: f64,
) -> Result<DVector<f64>, FilterError> {
    if support.is_empty() {
        return Ok(DVector::zeros(n));
    }
    for &s in support {
        if s >= n {
            return Err(FilterError::BadSupport(s + 1, n));
        }
    }
    if obs.is_degenerate() {
        return Ok(DVector::zeros(n));
    }
    let k = support.len();
    let var = n as f64 * power / k as f64;
    let eff = obs.effective_dim();
    let mut u = DMatrix::zeros(eff, k);
    for (c, &s) in support.iter().enumerate() {
        u.set_column(c, &obs.design.column(s));
    }
    let gram = &u * u.transpose() * var + DMatrix::identity(eff, eff);
    let sol = gram
        .lu()
        .solve(&obs.z)
        .expect("positive definite system");
    let est_support = u.transpose() * sol * var;
    let mut a = DVector::zeros(n);
    for (c, &s) in support.iter().enumerate() {
        a[s] = est_support[c];
    }
    Ok(a)
}

/// X_hat(t) = sum_i coef_i phi_i(t).
pub fn reconstruct(coef: &DVector<f64>, basis: &BasisSystem, t: f64) -> f64 {
    (0..basis.n()).map(|i| coef[i] * basis.eval(i, t)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn haar_n1_constant() {
        let b = BasisSystem::haar(1, 4.0);
        assert_abs_diff_eq!(b.eval(0, 1.0), 0.5);
        let g = b.gram(2.0);
        assert_abs_diff_eq!(g[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn haar_gram_at_horizon_is_identity() {
        for n in [1usize, 2, 4, 7, 8] {
            let b = BasisSystem::haar(n, 10.0);
            let g = b.gram(10.0);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(g[(i, j)], expect, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn haar_gram_matches_quadrature() {
        // quadrature oracle: midpoint rule at step 1e-4
        let b = BasisSystem::haar(7, 10.0);
        let t = 5.0;
        let g = b.gram(t);
        let step = 1e-4;
        let m = (t / step).round() as usize;
        for i in 0..7 {
            for j in 0..7 {
                let mut acc = 0.0;
                for k in 0..m {
                    let s = (k as f64 + 0.5) * step;
                    acc += b.eval(i, s) * b.eval(j, s) * step;
                }
                assert_abs_diff_eq!(g[(i, j)], acc, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gram_at_zero_is_zero_and_psd() {
        let b = BasisSystem::haar(7, 10.0);
        assert_abs_diff_eq!(b.gram(0.0).norm(), 0.0, epsilon = 1e-14);
        for &t in &[0.3, 1.7, 5.0, 9.99] {
            let g = b.gram(t);
            let eig = g.symmetric_eigen();
            for &l in eig.eigenvalues.iter() {
                assert!(l > -1e-12, "eigenvalue {l} at t={t}");
            }
        }
    }

    #[test]
    fn whiten_full_rank_preserves_norm() {
        let b = BasisSystem::haar(4, 10.0);
        let y = DVector::from_vec(vec![0.3, -1.2, 0.5, 2.0]);
        let obs = whiten(&b, 10.0, &y, 1e-10);
        assert_eq!(obs.effective_dim(), 4);
        assert_abs_diff_eq!(obs.z.norm(), y.norm(), epsilon = 1e-9);
    }

    #[test]
    fn whiten_at_zero_is_degenerate() {
        let b = BasisSystem::haar(3, 10.0);
        let y = DVector::zeros(3);
        let obs = whiten(&b, 0.0, &y, 1e-12);
        assert!(obs.is_degenerate());
    }

    #[test]
    fn design_times_transpose_is_lambda() {
        let b = BasisSystem::haar(7, 10.0);
        let y = DVector::from_fn(7, |i, _| (i as f64 * 0.77).sin());
        let obs = whiten(&b, 5.0, &y, default_eigen_tol(&b.gram(5.0)));
        let dd = &obs.design * obs.design.transpose();
        for i in 0..obs.effective_dim() {
            for j in 0..obs.effective_dim() {
                let expect = if i == j { obs.eigvals[i] } else { 0.0 };
                assert_abs_diff_eq!(dd[(i, j)], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn minimax_point_mass_returns_point() {
        let b = BasisSystem::haar(3, 10.0);
        let prior = DiscreteDistribution::point_mass(1.5);
        let f = MinimaxFilter::new(&prior, 3).unwrap();
        let y = DVector::from_vec(vec![5.0, -3.0, 0.1]);
        let obs = whiten(&b, 7.0, &y, default_eigen_tol(&b.gram(7.0)));
        let est = f.estimate(&obs);
        for i in 0..3 {
            assert_abs_diff_eq!(est[i], 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn minimax_degenerate_returns_prior_mean() {
        let b = BasisSystem::haar(3, 10.0);
        let prior = DiscreteDistribution::new(vec![0.0, 2.0], vec![0.25, 0.75]).unwrap();
        let f = MinimaxFilter::new(&prior, 3).unwrap();
        let obs = whiten(&b, 0.0, &DVector::zeros(3), 1e-12);
        let est = f.estimate(&obs);
        for i in 0..3 {
            assert_abs_diff_eq!(est[i], 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn minimax_matches_hand_enumeration() {
        // n=2, 3-atom prior, fixed z: direct 9-term oracle
        let b = BasisSystem::haar(2, 10.0);
        let prior =
            DiscreteDistribution::new(vec![-1.0, 0.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let f = MinimaxFilter::new(&prior, 2).unwrap();
        let y = DVector::from_vec(vec![0.7, -0.4]);
        let obs = whiten(&b, 6.0, &y, default_eigen_tol(&b.gram(6.0)));
        let est = f.estimate(&obs);

        let mut num = [0.0f64; 2];
        let mut den = 0.0f64;
        for (a1, p1) in prior.iter() {
            for (a0, p0) in prior.iter() {
                let a = DVector::from_vec(vec![a0, a1]);
                let r = &obs.z - &obs.design * &a;
                let w = p0 * p1 * (-0.5 * r.norm_squared()).exp();
                num[0] += w * a0;
                num[1] += w * a1;
                den += w;
            }
        }
        assert_abs_diff_eq!(est[0], num[0] / den, epsilon = 1e-12);
        assert_abs_diff_eq!(est[1], num[1] / den, epsilon = 1e-12);

        let (est2, weights) = f.estimate_with_weights(&obs);
        assert_abs_diff_eq!(est2[0], est[0], epsilon = 1e-12);
        assert_abs_diff_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn minimax_mean_in_convex_hull() {
        let b = BasisSystem::haar(3, 10.0);
        let prior =
            DiscreteDistribution::new(vec![-2.0, 0.0, 2.0], vec![0.3, 0.4, 0.3]).unwrap();
        let f = MinimaxFilter::new(&prior, 3).unwrap();
        for seed in 0..20u32 {
            let y = DVector::from_fn(3, |i, _| ((seed as f64 + 1.3) * (i as f64 + 0.7)).sin() * 3.0);
            let obs = whiten(&b, 4.0, &y, default_eigen_tol(&b.gram(4.0)));
            let est = f.estimate(&obs);
            for i in 0..3 {
                assert!(est[i] >= -2.0 - 1e-12 && est[i] <= 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let prior =
            DiscreteDistribution::new(vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
                vec![1.0 / 7.0; 7]).unwrap();
        assert!(matches!(
            MinimaxFilter::new(&prior, 7),
            Err(FilterError::EnumerationCap(_, _))
        ));
    }

    #[test]
    fn ml_filter_invertible_case() {
        let b = BasisSystem::haar(4, 10.0);
        let y = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let obs = whiten(&b, 10.0, &y, 1e-10);
        let a = ml_filter(&obs, 4, Threshold::None);
        // at t=T: Lambda=I, design=V^T, pinv = V, estimate = V z = ytilde
        for i in 0..4 {
            assert_abs_diff_eq!(a[i], y[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn ml_hard_zero_keeps_nothing() {
        let b = BasisSystem::haar(4, 10.0);
        let y = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let obs = whiten(&b, 10.0, &y, 1e-10);
        let a = ml_filter(&obs, 4, Threshold::Hard(0));
        assert_abs_diff_eq!(a.norm(), 0.0);
    }

    #[test]
    fn ml_hard_respects_support_budget() {
        let b = BasisSystem::haar(7, 10.0);
        let y = DVector::from_fn(7, |i, _| (i as f64 - 3.0) * 0.8);
        let obs = whiten(&b, 6.3, &y, default_eigen_tol(&b.gram(6.3)));
        for k in 0..=7usize {
            let a = ml_filter(&obs, 7, Threshold::Hard(k));
            let nz = a.iter().filter(|v| **v != 0.0).count();
            assert!(nz <= k);
        }
    }

    #[test]
    fn pseudoinverse_identities() {
        // Moore-Penrose identities on a seed-fixed 7x7 instance
        let b = BasisSystem::haar(7, 10.0);
        let obs = whiten(
            &b,
            5.0,
            &DVector::from_fn(7, |i, _| (i as f64).cos()),
            default_eigen_tol(&b.gram(5.0)),
        );
        let d = obs.design.clone();
        let pinv = d.clone().svd(true, true).pseudo_inverse(1e-12).unwrap();
        let a1 = &d * &pinv * &d;
        let a2 = &pinv * &d * &pinv;
        let a3 = (&d * &pinv) - (&d * &pinv).transpose();
        let a4 = (&pinv * &d) - (&pinv * &d).transpose();
        assert!((a1 - &d).norm() <= 1e-9);
        assert!((a2 - &pinv).norm() <= 1e-9);
        assert!(a3.norm() <= 1e-9);
        assert!(a4.norm() <= 1e-9);
    }

    #[test]
    fn linear_filter_scalar_shrinkage_at_horizon() {
        let b = BasisSystem::haar(4, 10.0);
        let y = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let obs = whiten(&b, 10.0, &y, 1e-10);
        let p = 3.0;
        let a = linear_nosparsity_filter(&obs, p);
        for i in 0..4 {
            assert_abs_diff_eq!(a[i], p / (p + 1.0) * y[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_filter_vanishes_with_power() {
        let b = BasisSystem::haar(4, 10.0);
        let y = DVector::from_vec(vec![1.0, -0.5, 0.25, 2.0]);
        let obs = whiten(&b, 6.0, &y, default_eigen_tol(&b.gram(6.0)));
        let a = linear_nosparsity_filter(&obs, 1e-12);
        assert!(a.norm() < 1e-10);
    }

    #[test]
    fn linear_filter_matches_gaussian_conditioning_oracle() {
        // joint-Gaussian oracle: A ~ N(0, P I), ytilde = Gamma A + W,
        // W ~ N(0, Gamma); E[A|ytilde] = P Gamma (P Gamma^2 + Gamma)^+ ytilde
        let n = 7;
        let b = BasisSystem::haar(n, 10.0);
        let t = 5.0;
        let p = 2.2;
        let gam = b.gram(t);
        let y = DVector::from_fn(n, |i, _| ((i + 1) as f64).sqrt() - 1.2);
        let obs = whiten(&b, t, &y, default_eigen_tol(&gam));
        let a = linear_nosparsity_filter(&obs, p);
        let cov_y = &gam * &gam * p + &gam;
        let pinv = cov_y.svd(true, true).pseudo_inverse(1e-10).unwrap();
        let oracle = &gam * pinv * &y * p;
        assert!((a - oracle).norm() <= 1e-10);
    }

    #[test]
    fn genie_full_support_matches_linear() {
        let n = 4;
        let b = BasisSystem::haar(n, 10.0);
        let y = DVector::from_vec(vec![0.5, -1.0, 0.3, 0.9]);
        let obs = whiten(&b, 6.0, &y, default_eigen_tol(&b.gram(6.0)));
        let p = 1.7;
        // support = all coordinates: variance nP/k = P, formulas coincide
        let g = genie_filter(&obs, &[0, 1, 2, 3], n, p).unwrap();
        let l = linear_nosparsity_filter(&obs, p);
        assert!((g - l).norm() <= 1e-10);
    }

    #[test]
    fn genie_single_support_scalar_shrinkage() {
        let n = 4;
        let b = BasisSystem::haar(n, 10.0);
        let y = DVector::from_vec(vec![0.5, -1.0, 0.3, 0.9]);
        let obs = whiten(&b, 10.0, &y, 1e-10);
        let p = 1.7;
        let g = genie_filter(&obs, &[2], n, p).unwrap();
        // at t=T the design is V^T; the support column has unit norm only
        // in the aggregate, so check against the generic conditioning oracle
        let var = n as f64 * p;
        let u = obs.design.column(2).into_owned();
        let gram = &u * u.transpose() * var + DMatrix::identity(n, n);
        let oracle = (u.transpose() * gram.lu().solve(&obs.z).unwrap() * var)[0];
        assert_abs_diff_eq!(g[2], oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(g[0], 0.0);
    }

    #[test]
    fn genie_matches_joint_gaussian_oracle() {
        // n=7, k=2: conditioning oracle in the whitened coordinates
        let n = 7;
        let b = BasisSystem::haar(n, 10.0);
        let t = 5.0;
        let p = 10f64.powf(0.4);
        let obs = whiten(
            &b,
            t,
            &DVector::from_fn(n, |i, _| (1.3 * i as f64).sin()),
            default_eigen_tol(&b.gram(t)),
        );
        let support = [1usize, 4];
        let g = genie_filter(&obs, &support, n, p).unwrap();
        // oracle: A_s ~ N(0, var I_k), z = U A_s + e, e ~ N(0, I)
        let var = n as f64 * p / 2.0;
        let eff = obs.effective_dim();
        let mut u = DMatrix::zeros(eff, 2);
        u.set_column(0, &obs.design.column(1));
        u.set_column(1, &obs.design.column(4));
        let cov_z = &u * u.transpose() * var + DMatrix::identity(eff, eff);
        let cross = u.transpose() * cov_z.lu().solve(&obs.z).unwrap() * var;
        assert_abs_diff_eq!(g[1], cross[0], epsilon = 1e-10);
        assert_abs_diff_eq!(g[4], cross[1], epsilon = 1e-10);
    }

    #[test]
    fn genie_empty_support_is_zero() {
        let b = BasisSystem::haar(3, 10.0);
        let obs = whiten(&b, 5.0, &DVector::from_element(3, 1.0), 1e-10);
        let g = genie_filter(&obs, &[], 3, 1.0).unwrap();
        assert_abs_diff_eq!(g.norm(), 0.0);
    }

    #[test]
    fn reconstruct_basis_vector() {
        let b = BasisSystem::haar(4, 10.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(reconstruct(&e1, &b, 3.3), b.eval(0, 3.3));
        let zero = DVector::zeros(4);
        assert_abs_diff_eq!(reconstruct(&zero, &b, 3.3), 0.0);
    }

    #[test]
    fn reconstruct_parseval() {
        let b = BasisSystem::haar(7, 10.0);
        let coef = DVector::from_fn(7, |i, _| (i as f64 * 0.9).cos());
        // quadrature oracle at the midpoints of a fine grid
        let step = 1e-4;
        let m = (10.0 / step) as usize;
        let mut acc = 0.0;
        for k in 0..m {
            let t = (k as f64 + 0.5) * step;
            let v = reconstruct(&coef, &b, t);
            acc += v * v * step;
        }
        let expect = coef.norm_squared();
        assert!((acc - expect).abs() / expect <= 1e-9 + 1e-6);
    }
}

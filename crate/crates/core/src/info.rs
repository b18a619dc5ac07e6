//! Finite-instance verification tools: the regret-capacity equality
//! checked from both sides, capacity-achieving mixtures with their
//! equalizer certificate, the strong regret bound, discrete-time directed
//! information, and the i.i.d.-vs-joint mutual-information gap for sparse
//! Gaussian coefficient priors.

use crate::capacity::{
    blahut_arimoto, log_sum_exp, mi_awgn, solve_capacity, CapacityError, ChannelModel,
    ConstraintSet,
};
use crate::distributions::{kl_vec, DiscreteDistribution, DistributionError, JointPmf};
use crate::sim::trial_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("need at least two sources, got {0}")]
    TooFewSources(usize),
    #[error("source {0} has length {1}, expected {2}")]
    RaggedSources(usize, usize, usize),
    #[error("certificate slack {deviation:.3e} at source {theta} exceeds 10x tol")]
    EqualizerViolation { theta: usize, deviation: f64 },
    #[error("constraint set has negligible prior mass ({0:.3e}); cannot condition")]
    DegenerateConstraintSet(f64),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Both sides of min_Q sup_theta D(P_theta || Q) = sup_w I_w(Theta; Y).
#[derive(Debug, Clone)]
pub struct OracleReport {
    /// capacity side, from the Blahut-Arimoto ascent over input weights
    pub capacity: f64,
    /// minimax side, from projected-subgradient descent over the output simplex
    pub minimax: f64,
    pub gap: f64,
}

const SUBGRADIENT_MAX_ITERS: usize = 100_000;
const SIMPLEX_FLOOR: f64 = 1e-12;

fn check_sources(sources: &[Vec<f64>]) -> Result<usize, InfoError> {
    if sources.len() < 2 {
        return Err(InfoError::TooFewSources(sources.len()));
    }
    let ncols = sources[0].len();
    for (i, s) in sources.iter().enumerate() {
        if s.len() != ncols {
            return Err(InfoError::RaggedSources(i, s.len(), ncols));
        }
    }
    Ok(ncols)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn worst_divergence(sources: &[Vec<f64>], q: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, p) in sources.iter().enumerate() {
        let d = kl_vec(p, q);
        if d > best {
            best = d;
            arg = i;
        }
    }
    (best, arg)
}

/// Verifies Gallager's redundancy-capacity equality on a finite instance.
///
/// The two sides are computed by unrelated algorithms so the comparison is
/// genuinely two-sided: the capacity side by Blahut-Arimoto over input
/// weights, the minimax side by projected subgradient on the output
/// simplex with an adaptive Polyak step. Stops when the sides agree to
/// `tol / 2` or after 10^5 iterations.
pub fn regret_capacity_oracle(sources: &[Vec<f64>], tol: f64) -> Result<OracleReport, InfoError> {
    let ncols = check_sources(sources)?;
    let (_, capacity) = blahut_arimoto(sources, (tol * 1e-2).max(1e-12))?;

    // start at the uniform mixture: positive wherever any source is
    let m = sources.len() as f64;
    let mut q = vec![0.0; ncols];
    for p in sources {
        for (qj, &pj) in q.iter_mut().zip(p) {
            *qj += pj / m;
        }
    }
    let (mut f_best, _) = worst_divergence(sources, &q);
    let mut delta = (0.5 * f_best).max(tol);
    let mut since_reset = f_best;
    let mut stalled = 0usize;
    for _ in 0..SUBGRADIENT_MAX_ITERS {
        if f_best - capacity <= 0.5 * tol {
            break;
        }
        let (f, theta) = worst_divergence(sources, &q);
        if f < f_best {
            f_best = f;
        }
        // adaptive level: halve the gap estimate when progress stalls
        if since_reset - f_best >= 0.5 * delta {
            since_reset = f_best;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 200 {
                delta = (0.5 * delta).max(1e-14);
                since_reset = f_best;
                stalled = 0;
            }
        }
        let p = &sources[theta];
        let mut g = vec![0.0; ncols];
        let mut gnorm2 = 0.0;
        for ((gj, &pj), &qj) in g.iter_mut().zip(p).zip(&q) {
            *gj = -pj / qj.max(SIMPLEX_FLOOR);
            gnorm2 += *gj * *gj;
        }
        let step = (f - (f_best - delta)).max(0.0) / gnorm2.max(1e-300);
        for (qj, gj) in q.iter_mut().zip(&g) {
            *qj -= step * gj;
        }
        project_simplex(&mut q);
        let mut z = 0.0;
        for qj in q.iter_mut() {
            *qj = qj.max(SIMPLEX_FLOOR);
            z += *qj;
        }
        for qj in q.iter_mut() {
            *qj /= z;
        }
    }
    Ok(OracleReport { capacity, minimax: f_best, gap: (f_best - capacity).abs() })
}

/// Capacity-achieving weights over the source index, certified by the
/// equalizer property D(P_theta || Q*) = C on the support of w*.
pub fn minimax_mixture(
    sources: &[Vec<f64>],
    tol: f64,
) -> Result<(DiscreteDistribution, f64), InfoError> {
    let ncols = check_sources(sources)?;
    let (w, capacity) = blahut_arimoto(sources, (tol * 1e-2).max(1e-12))?;
    let mut q = vec![0.0; ncols];
    for (p, (_, wi)) in sources.iter().zip(w.iter()) {
        for (qj, &pj) in q.iter_mut().zip(p) {
            *qj += wi * pj;
        }
    }
    // KKT certificate: D(P_theta || Q*) <= C everywhere, with equality on
    // support. Redundant sources may sit strictly below C, so the check is
    // one-sided: the ascent is optimal iff max_theta D - C is small.
    let mut worst = 0.0;
    let mut worst_theta = 0;
    for (i, p) in sources.iter().enumerate() {
        let dev = kl_vec(p, &q) - capacity;
        if dev > worst {
            worst = dev;
            worst_theta = i;
        }
    }
    if worst > 10.0 * tol {
        return Err(InfoError::EqualizerViolation { theta: worst_theta, deviation: worst });
    }
    Ok((w, capacity))
}

/// One evaluation of the strong regret bound.
#[derive(Debug, Clone)]
pub struct StrongRegretCheck {
    /// mass w*(B) of the "too good" set B = {theta : regret <= (1-eps) minimax}
    pub mass: f64,
    /// e * 2^{-eps * minimax}, minimax expressed in bits inside the exponent
    pub bound: f64,
    pub pass: bool,
}

/// No filter beats the minimax filter by a factor (1-eps) except on a set
/// of exponentially small prior mass. `regrets` and `weights` are indexed
/// by source; `minimax_nats` is the game value in nats.
pub fn strong_regret_check(
    regrets: &[f64],
    weights: &DiscreteDistribution,
    minimax_nats: f64,
    eps: f64,
) -> StrongRegretCheck {
    assert_eq!(regrets.len(), weights.len());
    let threshold = (1.0 - eps) * minimax_nats;
    let mass: f64 = regrets
        .iter()
        .zip(weights.probs())
        .filter(|(&r, _)| r <= threshold + 1e-12)
        .map(|(_, &w)| w)
        .sum();
    let minimax_bits = minimax_nats / std::f64::consts::LN_2;
    let bound = std::f64::consts::E * 2.0f64.powf(-eps * minimax_bits);
    StrongRegretCheck { mass, bound, pass: mass <= bound + 1e-9 }
}

// ---------------------------------------------------------------------------
// directed information
// ---------------------------------------------------------------------------

fn marginal_entropy(joint: &JointPmf, coords: &[usize]) -> f64 {
    let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (idx, p) in joint.cells() {
        if p == 0.0 {
            continue;
        }
        let key: Vec<usize> = coords.iter().map(|&c| idx[c]).collect();
        *acc.entry(key).or_insert(0.0) += p;
    }
    -acc.values().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// I(X^n -> Y^n) = sum_i I(X^i; Y_i | Y^{i-1}) by exhaustive
/// marginalization. The pmf must have 2n coordinates ordered
/// X_1..X_n, Y_1..Y_n.
pub fn directed_info_discrete(joint: &JointPmf) -> f64 {
    let dims = joint.dims().len();
    assert!(dims.is_multiple_of(2), "need paired (X^n, Y^n) coordinates");
    let n = dims / 2;
    let xs: Vec<usize> = (0..n).collect();
    let ys: Vec<usize> = (n..2 * n).collect();
    let mut total = 0.0;
    for i in 1..=n {
        // I(X^i; Y_i | Y^{i-1}) = H(X^i, Y^{i-1}) + H(Y^i) - H(X^i, Y^i) - H(Y^{i-1})
        let xi = &xs[..i];
        let y_prev = &ys[..i - 1];
        let y_cur = &ys[..i];
        let mut xi_yprev = xi.to_vec();
        xi_yprev.extend_from_slice(y_prev);
        let mut xi_ycur = xi.to_vec();
        xi_ycur.extend_from_slice(y_cur);
        total += marginal_entropy(joint, &xi_yprev) + marginal_entropy(joint, y_cur)
            - marginal_entropy(joint, &xi_ycur)
            - marginal_entropy(joint, y_prev);
    }
    total.max(0.0)
}

/// Exhaustive I(X^n; Y^n) on the same coordinate convention.
pub fn mutual_info_discrete(joint: &JointPmf) -> f64 {
    let dims = joint.dims().len();
    assert!(dims.is_multiple_of(2));
    let n = dims / 2;
    let xs: Vec<usize> = (0..n).collect();
    let ys: Vec<usize> = (n..2 * n).collect();
    let all: Vec<usize> = (0..2 * n).collect();
    (marginal_entropy(joint, &xs) + marginal_entropy(joint, &ys)
        - marginal_entropy(joint, &all))
    .max(0.0)
}

// ---------------------------------------------------------------------------
// i.i.d. bound vs constrained joint mutual information
// ---------------------------------------------------------------------------

/// Result of comparing n * I(A;B) against the mutual information of the
/// product prior conditioned on the per-block constraint set
/// {a : sum a_i^2 <= nP, #nonzero <= nq}.
#[derive(Debug, Clone)]
pub struct Lemma3Report {
    pub n: usize,
    pub single_letter_mi: f64,
    pub iid_bound: f64,
    pub joint_estimate: f64,
    pub joint_stderr: f64,
    pub gap: f64,
}

/// Monte-Carlo gap between the single-letter bound and the constrained
/// joint mutual information for the unit-variance Gaussian channel.
///
/// For n = 1 the constrained problem is the single-letter capacity
/// problem itself, so the gap is zero by construction and no sampling is
/// performed.
pub fn lemma3_gap(
    n: usize,
    avg_power: f64,
    duty_cycle: f64,
    stop_tol: f64,
    samples: u64,
    seed: u64,
) -> Result<Lemma3Report, InfoError> {
    let constraints = ConstraintSet {
        avg_power: Some(avg_power),
        duty_cycle: if duty_cycle < 1.0 { Some(duty_cycle) } else { None },
        peak: None,
    };
    let cap = solve_capacity(ChannelModel::AwgnUnitVariance, &constraints, stop_tol)?;
    lemma3_gap_with_prior(&cap.prior, n, avg_power, duty_cycle, samples, seed)
}

pub fn lemma3_gap_with_prior(
    prior: &DiscreteDistribution,
    n: usize,
    avg_power: f64,
    duty_cycle: f64,
    samples: u64,
    seed: u64,
) -> Result<Lemma3Report, InfoError> {
    let single = mi_awgn(prior);
    let iid_bound = n as f64 * single;
    if prior.len() == 1 || n == 1 {
        let joint = if n == 1 { single } else { 0.0 };
        return Ok(Lemma3Report {
            n,
            single_letter_mi: single,
            iid_bound,
            joint_estimate: joint,
            joint_stderr: 0.0,
            gap: (iid_bound - joint).max(0.0),
        });
    }

    let spec = ConstraintDp::new(prior, n, avg_power, duty_cycle);
    let z = spec.prior_mass();
    if z < 1e-6 {
        return Err(InfoError::DegenerateConstraintSet(z));
    }

    // h(B) by Monte-Carlo: -E log q(B) with B = A + Z, A ~ prior^n | T
    let neg_logs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let a = spec.sample_conditioned(&mut rng);
            let b: Vec<f64> = a
                .iter()
                .map(|&ai| ai + rng.sample::<f64, _>(StandardNormal))
                .collect();
            -(spec.restricted_density(&b).ln() - z.ln())
        })
        .collect();
    let h_b = neg_logs.iter().sum::<f64>() / samples as f64;
    let var = neg_logs.iter().map(|v| (v - h_b) * (v - h_b)).sum::<f64>()
        / (samples - 1).max(1) as f64;
    let stderr = (var / samples as f64).sqrt();
    let h_b_given_a = 0.5 * n as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let joint = (h_b - h_b_given_a).max(0.0);
    Ok(Lemma3Report {
        n,
        single_letter_mi: single,
        iid_bound,
        joint_estimate: joint,
        joint_stderr: stderr,
        gap: (iid_bound - joint).max(0.0),
    })
}

/// Dynamic program over (per-square-class counts) that sums the product
/// prior restricted to the constraint set without enumerating m^n atoms.
struct ConstraintDp {
    atoms: Vec<f64>,
    probs: Vec<f64>,
    /// square-class index per atom; class 0 reserved for zero atoms
    class: Vec<usize>,
    /// squared value of each nonzero class (class 0 excluded)
    class_sq: Vec<f64>,
    n: usize,
    power_budget: f64,
    max_nonzero: usize,
    cdf: Vec<f64>,
}

impl ConstraintDp {
    fn new(prior: &DiscreteDistribution, n: usize, avg_power: f64, duty_cycle: f64) -> Self {
        let atoms = prior.atoms().to_vec();
        let probs = prior.probs().to_vec();
        let mut class = Vec::with_capacity(atoms.len());
        let mut class_sq: Vec<f64> = Vec::new();
        for &a in &atoms {
            if a == 0.0 {
                class.push(0);
                continue;
            }
            let sq = a * a;
            let found = class_sq.iter().position(|&s| (s - sq).abs() <= 1e-9 * sq.max(1.0));
            let idx = match found {
                Some(i) => i,
                None => {
                    class_sq.push(sq);
                    class_sq.len() - 1
                }
            };
            class.push(idx + 1);
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let max_nonzero = (n as f64 * duty_cycle + 1e-9).floor() as usize;
        ConstraintDp {
            atoms,
            probs,
            class,
            class_sq,
            n,
            power_budget: n as f64 * avg_power + 1e-9,
            max_nonzero,
            cdf,
        }
    }

    fn feasible(&self, counts: &[usize]) -> bool {
        let nz: usize = counts.iter().sum();
        if nz > self.max_nonzero {
            return false;
        }
        let power: f64 = counts
            .iter()
            .zip(&self.class_sq)
            .map(|(&k, &sq)| k as f64 * sq)
            .sum();
        power <= self.power_budget
    }

    /// runs the DP with per-coordinate atom weights w(i, atom)
    fn run<W: Fn(usize, usize) -> f64>(&self, w: W) -> f64 {
        let s = self.class_sq.len();
        let mut states: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        states.insert(vec![0; s], 1.0);
        for i in 0..self.n {
            let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (counts, weight) in &states {
                for (j, &cls) in self.class.iter().enumerate() {
                    let mut c = counts.clone();
                    if cls > 0 {
                        c[cls - 1] += 1;
                        // prune states that can never return to feasibility
                        if !self.feasible(&c) {
                            continue;
                        }
                    }
                    *next.entry(c).or_insert(0.0) += weight * w(i, j);
                }
            }
            states = next;
        }
        states
            .iter()
            .filter(|(counts, _)| self.feasible(counts))
            .map(|(_, &w)| w)
            .sum()
    }

    /// P(A^n in T) under the product prior
    fn prior_mass(&self) -> f64 {
        self.run(|_, j| self.probs[j])
    }

    /// sum over a in T of prod p(a_i) phi(b_i - a_i), i.e. q(b) * P(T)
    fn restricted_density(&self, b: &[f64]) -> f64 {
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        self.run(|i, j| {
            let d = b[i] - self.atoms[j];
            self.probs[j] * norm * (-0.5 * d * d).exp()
        })
    }

    fn sample_atom<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        match self.cdf.iter().position(|&c| u <= c) {
            Some(i) => i,
            None => self.cdf.len() - 1,
        }
    }

    fn sample_conditioned<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let idx: Vec<usize> = (0..self.n).map(|_| self.sample_atom(rng)).collect();
            let mut counts = vec![0usize; self.class_sq.len()];
            for &j in &idx {
                if self.class[j] > 0 {
                    counts[self.class[j] - 1] += 1;
                }
            }
            if self.feasible(&counts) {
                return idx.iter().map(|&j| self.atoms[j]).collect();
            }
        }
    }
}

/// Mixture output log-density over source index for a finite battery of
/// discrete output pmfs (helper for tests and the CLI oracle commands).
pub fn mixture_log_density(sources: &[Vec<f64>], weights: &[f64], y: usize) -> f64 {
    let terms: Vec<f64> = sources
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(p, &w)| w.ln() + p[y].max(1e-300).ln())
        .collect();
    log_sum_exp(&terms)
}

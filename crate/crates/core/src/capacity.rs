//! Capacity-achieving input distributions for the unit-variance AWGN and
//! Poisson observation channels, plus mutual-information evaluators,
//! discrete Blahut-Arimoto, and KKT certification of solver output.
//!
//! All mutual informations and divergences are in nats.

use crate::distributions::{DiscreteDistribution, DistributionError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const LN_2PI: f64 = 1.8378770664093453;
/// h(W) for W ~ N(0,1): 0.5 ln(2 pi e).
pub const GAUSSIAN_ENTROPY: f64 = 1.4189385332046727;
/// Gaussian mixture tails are truncated this many standard deviations out.
pub const GAUSS_SPAN: f64 = 9.0;
/// Poisson conditional pmfs are truncated where the uniform tail bound drops below this.
pub const POISSON_TAIL: f64 = 1e-12;

const BA_MAX_ITERS: usize = 10_000;
const LOCATION_MAX_ROUNDS: usize = 2_000;
const MULTISTARTS: u64 = 5;
/// KKT slack above this at convergence marks the result with a warning.
pub const KKT_WARN_SLACK: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("row {0} of the transition matrix is not a pmf (sum {1})")]
    NonStochasticRow(usize, f64),
    #[error("Blahut-Arimoto did not converge in {iters} iterations (gap {gap:.3e})")]
    NoConvergence { iters: usize, gap: f64 },
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("quadrature failed: achieved error estimate {0:.3e}")]
    Quadrature(f64),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Scalar observation kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// B = A + W with W ~ N(0,1).
    AwgnUnitVariance,
    /// Y ~ Poisson(exposure * x).
    PoissonExposure { exposure: f64 },
}

/// Input constraints for the capacity problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstraintSet {
    /// E[A^2] <= P.
    pub avg_power: Option<f64>,
    /// P(A != 0) <= q, q in (0,1].
    pub duty_cycle: Option<f64>,
    /// a <= A <= A_max (required for the Poisson channel, with a > 0).
    pub peak: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub prior: DiscreteDistribution,
    pub mi_nats: f64,
    /// max over the certification grid of the information density minus capacity.
    pub kkt_slack: f64,
    /// (atom count, optimized MI) per step of the growth schedule.
    pub atom_count_history: Vec<(usize, f64)>,
    /// Lagrange multipliers (power, duty-cycle) at the solution.
    pub multipliers: (f64, f64),
    /// Set when the KKT slack exceeds `KKT_WARN_SLACK`.
    pub warning: bool,
}

// ---------------------------------------------------------------------------
// quadrature and small numeric helpers
// ---------------------------------------------------------------------------

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

#[inline]
pub fn log_gauss(d: f64) -> f64 {
    -0.5 * d * d - 0.5 * LN_2PI
}

/// Gauss-Hermite nodes and weights (weight function e^{-t^2}) via Newton
/// iteration on the Hermite recurrence; nodes ascending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = 0.7511255444649425; // pi^{-1/4}
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // initial guesses (Numerical Recipes):
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = 2.0 / (pp * pp);
        weights[i] = weights[n - 1 - i];
    }
    (nodes, weights)
}

/// Shared 96-node rule for standard-normal expectations.
fn gh96() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(96))
}

/// Log of a ratio-stabilized sum: ln sum exp(v_i).
pub fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Gaussian mixture output density sum p_i phi(y - x_i).
pub fn gaussian_mixture_density(prior: &DiscreteDistribution, y: f64) -> f64 {
    prior
        .iter()
        .map(|(a, p)| p * (-0.5 * (y - a) * (y - a)).exp())
        .sum::<f64>()
        / (LN_2PI.exp()).sqrt()
}

/// Cumulative ln k! table for 0..=n.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Smallest y_max such that the upper tail of Poisson(lambda) beyond y_max
/// is below `POISSON_TAIL`.
pub fn poisson_truncation(lambda: f64) -> usize {
    let mut y = lambda.ceil() as usize + 1;
    let mut log_p = -lambda + (y as f64) * lambda.ln() - ln_factorial_table(y)[y];
    // crude but safe: walk out until pmf * safety factor under the threshold
    loop {
        // tail bound: pmf(y) / (1 - lambda/(y+1)) once y > lambda
        let ratio = lambda / (y as f64 + 1.0);
        if ratio < 1.0 {
            let tail = log_p.exp() / (1.0 - ratio);
            if tail < POISSON_TAIL {
                return y;
            }
        }
        y += 1;
        log_p += lambda.ln() - (y as f64).ln();
    }
}

/// Conditional pmf table P(y | x) = Poisson(exposure*x) for y in 0..=y_max.
fn poisson_row(exposure: f64, x: f64, y_max: usize, lnf: &[f64]) -> Vec<f64> {
    let lam = exposure * x;
    let ll = lam.ln();
    (0..=y_max)
        .map(|y| (-lam + (y as f64) * ll - lnf[y]).exp())
        .collect()
}

// ---------------------------------------------------------------------------
// mutual information evaluators
// ---------------------------------------------------------------------------

/// I(A;B) in nats for B = A + W, W ~ N(0,1), A ~ prior.
///
/// Computed as h(B) - 0.5 ln(2 pi e) with adaptive quadrature over the
/// mixture output density; absolute quadrature error below 1e-8 nats.
pub fn mi_awgn(prior: &DiscreteDistribution) -> f64 {
    if prior.len() == 1 {
        return 0.0;
    }
    let lo = prior.atoms()[0] - GAUSS_SPAN;
    let hi = prior.atoms()[prior.len() - 1] + GAUSS_SPAN;
    let integrand = |y: f64| {
        let q = gaussian_mixture_density(prior, y);
        if q > 0.0 {
            -q * q.ln()
        } else {
            0.0
        }
    };
    let h = adaptive_simpson(&integrand, lo, hi, 1e-9);
    (h - GAUSSIAN_ENTROPY).max(0.0)
}

/// I(X;Y) in nats for Y ~ Poisson(exposure * X), X ~ prior with positive atoms.
pub fn mi_poisson(prior: &DiscreteDistribution, exposure: f64) -> f64 {
    assert!(exposure > 0.0, "exposure must be positive");
    assert!(prior.atoms()[0] > 0.0, "poisson atoms must be positive");
    let max_atom = prior.atoms()[prior.len() - 1];
    let y_max = poisson_truncation(exposure * max_atom);
    let lnf = ln_factorial_table(y_max);
    let rows: Vec<Vec<f64>> = prior
        .atoms()
        .iter()
        .map(|&x| poisson_row(exposure, x, y_max, &lnf))
        .collect();
    let mut out = vec![0.0; y_max + 1];
    for (row, &p) in rows.iter().zip(prior.probs()) {
        for (o, &c) in out.iter_mut().zip(row) {
            *o += p * c;
        }
    }
    let mut mi = 0.0;
    for (row, &p) in rows.iter().zip(prior.probs()) {
        for (&c, &q) in row.iter().zip(&out) {
            if c > 0.0 && q > 0.0 {
                mi += p * c * (c / q).ln();
            }
        }
    }
    mi.max(0.0)
}

// ---------------------------------------------------------------------------
// discrete Blahut-Arimoto
// ---------------------------------------------------------------------------

/// Capacity of a finite channel given row-stochastic transition rows
/// (rows = inputs, cols = outputs). Returns the maximizing input
/// distribution over row indices and the capacity in nats.
///
/// Stops once the standard duality gap max_i D_i - sum_i w_i D_i falls
/// below `tol`, which brackets the capacity within `tol`.
pub fn blahut_arimoto(
    rows: &[Vec<f64>],
    tol: f64,
) -> Result<(DiscreteDistribution, f64), CapacityError> {
    assert!(tol > 0.0);
    let m = rows.len();
    assert!(m > 0);
    let ncols = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if row.len() != ncols || (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
            return Err(CapacityError::NonStochasticRow(i, s));
        }
    }
    let mut w = vec![1.0 / m as f64; m];
    let mut d = vec![0.0; m];
    let mut last_gap = f64::INFINITY;
    for _ in 0..BA_MAX_ITERS {
        let mut q = vec![0.0; ncols];
        for (row, &wi) in rows.iter().zip(&w) {
            for (qy, &p) in q.iter_mut().zip(row) {
                *qy += wi * p;
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let mut di = 0.0;
            for (&p, &qy) in row.iter().zip(&q) {
                if p > 0.0 {
                    di += p * (p / qy).ln();
                }
            }
            d[i] = di;
        }
        let lower: f64 = w.iter().zip(&d).map(|(&wi, &di)| wi * di).sum();
        let upper = d
            .iter()
            .zip(&w)
            .filter(|(_, &wi)| wi > 0.0 || true)
            .map(|(&di, _)| di)
            .fold(f64::NEG_INFINITY, f64::max);
        last_gap = upper - lower;
        if last_gap < tol {
            let atoms: Vec<f64> = (0..m).map(|i| i as f64).collect();
            let prior = DiscreteDistribution::normalize(&w, &atoms)?;
            return Ok((prior, lower.max(0.0)));
        }
        let mut z = 0.0;
        for (wi, &di) in w.iter_mut().zip(&d) {
            *wi *= di.exp();
            z += *wi;
        }
        for wi in w.iter_mut() {
            *wi /= z;
        }
    }
    Err(CapacityError::NoConvergence { iters: BA_MAX_ITERS, gap: last_gap })
}

// ---------------------------------------------------------------------------
// constrained continuous-input solver
// ---------------------------------------------------------------------------

/// Internal working state: atom locations with probabilities (not yet a
/// canonical DiscreteDistribution; atoms may coalesce during optimization).
#[derive(Clone)]
struct Working {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

/// Relative-entropy terms D(P_{Y|x_i} || Q_Y) for the current prior.
fn info_densities(channel: ChannelModel, w: &Working) -> Vec<f64> {
    match channel {
        ChannelModel::AwgnUnitVariance => awgn_info_densities(&w.atoms, &w.probs, &w.atoms),
        ChannelModel::PoissonExposure { exposure } => {
            poisson_info_densities(exposure, &w.atoms, &w.probs, &w.atoms)
        }
    }
}

/// D(N(x,1) || mixture) for each x in `points`, mixture given by (atoms, probs).
///
/// Written as -h(W) - E[ln q(x + W)], W ~ N(0,1); the expectation is taken by
/// 96-node Gauss-Hermite quadrature (ln q is smooth and near-quadratic, so the
/// rule is accurate well past the tolerances used here).
pub fn awgn_info_densities(atoms: &[f64], probs: &[f64], points: &[f64]) -> Vec<f64> {
    let (nodes, weights) = gh96();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let lnp: Vec<f64> = probs
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mut terms = vec![0.0; atoms.len()];
    points
        .iter()
        .map(|&x| {
            let mut e = 0.0;
            for (&t, &w) in nodes.iter().zip(weights) {
                let y = x + std::f64::consts::SQRT_2 * t;
                for ((tm, &a), &lp) in terms.iter_mut().zip(atoms).zip(&lnp) {
                    *tm = lp + log_gauss(y - a);
                }
                e += w * log_sum_exp(&terms);
            }
            (-GAUSSIAN_ENTROPY - inv_sqrt_pi * e).max(0.0)
        })
        .collect()
}

/// D(Poi(T x) || mixture) for each x in `points`.
fn poisson_info_densities(exposure: f64, atoms: &[f64], probs: &[f64], points: &[f64]) -> Vec<f64> {
    let max_atom = atoms
        .iter()
        .chain(points)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let y_max = poisson_truncation(exposure * max_atom);
    let lnf = ln_factorial_table(y_max);
    let rows: Vec<Vec<f64>> = atoms
        .iter()
        .map(|&a| poisson_row(exposure, a, y_max, &lnf))
        .collect();
    let mut out = vec![0.0; y_max + 1];
    for (row, &p) in rows.iter().zip(probs) {
        for (o, &c) in out.iter_mut().zip(row) {
            *o += p * c;
        }
    }
    points
        .iter()
        .map(|&x| {
            let row = poisson_row(exposure, x, y_max, &lnf);
            row.iter()
                .zip(&out)
                .filter(|(&c, &q)| c > 0.0 && q > 0.0)
                .map(|(&c, &q)| c * (c / q).ln())
                .sum()
        })
        .collect()
}

/// One constrained multiplicative (Blahut-Arimoto style) probability update.
/// Returns the Lagrange multipliers used.
fn constrained_prob_update(
    w: &mut Working,
    d: &[f64],
    constraints: &ConstraintSet,
) -> (f64, f64) {
    let costs_sq: Vec<f64> = w.atoms.iter().map(|&x| x * x).collect();
    let nonzero: Vec<f64> = w
        .atoms
        .iter()
        .map(|&x| if x != 0.0 { 1.0 } else { 0.0 })
        .collect();
    let raw: Vec<f64> = w
        .probs
        .iter()
        .zip(d)
        .map(|(&p, &di)| if p > 0.0 { p.ln() + di } else { f64::NEG_INFINITY })
        .collect();

    let eval = |l1: f64, l2: f64| -> Vec<f64> {
        let logw: Vec<f64> = raw
            .iter()
            .zip(&costs_sq)
            .zip(&nonzero)
            .map(|((&r, &c), &s)| r - l1 * c - l2 * s)
            .collect();
        let z = log_sum_exp(&logw);
        logw.iter().map(|&lw| (lw - z).exp()).collect()
    };

    // duty-cycle multiplier for fixed power multiplier
    let solve_l2 = |l1: f64| -> (f64, Vec<f64>) {
        let Some(q) = constraints.duty_cycle else {
            return (0.0, eval(l1, 0.0));
        };
        if q >= 1.0 {
            return (0.0, eval(l1, 0.0));
        }
        let mass_nonzero =
            |p: &[f64]| p.iter().zip(&nonzero).map(|(&pi, &s)| pi * s).sum::<f64>();
        let p0 = eval(l1, 0.0);
        if mass_nonzero(&p0) <= q {
            return (0.0, p0);
        }
        let mut hi = 1.0;
        while mass_nonzero(&eval(l1, hi)) > q {
            hi *= 2.0;
            if hi > 1e8 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mass_nonzero(&eval(l1, mid)) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l2 = 0.5 * (lo + hi);
        (l2, eval(l1, l2))
    };

    let power = |p: &[f64]| p.iter().zip(&costs_sq).map(|(&pi, &c)| pi * c).sum::<f64>();

    let (l1, l2, probs) = match constraints.avg_power {
        None => {
            let (l2, p) = solve_l2(0.0);
            (0.0, l2, p)
        }
        Some(pmax) => {
            let (l2a, pa) = solve_l2(0.0);
            if power(&pa) <= pmax {
                (0.0, l2a, pa)
            } else {
                let mut hi = 1.0;
                loop {
                    let (_, p) = solve_l2(hi);
                    if power(&p) <= pmax || hi > 1e8 {
                        break;
                    }
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    let (_, p) = solve_l2(mid);
                    if power(&p) > pmax {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let l1 = 0.5 * (lo + hi);
                let (l2, p) = solve_l2(l1);
                (l1, l2, p)
            }
        }
    };
    w.probs = probs;
    (l1, l2)
}

/// Run the constrained BA probability loop to convergence for fixed atoms.
/// Returns (mi, multipliers).
fn prob_step(
    channel: ChannelModel,
    w: &mut Working,
    constraints: &ConstraintSet,
    tol: f64,
) -> (f64, (f64, f64)) {
    let mut last_mi = f64::NEG_INFINITY;
    let mut mults = (0.0, 0.0);
    for _ in 0..BA_MAX_ITERS {
        let d = info_densities(channel, w);
        let mi: f64 = w.probs.iter().zip(&d).map(|(&p, &di)| p * di).sum();
        mults = constrained_prob_update(w, &d, constraints);
        if (mi - last_mi).abs() < tol {
            last_mi = mi;
            break;
        }
        last_mi = mi;
    }
    (last_mi, mults)
}

/// Run constrained BA probability updates until the penalized information
/// densities equalize over the support to within `eq_tol` (the quantity the
/// KKT certificate measures). Returns (mi, multipliers).
fn prob_polish(
    channel: ChannelModel,
    w: &mut Working,
    constraints: &ConstraintSet,
    eq_tol: f64,
    max_iters: usize,
) -> (f64, (f64, f64)) {
    let mut mi = 0.0;
    let mut mults = (0.0, 0.0);
    for _ in 0..max_iters {
        let d = info_densities(channel, w);
        mi = w.probs.iter().zip(&d).map(|(&p, &di)| p * di).sum();
        let (l1, l2) = mults;
        let pen: Vec<f64> = w
            .atoms
            .iter()
            .zip(&d)
            .map(|(&x, &di)| di - l1 * x * x - l2 * if x != 0.0 { 1.0 } else { 0.0 })
            .collect();
        let avg: f64 = w.probs.iter().zip(&pen).map(|(&p, &v)| p * v).sum();
        let dev = w
            .probs
            .iter()
            .zip(&pen)
            .filter(|(&p, _)| p > 1e-9)
            .map(|(_, &v)| (v - avg).abs())
            .fold(0.0, f64::max);
        mults = constrained_prob_update(w, &d, constraints);
        if dev < eq_tol {
            break;
        }
    }
    (mi, mults)
}

/// Lagrangian value used for atom-location ascent.
fn location_objective(
    channel: ChannelModel,
    w: &Working,
    l1: f64,
) -> f64 {
    let d = info_densities(channel, w);
    let mi: f64 = w.probs.iter().zip(&d).map(|(&p, &di)| p * di).sum();
    let pw: f64 = w
        .probs
        .iter()
        .zip(&w.atoms)
        .map(|(&p, &x)| p * x * x)
        .sum();
    mi - l1 * pw
}

/// Bounds for the movable atoms and which indices may move.
struct LocationSpec {
    movable: Vec<usize>,
    lo: f64,
    hi: f64,
    /// mirror partner index for symmetric AWGN atoms (negative side follows).
    mirror: Vec<Option<usize>>,
}

/// Projected gradient ascent on atom locations for fixed probabilities.
fn location_step(
    channel: ChannelModel,
    w: &mut Working,
    spec: &LocationSpec,
    l1: f64,
    rounds: usize,
    improve_tol: f64,
) {
    let fd = 1e-5;
    let mut step = 0.05;
    let mut current = location_objective(channel, w, l1);
    for _ in 0..rounds {
        // finite-difference gradient over movable coordinates
        let mut grad = vec![0.0; spec.movable.len()];
        for (gi, &idx) in spec.movable.iter().enumerate() {
            let orig = w.atoms[idx];
            set_atom(w, spec, idx, orig + fd);
            let up = location_objective(channel, w, l1);
            set_atom(w, spec, idx, orig - fd);
            let dn = location_objective(channel, w, l1);
            set_atom(w, spec, idx, orig);
            grad[gi] = (up - dn) / (2.0 * fd);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-12 {
            break;
        }
        // backtracking line search with projection
        let saved: Vec<f64> = w.atoms.clone();
        let mut improved = false;
        let mut s = step;
        for _ in 0..30 {
            for (gi, &idx) in spec.movable.iter().enumerate() {
                let cand = (saved[idx] + s * grad[gi] / gnorm).clamp(spec.lo, spec.hi);
                set_atom(w, spec, idx, cand);
            }
            let val = location_objective(channel, w, l1);
            if val > current + 1e-15 {
                current = val;
                improved = true;
                step = s * 1.5;
                break;
            }
            s *= 0.5;
        }
        if !improved {
            w.atoms = saved;
            break;
        }
        if step * gnorm < improve_tol {
            break;
        }
    }
}

fn set_atom(w: &mut Working, spec: &LocationSpec, idx: usize, value: f64) {
    w.atoms[idx] = value;
    if let Some(m) = spec.mirror[idx] {
        w.atoms[m] = -value;
    }
}

fn validate(channel: ChannelModel, constraints: &ConstraintSet) -> Result<(), CapacityError> {
    match channel {
        ChannelModel::AwgnUnitVariance => {
            if constraints.avg_power.is_none() && constraints.peak.is_none() {
                return Err(CapacityError::Infeasible(
                    "awgn requires a power or peak constraint".into(),
                ));
            }
            if let Some(p) = constraints.avg_power {
                if p <= 0.0 {
                    return Err(CapacityError::Infeasible("avg_power must be positive".into()));
                }
            }
            if let Some(q) = constraints.duty_cycle {
                if q <= 0.0 || q > 1.0 {
                    return Err(CapacityError::Infeasible("duty_cycle must be in (0,1]".into()));
                }
            }
        }
        ChannelModel::PoissonExposure { exposure } => {
            if exposure <= 0.0 {
                return Err(CapacityError::Infeasible("exposure must be positive".into()));
            }
            match constraints.peak {
                Some((a, b)) if a > 0.0 && b > a => {}
                Some((a, b)) if a > 0.0 && b == a => {}
                _ => {
                    return Err(CapacityError::Infeasible(
                        "poisson requires peak constraints with peak_lo > 0".into(),
                    ))
                }
            }
        }
    }
    Ok(())
}

/// Compute the capacity-achieving prior by alternating constrained
/// multiplicative probability updates with projected-gradient atom moves,
/// growing the atom count from 3 until the optimized MI increment falls
/// below `stop_tol`.
pub fn solve_capacity(
    channel: ChannelModel,
    constraints: &ConstraintSet,
    stop_tol: f64,
) -> Result<CapacityResult, CapacityError> {
    validate(channel, constraints)?;
    match channel {
        ChannelModel::AwgnUnitVariance => solve_awgn(constraints, stop_tol),
        ChannelModel::PoissonExposure { exposure } => {
            solve_poisson(exposure, constraints, stop_tol)
        }
    }
}

/// AWGN: atoms constrained symmetric about 0 (0 plus +/- u_j pairs) with a
/// pinned atom at exactly 0 carrying the duty-cycle slack.
fn solve_awgn(constraints: &ConstraintSet, stop_tol: f64) -> Result<CapacityResult, CapacityError> {
    let pmax = constraints.avg_power.unwrap_or(f64::INFINITY);
    let q = constraints.duty_cycle.unwrap_or(1.0);
    let scale = if pmax.is_finite() { (pmax / q).sqrt() } else { 1.0 };
    let channel = ChannelModel::AwgnUnitVariance;
    let hi = awgn_domain(constraints);

    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut best: Option<(Working, f64, (f64, f64))> = None;
    let mut pairs = 1usize; // positive atoms; total count = 2*pairs + 1
    loop {
        let mut round_best: Option<(Working, f64, (f64, f64))> = None;
        for start in 0..MULTISTARTS {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1ab1e ^ start);
            let mut pos: Vec<f64> = if start == 0 {
                // deterministic spread, plus warm start from the previous count
                match &best {
                    Some((wb, _, _)) => {
                        let mut p: Vec<f64> = wb
                            .atoms
                            .iter()
                            .copied()
                            .filter(|&a| a > 0.0)
                            .collect();
                        p.push(p.iter().cloned().fold(0.0, f64::max) + 0.7 * scale);
                        p
                    }
                    None => (1..=pairs).map(|j| j as f64 * scale).collect(),
                }
            } else {
                (0..pairs)
                    .map(|_| rng.gen_range(0.2 * scale..2.5 * scale))
                    .collect()
            };
            for u in pos.iter_mut() {
                *u = u.clamp(1e-8, hi);
            }
            pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pos.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            // refill collapsed slots at the midpoints of the widest gaps
            while pos.len() < pairs {
                let mut edges = vec![0.0];
                edges.extend_from_slice(&pos);
                edges.push(hi);
                let (i, _) = edges
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| (i, w[1] - w[0]))
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                pos.push(0.5 * (edges[i] + edges[i + 1]));
                pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            let mut atoms = vec![0.0];
            for &u in &pos {
                atoms.push(u);
                atoms.push(-u);
            }
            let m = atoms.len();
            let mut w = Working { atoms, probs: vec![1.0 / m as f64; m] };
            let spec = LocationSpec {
                movable: (1..m).step_by(2).collect(),
                lo: 1e-8,
                hi,
                mirror: (0..m)
                    .map(|i| if i >= 1 && i % 2 == 1 { Some(i + 1) } else { None })
                    .collect(),
            };
            let mut mi = f64::NEG_INFINITY;
            for _ in 0..40 {
                let (m_now, mu) = prob_step(channel, &mut w, constraints, stop_tol * 1e-3);
                location_step(channel, &mut w, &spec, mu.0, LOCATION_MAX_ROUNDS / 40, stop_tol * 1e-3);
                if (m_now - mi).abs() < stop_tol * 1e-2 {
                    break;
                }
                mi = m_now;
            }
            let (mi_final, mu) = prob_step(channel, &mut w, constraints, stop_tol * 1e-4);
            if round_best.as_ref().is_none_or(|(_, b, _)| mi_final > *b) {
                round_best = Some((w, mi_final, mu));
            }
        }
        let (w, mi, mults) = round_best.unwrap();
        let prev_mi = history.last().map(|&(_, m)| m).unwrap_or(f64::NEG_INFINITY);
        let mi = mi.max(prev_mi); // growth schedule is monotone by warm start
        history.push((2 * pairs + 1, mi));
        if best.as_ref().is_none_or(|(_, b, _)| mi >= *b) {
            best = Some((w, mi, mults));
        }
        if history.len() >= 2 && mi - prev_mi < stop_tol {
            break;
        }
        pairs += 1;
        if pairs > 12 {
            break;
        }
    }
    let (mut w, mut mi, mut mults) = best.unwrap();
    // polish the winning support with tighter alternating rounds so the
    // multipliers and atom locations satisfy the certificate tolerance
    let m = w.atoms.len();
    let spec = LocationSpec {
        movable: (1..m).step_by(2).collect(),
        lo: 1e-8,
        hi,
        mirror: (0..m)
            .map(|i| if i >= 1 && i % 2 == 1 { Some(i + 1) } else { None })
            .collect(),
    };
    for round in 0..30 {
        location_step(channel, &mut w, &spec, mults.0, 200, stop_tol * 1e-5);
        let (m_now, mu) = prob_polish(channel, &mut w, constraints, 2e-5, 200_000);
        mults = mu;
        let done = round > 0 && (m_now - mi).abs() < stop_tol * 1e-4;
        mi = m_now;
        if done {
            break;
        }
    }
    finish_result(ChannelModel::AwgnUnitVariance, w, mi, mults, history, constraints)
}

fn solve_poisson(
    exposure: f64,
    constraints: &ConstraintSet,
    stop_tol: f64,
) -> Result<CapacityResult, CapacityError> {
    let (a, b) = constraints.peak.unwrap();
    let channel = ChannelModel::PoissonExposure { exposure };
    if b == a {
        let prior = DiscreteDistribution::point_mass(a);
        return Ok(CapacityResult {
            prior,
            mi_nats: 0.0,
            kkt_slack: 0.0,
            atom_count_history: vec![(1, 0.0)],
            multipliers: (0.0, 0.0),
            warning: false,
        });
    }
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut best: Option<(Working, f64)> = None;
    let mut count = 3usize;
    loop {
        let mut round_best: Option<(Working, f64)> = None;
        for start in 0..MULTISTARTS {
            let mut rng = ChaCha8Rng::seed_from_u64(0xdecafbad ^ start);
            let mut atoms: Vec<f64> = if start == 0 {
                match &best {
                    Some((wb, _)) => {
                        let mut v = wb.atoms.clone();
                        // insert a new atom at the widest gap
                        let mut gap_at = (0, 0.0);
                        for i in 0..v.len() - 1 {
                            let g = v[i + 1] - v[i];
                            if g > gap_at.1 {
                                gap_at = (i, g);
                            }
                        }
                        v.push(v[gap_at.0] + 0.5 * gap_at.1);
                        v
                    }
                    None => (0..count)
                        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
                        .collect(),
                }
            } else {
                let mut v = vec![a, b];
                for _ in 2..count {
                    v.push(rng.gen_range(a..b));
                }
                v
            };
            atoms.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let m = atoms.len();
            let mut w = Working { atoms, probs: vec![1.0 / m as f64; m] };
            let spec = LocationSpec {
                movable: (0..m).collect(),
                lo: a,
                hi: b,
                mirror: vec![None; m],
            };
            let mut mi = f64::NEG_INFINITY;
            for _ in 0..40 {
                let (m_now, _) = prob_step(channel, &mut w, constraints, stop_tol * 1e-3);
                location_step(channel, &mut w, &spec, 0.0, LOCATION_MAX_ROUNDS / 40, stop_tol * 1e-3);
                if (m_now - mi).abs() < stop_tol * 1e-2 {
                    break;
                }
                mi = m_now;
            }
            let (mi_final, _) = prob_step(channel, &mut w, constraints, stop_tol * 1e-4);
            if round_best.as_ref().is_none_or(|(_, b2)| mi_final > *b2) {
                round_best = Some((w, mi_final));
            }
        }
        let (w, mi) = round_best.unwrap();
        let prev_mi = history.last().map(|&(_, m)| m).unwrap_or(f64::NEG_INFINITY);
        let mi = mi.max(prev_mi);
        history.push((count, mi));
        if best.as_ref().is_none_or(|(_, b2)| mi >= *b2) {
            best = Some((w, mi));
        }
        if history.len() >= 2 && mi - prev_mi < stop_tol {
            break;
        }
        count += 1;
        if count > 16 {
            break;
        }
    }
    let (w, mi) = best.unwrap();
    finish_result(channel, w, mi, (0.0, 0.0), history, constraints)
}

fn finish_result(
    channel: ChannelModel,
    w: Working,
    mi: f64,
    mults: (f64, f64),
    history: Vec<(usize, f64)>,
    constraints: &ConstraintSet,
) -> Result<CapacityResult, CapacityError> {
    // prune vanishing atoms, merge coalesced ones
    let mut keep: Vec<(f64, f64)> = w
        .atoms
        .iter()
        .zip(&w.probs)
        .filter(|(_, &p)| p > 1e-12)
        .map(|(&a, &p)| (a, p))
        .collect();
    keep.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(keep.len());
    for (a, p) in keep {
        match merged.last_mut() {
            Some((la, lp)) if (a - *la).abs() <= 1e-5 * a.abs().max(1.0) => {
                let tot = *lp + p;
                // a pinned zero atom stays exactly zero (duty-cycle indicator)
                *la = if *la == 0.0 || a == 0.0 { 0.0 } else { (*la * *lp + a * p) / tot };
                *lp = tot;
            }
            _ => merged.push((a, p)),
        }
    }
    let (atoms, masses): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
    let prior = DiscreteDistribution::normalize(&masses, &atoms)?;
    let grid = certification_grid(channel, constraints);
    let mut result = CapacityResult {
        prior,
        mi_nats: mi,
        kkt_slack: 0.0,
        atom_count_history: history,
        multipliers: mults,
        warning: false,
    };
    result.kkt_slack = kkt_certificate(&result, channel, &grid);
    result.warning = result.kkt_slack > KKT_WARN_SLACK;
    Ok(result)
}

/// Half-width of the AWGN amplitude domain [-L, L]. Average-power plus
/// duty-cycle constraints alone admit no maximizer (mass can always spread
/// further out at vanishing probability), so the input alphabet is modeled
/// as a bounded interval wide enough to be immaterial for the constraint
/// sets of interest; solver, oracle, and certificate all share it.
pub fn awgn_domain(constraints: &ConstraintSet) -> f64 {
    if let Some((a, b)) = constraints.peak {
        return a.abs().max(b.abs());
    }
    let pmax = constraints.avg_power.unwrap_or(1.0);
    let q = constraints.duty_cycle.unwrap_or(1.0);
    6.0f64.max(2.0 * (pmax / q).sqrt())
}

/// Default certification grid covering the constraint support.
pub fn certification_grid(channel: ChannelModel, constraints: &ConstraintSet) -> Vec<f64> {
    match channel {
        ChannelModel::AwgnUnitVariance => {
            let span = awgn_domain(constraints);
            let step = 0.01;
            let n = (2.0 * span / step).round() as usize;
            let mut g: Vec<f64> = (0..=n).map(|i| -span + i as f64 * step).collect();
            g.push(0.0);
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            g.dedup();
            g
        }
        ChannelModel::PoissonExposure { .. } => {
            let (a, b) = constraints.peak.expect("poisson constraints carry a peak range");
            let step = 1e-3;
            let n = ((b - a) / step).round() as usize;
            (0..=n).map(|i| a + i as f64 * step).collect()
        }
    }
}

/// Maximum over the grid of the marginal information density
/// i(x) = D(P_{Y|x} || Q_Y) - l1 x^2 - l2 1{x != 0} minus the reference
/// capacity C = sum_i p_i i(x_i). Nonpositive slack certifies optimality.
pub fn kkt_certificate(
    result: &CapacityResult,
    channel: ChannelModel,
    grid: &[f64],
) -> f64 {
    let (l1, l2) = result.multipliers;
    let dens = |points: &[f64]| -> Vec<f64> {
        match channel {
            ChannelModel::AwgnUnitVariance => {
                awgn_info_densities(result.prior.atoms(), result.prior.probs(), points)
            }
            ChannelModel::PoissonExposure { exposure } => poisson_info_densities(
                exposure,
                result.prior.atoms(),
                result.prior.probs(),
                points,
            ),
        }
    };
    let ix = |d: f64, x: f64| d - l1 * x * x - l2 * if x != 0.0 { 1.0 } else { 0.0 };
    let d_support = dens(result.prior.atoms());
    let c_ref: f64 = result
        .prior
        .iter()
        .zip(&d_support)
        .map(|((a, p), &d)| p * ix(d, a))
        .sum();
    let d_grid = dens(grid);
    d_grid
        .iter()
        .zip(grid)
        .map(|(&d, &x)| ix(d, x) - c_ref)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Max absolute deviation of the information density from the reference
/// capacity over the support atoms (equalizer property).
pub fn equalizer_deviation(result: &CapacityResult, channel: ChannelModel) -> f64 {
    let (l1, l2) = result.multipliers;
    let dens = match channel {
        ChannelModel::AwgnUnitVariance => {
            awgn_info_densities(result.prior.atoms(), result.prior.probs(), result.prior.atoms())
        }
        ChannelModel::PoissonExposure { exposure } => poisson_info_densities(
            exposure,
            result.prior.atoms(),
            result.prior.probs(),
            result.prior.atoms(),
        ),
    };
    let ix = |d: f64, x: f64| d - l1 * x * x - l2 * if x != 0.0 { 1.0 } else { 0.0 };
    let c_ref: f64 = result
        .prior
        .iter()
        .zip(&dens)
        .map(|((a, p), &d)| p * ix(d, a))
        .sum();
    result
        .prior
        .iter()
        .zip(&dens)
        .map(|((a, _), &d)| (ix(d, a) - c_ref).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn ba_identity_channel() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (w, c) = blahut_arimoto(&rows, 1e-10).unwrap();
        assert_abs_diff_eq!(c, std::f64::consts::LN_2, epsilon = 1e-9);
        assert_abs_diff_eq!(w.probs()[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn ba_single_row_channel() {
        let rows = vec![vec![0.3, 0.7]];
        let (_, c) = blahut_arimoto(&rows, 1e-10).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ba_bsc_closed_form() {
        let p = 0.11;
        let rows = vec![vec![1.0 - p, p], vec![p, 1.0 - p]];
        let (_, c) = blahut_arimoto(&rows, 1e-12).unwrap();
        let h2 = |x: f64| -x * x.ln() - (1.0 - x) * (1.0 - x).ln();
        let expect = std::f64::consts::LN_2 - h2(p);
        assert_abs_diff_eq!(c, expect, epsilon = 1e-9);
        // in bits: 1 - h2(0.11) = 0.50008...
        assert_abs_diff_eq!(c / std::f64::consts::LN_2, 0.5004, epsilon = 1e-3);
    }

    #[test]
    fn ba_rejects_non_stochastic_rows() {
        let rows = vec![vec![0.5, 0.4], vec![0.5, 0.5]];
        assert!(blahut_arimoto(&rows, 1e-8).is_err());
    }

    #[test]
    fn ba_matches_simplex_grid_search() {
        // exhaustive input-simplex search, step 0.01
        let rows = vec![vec![0.9, 0.1, 0.0], vec![0.1, 0.8, 0.1], vec![0.05, 0.15, 0.8]];
        let (_, c) = blahut_arimoto(&rows, 1e-9).unwrap();
        let mut best = 0.0f64;
        let steps = 100usize;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let w = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let mut q = [0.0; 3];
                for (row, &wi) in rows.iter().zip(&w) {
                    for (qk, &p) in q.iter_mut().zip(row) {
                        *qk += wi * p;
                    }
                }
                let mut mi = 0.0;
                for (row, &wi) in rows.iter().zip(&w) {
                    for (&p, &qk) in row.iter().zip(&q) {
                        if wi > 0.0 && p > 0.0 {
                            mi += wi * p * (p / qk).ln();
                        }
                    }
                }
                best = best.max(mi);
            }
        }
        assert!((c - best).abs() <= 1e-3, "ba {c} grid {best}");
    }

    #[test]
    fn mi_awgn_point_mass_is_zero() {
        assert_abs_diff_eq!(mi_awgn(&DiscreteDistribution::point_mass(2.0)), 0.0);
    }

    #[test]
    fn mi_awgn_matches_trapezoid_oracle() {
        let prior = DiscreteDistribution::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let val = mi_awgn(&prior);
        // brute-force h(B) on [-9, 9], step 1e-3
        let step = 1e-3;
        let n = (18.0 / step) as usize;
        let mut h = 0.0;
        for k in 0..=n {
            let y = -9.0 + k as f64 * step;
            let q = gaussian_mixture_density(&prior, y);
            if q > 0.0 {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                h -= w * step * q * q.ln();
            }
        }
        assert_abs_diff_eq!(val, h - GAUSSIAN_ENTROPY, epsilon = 1e-6);
    }

    #[test]
    fn gauss_hermite_moments() {
        // E[Z^2] = 1, E[Z^4] = 3, E[Z^6] = 15 for Z ~ N(0,1)
        let (nodes, weights) = gauss_hermite(96);
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let moment = |k: u32| -> f64 {
            nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| w * (std::f64::consts::SQRT_2 * t).powi(k as i32))
                .sum::<f64>()
                * inv_sqrt_pi
        };
        assert_abs_diff_eq!(moment(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(moment(2), 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(moment(4), 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(moment(6), 15.0, epsilon = 1e-9);
    }

    #[test]
    fn awgn_info_density_matches_simpson_oracle() {
        // independent quadrature of D(N(x,1) || mixture) over a wide window
        let atoms = [-3.0, 0.0, 2.5];
        let probs = [0.3, 0.5, 0.2];
        for &x in &[-6.0, -1.2, 0.0, 0.7, 3.3, 6.0] {
            let got = awgn_info_densities(&atoms, &probs, &[x])[0];
            let f = |y: f64| {
                let lp = log_gauss(y - x);
                let q: f64 = atoms
                    .iter()
                    .zip(&probs)
                    .map(|(&a, &p)| p * log_gauss(y - a).exp())
                    .sum();
                lp.exp() * (lp - q.ln())
            };
            let oracle = adaptive_simpson(&f, x - 12.0, x + 12.0, 1e-12);
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn mi_awgn_vanishes_with_the_atom_gap() {
        let mut prev = f64::INFINITY;
        for &a in &[1.0, 0.5, 0.25, 0.125, 0.0625] {
            let prior = DiscreteDistribution::new(vec![-a, a], vec![0.5, 0.5]).unwrap();
            let mi = mi_awgn(&prior);
            assert!(mi < prev);
            prev = mi;
        }
        assert!(prev < 4e-3);
    }

    #[test]
    fn mi_poisson_point_mass_is_zero() {
        let prior = DiscreteDistribution::point_mass(1.3);
        assert_abs_diff_eq!(mi_poisson(&prior, 10.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mi_poisson_matches_direct_sum() {
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let val = mi_poisson(&prior, 10.0);
        let lnf = ln_factorial_table(200);
        let pmf = |lam: f64, y: usize| (-lam + y as f64 * lam.ln() - lnf[y]).exp();
        let mut mi = 0.0;
        for y in 0..=200usize {
            let c1 = pmf(5.0, y);
            let c2 = pmf(20.0, y);
            let q = 0.5 * c1 + 0.5 * c2;
            if c1 > 0.0 {
                mi += 0.5 * c1 * (c1 / q).ln();
            }
            if c2 > 0.0 {
                mi += 0.5 * c2 * (c2 / q).ln();
            }
        }
        assert_abs_diff_eq!(val, mi, epsilon = 1e-9);
    }

    #[test]
    fn mi_poisson_uninformative_exposure_limit() {
        let prior = DiscreteDistribution::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let mut prev = f64::INFINITY;
        for &t in &[1.0, 0.1, 0.01, 0.001] {
            let mi = mi_poisson(&prior, t);
            assert!(mi < prev);
            prev = mi;
        }
        assert!(prev < 2e-3);
    }

    #[test]
    fn awgn_power_only_capacity_bounded_by_gaussian() {
        let constraints =
            ConstraintSet { avg_power: Some(1.0), duty_cycle: None, peak: None };
        let r = solve_capacity(ChannelModel::AwgnUnitVariance, &constraints, 1e-5).unwrap();
        let shannon = 0.5 * (1.0f64 + 1.0).ln();
        assert!(r.mi_nats <= shannon + 1e-9, "mi {} > {}", r.mi_nats, shannon);
        // discrete atoms lose little at P = 1
        assert!(r.mi_nats > shannon - 1e-2, "mi {}", r.mi_nats);
        assert!(r.prior.moment(2) <= 1.0 + 1e-9);
        for w in r.atom_count_history.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
    }

    #[test]
    fn poisson_degenerate_peak_interval() {
        let constraints =
            ConstraintSet { avg_power: None, duty_cycle: None, peak: Some((1.0, 1.0)) };
        let r = solve_capacity(
            ChannelModel::PoissonExposure { exposure: 10.0 },
            &constraints,
            1e-5,
        )
        .unwrap();
        assert_abs_diff_eq!(r.mi_nats, 0.0);
        assert_abs_diff_eq!(r.kkt_slack, 0.0);
    }

    #[test]
    fn perturbed_prior_fails_certificate() {
        let constraints =
            ConstraintSet { avg_power: None, duty_cycle: None, peak: Some((0.5, 2.0)) };
        let channel = ChannelModel::PoissonExposure { exposure: 10.0 };
        let r = solve_capacity(channel, &constraints, 1e-5).unwrap();
        assert!(r.kkt_slack <= 1e-4, "slack {}", r.kkt_slack);
        // shift 5% of mass between two atoms: certificate must blow up
        let mut probs = r.prior.probs().to_vec();
        let delta = 0.05 * probs[0];
        probs[0] -= delta;
        let last = probs.len() - 1;
        probs[last] += delta;
        let bad = CapacityResult {
            prior: DiscreteDistribution::normalize(&probs, r.prior.atoms()).unwrap(),
            mi_nats: r.mi_nats,
            kkt_slack: 0.0,
            atom_count_history: vec![],
            multipliers: r.multipliers,
            warning: false,
        };
        let grid = certification_grid(channel, &constraints);
        let slack = kkt_certificate(&bad, channel, &grid);
        assert!(slack > 1e-3, "perturbed slack {slack}");
    }

    #[test]
    fn adaptive_simpson_polynomial_exact() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let val = adaptive_simpson(&f, -1.0, 3.0, 1e-12);
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert_abs_diff_eq!(val, exact, epsilon = 1e-10);
    }

    #[test]
    fn poisson_truncation_covers_tail() {
        for &lam in &[0.5, 5.0, 20.0, 80.0] {
            let y_max = poisson_truncation(lam);
            let lnf = ln_factorial_table(y_max + 400);
            let tail: f64 = (y_max + 1..y_max + 400)
                .map(|y| (-lam + y as f64 * lam.ln() - lnf[y]).exp())
                .sum();
            assert!(tail < POISSON_TAIL, "lambda {lam}: tail {tail}");
        }
    }

    proptest! {
        #[test]
        fn mi_awgn_concave_in_probabilities(
            seed in 0u64..50,
            lambda in 0.05f64..0.95,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms = vec![-2.0, -0.5, 0.7, 1.9];
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.02).collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / z).collect()
            };
            let p = draw(&mut rng);
            let q = draw(&mut rng);
            let mix: Vec<f64> = p
                .iter()
                .zip(&q)
                .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let mi = |probs: &[f64]| {
                mi_awgn(&DiscreteDistribution::new(atoms.clone(), probs.to_vec()).unwrap())
            };
            prop_assert!(mi(&mix) >= lambda * mi(&p) + (1.0 - lambda) * mi(&q) - 1e-9);
        }

        #[test]
        fn mi_poisson_concave_in_probabilities(
            seed in 0u64..50,
            lambda in 0.05f64..0.95,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let atoms = vec![0.5, 1.0, 1.5, 2.0];
            let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.02).collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / z).collect()
            };
            let p = draw(&mut rng);
            let q = draw(&mut rng);
            let mix: Vec<f64> = p
                .iter()
                .zip(&q)
                .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let mi = |probs: &[f64]| {
                mi_poisson(
                    &DiscreteDistribution::new(atoms.clone(), probs.to_vec()).unwrap(),
                    5.0,
                )
            };
            prop_assert!(mi(&mix) >= lambda * mi(&p) + (1.0 - lambda) * mi(&q) - 1e-9);
        }
    }
}

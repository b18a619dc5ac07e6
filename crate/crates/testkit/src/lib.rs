//! Dense-grid Blahut-Arimoto capacity oracles.
//!
//! These deliberately share no code with the main crate's capacity solver:
//! the input support is a fixed fine grid rather than optimized atom
//! locations, densities are evaluated by direct summation on an output grid
//! rather than by quadrature, and multipliers come from per-iteration
//! bisection. Test code compares the solver against these implementations.

/// Result of a dense-grid capacity run. `mi` is a lower bound on the grid
/// capacity; `mi + gap` is an upper bound (standard Lagrangian duality gap),
/// with the gap evaluated over the full grid after any pruning.
#[derive(Debug, Clone, Copy)]
pub struct GridCapacity {
    pub mi: f64,
    pub gap: f64,
}

/// Constrained dense-grid BA for the unit-variance AWGN channel with an
/// average-power bound `p_max` and duty-cycle bound `q`, input grid
/// [-6, 6] with the given step, output grid [-11, 11] with the same step.
pub fn dense_awgn_capacity(
    p_max: f64,
    q: f64,
    step: f64,
    gap_tol: f64,
    max_iters: usize,
) -> GridCapacity {
    let nx_half = (6.0 / step).round() as i64;
    let xs: Vec<f64> = (-nx_half..=nx_half).map(|i| i as f64 * step).collect();
    let ny_half = (11.0 / step).round() as i64;
    let ys: Vec<f64> = (-ny_half..=ny_half).map(|i| i as f64 * step).collect();
    let norm = step / (2.0 * std::f64::consts::PI).sqrt();
    let rows: Vec<(Vec<f64>, f64)> = xs
        .iter()
        .map(|&x| {
            let row: Vec<f64> =
                ys.iter().map(|&y| norm * (-0.5 * (y - x) * (y - x)).exp()).collect();
            // sum r ln r is constant per row; precomputing it leaves only
            // the ln q(y) term in the per-iteration divergence
            let rl = row.iter().filter(|&&r| r > 0.0).map(|&r| r * r.ln()).sum();
            (row, rl)
        })
        .collect();
    let duty = move |x: f64| if x != 0.0 { 1.0 } else { 0.0 };
    constrained_grid_ba(&xs, &rows, ys.len(), p_max, q, duty, gap_tol, max_iters)
}

/// Plain dense-grid BA for the Poisson channel Y ~ Poi(exposure * x) with
/// inputs on the peak interval [lo, hi] at the given step. Peak constraints
/// are encoded by the grid itself, so no multipliers are needed.
pub fn dense_poisson_capacity(
    exposure: f64,
    lo: f64,
    hi: f64,
    step: f64,
    gap_tol: f64,
    max_iters: usize,
) -> GridCapacity {
    let n = ((hi - lo) / step).round() as usize;
    let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    // truncate where a crude tail bound on the largest rate drops below 1e-14
    let lam_max = exposure * hi;
    let mut y_max = lam_max.ceil() as usize + 1;
    let mut lnf: Vec<f64> = vec![0.0];
    loop {
        while lnf.len() <= y_max + 1 {
            let k = lnf.len();
            lnf.push(lnf[k - 1] + (k as f64).ln());
        }
        let log_p = -lam_max + (y_max as f64) * lam_max.ln() - lnf[y_max];
        let ratio = lam_max / (y_max as f64 + 1.0);
        if ratio < 1.0 && log_p.exp() / (1.0 - ratio) < 1e-14 {
            break;
        }
        y_max += 1;
    }
    let rows: Vec<(Vec<f64>, f64)> = xs
        .iter()
        .map(|&x| {
            let lam = exposure * x;
            let ll = lam.ln();
            let row: Vec<f64> =
                (0..=y_max).map(|y| (-lam + (y as f64) * ll - lnf[y]).exp()).collect();
            let rl = row.iter().filter(|&&r| r > 0.0).map(|&r| r * r.ln()).sum();
            (row, rl)
        })
        .collect();
    constrained_grid_ba(&xs, &rows, y_max + 1, f64::INFINITY, 1.0, |_| 0.0, gap_tol, max_iters)
}

/// Shared constrained-BA loop over a fixed input grid. `rows[i]` holds the
/// conditional output pmf (already including any measure weight) and its
/// precomputed sum r ln r. The duty function gives the per-input cost hit by
/// the duty multiplier; squared input is the cost hit by the power multiplier.
#[allow(clippy::too_many_arguments)]
fn constrained_grid_ba(
    xs: &[f64],
    rows: &[(Vec<f64>, f64)],
    ny: usize,
    p_max: f64,
    q: f64,
    duty: impl Fn(f64) -> f64,
    gap_tol: f64,
    max_iters: usize,
) -> GridCapacity {
    let nx = xs.len();
    // active set: mass that collapses is pruned for speed; the returned gap
    // is recomputed over the full grid at the end
    let mut act: Vec<usize> = (0..nx).collect();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut l1w = 0.1f64;
    let mut l2w = 0.1f64;
    let mut l1_last = 0.0f64;
    let mut l2_last = 0.0f64;
    let mut mi = 0.0f64;
    let d_of = |act: &[usize], p: &[f64]| -> Vec<f64> {
        let mut qy = vec![0.0; ny];
        for (&i, &pi) in act.iter().zip(p) {
            if pi > 0.0 {
                for (qv, &r) in qy.iter_mut().zip(&rows[i].0) {
                    *qv += pi * r;
                }
            }
        }
        let lnq: Vec<f64> = qy.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
        act.iter()
            .map(|&i| rows[i].1 - rows[i].0.iter().zip(&lnq).map(|(&r, &l)| r * l).sum::<f64>())
            .collect()
    };
    for iter in 0..max_iters {
        let d = d_of(&act, &p);
        mi = p.iter().zip(&d).map(|(&pi, &di)| pi * di).sum();
        let raw: Vec<f64> = p
            .iter()
            .zip(&d)
            .map(|(&pi, &di)| if pi > 0.0 { pi.ln() + di } else { f64::NEG_INFINITY })
            .collect();
        let sq: Vec<f64> = act.iter().map(|&i| xs[i] * xs[i]).collect();
        let nz: Vec<f64> = act.iter().map(|&i| duty(xs[i])).collect();
        let eval = |l1: f64, l2: f64| -> Vec<f64> {
            let logw: Vec<f64> = raw
                .iter()
                .zip(&sq)
                .zip(&nz)
                .map(|((&r, &c), &s)| r - l1 * c - l2 * s)
                .collect();
            let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logw.iter().map(|&v| (v - m).exp()).sum();
            logw.iter().map(|&v| (v - m).exp() / z).collect()
        };
        let nzm = |pp: &[f64]| pp.iter().zip(&nz).map(|(&a, &b)| a * b).sum::<f64>();
        let pw = |pp: &[f64]| pp.iter().zip(&sq).map(|(&a, &b)| a * b).sum::<f64>();
        // warm-started bisection on the duty multiplier for fixed l1
        let solve_l2 = |l1: f64| -> (f64, Vec<f64>) {
            let p0 = eval(l1, 0.0);
            if nzm(&p0) <= q {
                return (0.0, p0);
            }
            let mut lo = (l2w / 4.0).max(1e-12);
            let mut hi = (l2w * 4.0).max(1e-6);
            while nzm(&eval(l1, lo)) <= q && lo > 1e-14 {
                lo /= 4.0;
            }
            while nzm(&eval(l1, hi)) > q && hi < 1e9 {
                hi *= 4.0;
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if nzm(&eval(l1, mid)) > q {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (hi, eval(l1, hi))
        };
        let (l1, l2, pn) = {
            let (l2a, pa) = solve_l2(0.0);
            if pw(&pa) <= p_max {
                (0.0, l2a, pa)
            } else {
                let mut lo = (l1w / 4.0).max(1e-12);
                let mut hi = (l1w * 4.0).max(1e-6);
                while pw(&solve_l2(lo).1) <= p_max && lo > 1e-14 {
                    lo /= 4.0;
                }
                while pw(&solve_l2(hi).1) > p_max && hi < 1e9 {
                    hi *= 4.0;
                }
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if pw(&solve_l2(mid).1) > p_max {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let (l2, pf) = solve_l2(hi);
                (hi, l2, pf)
            }
        };
        l1_last = l1;
        l2_last = l2;
        if l1 > 0.0 {
            l1w = l1;
        }
        if l2 > 0.0 {
            l2w = l2;
        }
        let pen: Vec<f64> = d
            .iter()
            .zip(&sq)
            .zip(&nz)
            .map(|((&di, &c), &s)| di - l1 * c - l2 * s)
            .collect();
        let avg: f64 = p.iter().zip(&pen).map(|(&pi, &v)| pi * v).sum();
        let gap = pen.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - avg;
        p = pn;
        if gap < gap_tol * 0.5 {
            // the active-set gap can undershoot the full-grid one when a
            // pruned shoulder point still lags; verify and re-activate if so
            let mut pf = vec![0.0; nx];
            for (&i, &pi) in act.iter().zip(&p) {
                pf[i] = pi;
            }
            let all: Vec<usize> = (0..nx).collect();
            let df = d_of(&all, &pf);
            let pen_f: Vec<f64> = df
                .iter()
                .enumerate()
                .map(|(i, &di)| di - l1_last * xs[i] * xs[i] - l2_last * duty(xs[i]))
                .collect();
            let avg_f: f64 = pf.iter().zip(&pen_f).map(|(&pi, &v)| pi * v).sum();
            let gap_f = pen_f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - avg_f;
            if gap_f < gap_tol {
                break;
            }
            for (pi, &v) in pf.iter_mut().zip(&pen_f) {
                if *pi == 0.0 && v > avg_f {
                    *pi = 1e-9;
                }
            }
            let z: f64 = pf.iter().sum();
            act = all;
            p = pf.iter().map(|&v| v / z).collect();
            continue;
        }
        if iter % 250 == 249 {
            let kept: Vec<(usize, f64)> = act
                .iter()
                .zip(&p)
                .filter(|(_, &pi)| pi > 1e-13)
                .map(|(&i, &pi)| (i, pi))
                .collect();
            let z: f64 = kept.iter().map(|&(_, pi)| pi).sum();
            act = kept.iter().map(|&(i, _)| i).collect();
            p = kept.iter().map(|&(_, pi)| pi / z).collect();
        }
    }
    // full-grid duality gap with the final multipliers
    let all: Vec<usize> = (0..nx).collect();
    let mut pf = vec![0.0; nx];
    for (&i, &pi) in act.iter().zip(&p) {
        pf[i] = pi;
    }
    let d = d_of(&all, &pf);
    let pen: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(i, &di)| di - l1_last * xs[i] * xs[i] - l2_last * duty(xs[i]))
        .collect();
    let avg: f64 = pf.iter().zip(&pen).map(|(&pi, &v)| pi * v).sum();
    let gap = pen.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - avg;
    GridCapacity { mi, gap }
}

//! End-to-end experiment runners: the sparse-Gaussian filter comparison
//! and the DC-Poisson filter comparison, with deterministic tables and
//! cmle-versus-time curves.

use crate::capacity::{solve_capacity, CapacityError, ChannelModel, ConstraintSet};
use crate::distributions::DiscreteDistribution;
use crate::gaussian::{
    default_eigen_tol, genie_filter, linear_nosparsity_filter, ml_filter,
    prune_prior_for_enumeration, reconstruct, whiten_gram, BasisSystem, FilterError,
    MinimaxFilter, Threshold, ENUMERATION_CAP,
};
use crate::poisson::{ml_clipped, poisson_posterior_mean, uniform_prior_filter};
use crate::sim::{simulate_poisson, trial_rng, Loss, SimError};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid config: {0}")]
    BadConfig(String),
}

/// Per-filter cmle summary for one source (or averaged over random truth).
#[derive(Debug, Clone)]
pub struct FilterSummary {
    pub filter: String,
    pub source: String,
    pub cmle: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<FilterSummary>,
    pub prior: DiscreteDistribution,
    pub mi_nats: f64,
    /// time grid shared by all curves
    pub time_grid: Vec<f64>,
    /// (filter name, mean cumulative loss at each grid time)
    pub curves: Vec<(String, Vec<f64>)>,
    /// (filter, source, final cmle per trial) — trials share paths across
    /// filters, enabling paired comparisons
    pub trial_losses: Vec<(String, String, Vec<f64>)>,
}

impl ExperimentResult {
    /// Delimited result table: header row, one row per (filter, source).
    /// Shortest-roundtrip float formatting keeps reruns byte-identical.
    pub fn table(&self) -> String {
        let mut s = String::from("filter\tsource\tcmle\tstderr\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", r.filter, r.source, r.cmle, r.stderr));
        }
        s
    }

    /// Mean and stderr of the per-trial difference cmle(b) - cmle(a) for
    /// two filters on the same source. Trials share paths across filters,
    /// so the paired stderr removes the common path variance.
    pub fn paired_difference(&self, a: &str, b: &str, source: &str) -> Option<(f64, f64)> {
        let find = |name: &str| {
            self.trial_losses
                .iter()
                .find(|(f, s, _)| f == name && s == source)
                .map(|(_, _, l)| l)
        };
        let (la, lb) = (find(a)?, find(b)?);
        if la.len() != lb.len() || la.is_empty() {
            return None;
        }
        let n = la.len() as f64;
        let diffs: Vec<f64> = lb.iter().zip(la).map(|(x, y)| x - y).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (diffs.len().max(2) - 1) as f64;
        Some((mean, (var / n).sqrt()))
    }

    pub fn worst_case(&self, filter: &str) -> Option<&FilterSummary> {
        self.rows
            .iter()
            .filter(|r| r.filter == filter)
            .max_by(|a, b| a.cmle.partial_cmp(&b.cmle).unwrap())
    }

    pub fn mean_row(&self, filter: &str) -> Option<&FilterSummary> {
        self.rows.iter().find(|r| r.filter == filter)
    }
}

#[derive(Debug, Clone)]
pub struct GaussianExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub avg_power: f64,
    pub horizon: f64,
    pub trials: u64,
    pub dt: f64,
    pub seed: u64,
    pub stop_tol: f64,
    /// `None` runs the capacity solver for P_d
    pub prior: Option<DiscreteDistribution>,
}

impl GaussianExperimentConfig {
    /// The published comparison setup: n=7, k=2, P = 10^0.4 (4 dB), T=10.
    pub fn reference(trials: u64, seed: u64) -> Self {
        GaussianExperimentConfig {
            n: 7,
            k: 2,
            avg_power: 10f64.powf(0.4),
            horizon: 10.0,
            trials,
            dt: 0.01,
            seed,
            stop_tol: 1e-5,
            prior: None,
        }
    }
}

/// One trial's output: final cmle per filter plus the cumulative-loss
/// curve per filter.
type TrialOutput = (Vec<f64>, Vec<Vec<f64>>);

pub const GAUSSIAN_FILTER_NAMES: [&str; 4] =
    ["minimax", "ml-hard", "linear-nosparsity", "genie"];

/// Sparse-signal comparison: minimax (Bayes under the i.i.d. capacity
/// prior), hard-thresholded ML, linear filter ignoring sparsity, and the
/// support-genie, all on random k-sparse coefficient draws.
pub fn run_gaussian_experiment(
    cfg: &GaussianExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    if cfg.trials == 0 || cfg.dt <= 0.0 {
        return Err(ExperimentError::BadConfig("trials >= 1 and dt > 0 required".into()));
    }
    if cfg.k == 0 || cfg.k > cfg.n {
        return Err(ExperimentError::BadConfig(format!(
            "sparsity k = {} outside 1..={}",
            cfg.k, cfg.n
        )));
    }
    let duty = cfg.k as f64 / cfg.n as f64;
    let (prior, mi_nats) = match &cfg.prior {
        Some(p) => (p.clone(), f64::NAN),
        None => {
            let constraints = ConstraintSet {
                avg_power: Some(cfg.avg_power),
                duty_cycle: Some(duty),
                peak: None,
            };
            let r = solve_capacity(ChannelModel::AwgnUnitVariance, &constraints, cfg.stop_tol)?;
            (r.prior, r.mi_nats)
        }
    };

    let basis = BasisSystem::haar(cfg.n, cfg.horizon);
    let bayes_prior = prune_prior_for_enumeration(&prior, cfg.n, ENUMERATION_CAP);
    let filter = MinimaxFilter::new(&bayes_prior, cfg.n)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let coef_sd = (cfg.n as f64 * cfg.avg_power / cfg.k as f64).sqrt();

    let nf = GAUSSIAN_FILTER_NAMES.len();
    let per_trial: Vec<TrialOutput> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial);
            // support uniform over size-k subsets (Floyd's algorithm)
            let mut support: Vec<usize> = Vec::with_capacity(cfg.k);
            for j in (cfg.n - cfg.k)..cfg.n {
                let t = rng.gen_range(0..=j);
                if support.contains(&t) {
                    support.push(j);
                } else {
                    support.push(t);
                }
            }
            support.sort_unstable();
            let mut coef = vec![0.0; cfg.n];
            for &s in &support {
                coef[s] = coef_sd * rng.sample::<f64, _>(StandardNormal);
            }

            // Euler-Maruyama path and running sufficient statistics
            let sqrt_dt = cfg.dt.sqrt();
            let mut ytilde = DVector::<f64>::zeros(cfg.n);
            let mut cml = vec![0.0; nf];
            let mut curves = vec![Vec::with_capacity(steps + 1); nf];
            let mut prev_loss = vec![0.0; nf];
            for k in 0..=steps {
                let t = k as f64 * cfg.dt;
                let x = basis.signal(&coef, t);
                let estimates: Vec<DVector<f64>> = if k == 0 {
                    (0..nf).map(|_| DVector::zeros(cfg.n)).collect()
                } else {
                    let gram = basis.gram(t);
                    let obs = whiten_gram(&gram, t, &ytilde, default_eigen_tol(&gram));
                    vec![
                        filter.estimate(&obs),
                        ml_filter(&obs, cfg.n, Threshold::Hard(cfg.k)),
                        linear_nosparsity_filter(&obs, cfg.avg_power),
                        genie_filter(&obs, &support, cfg.n, cfg.avg_power)
                            .expect("support validated"),
                    ]
                };
                for (f, est) in estimates.iter().enumerate() {
                    let xh = reconstruct(est, &basis, t);
                    let loss = 0.5 * (x - xh) * (x - xh);
                    if k > 0 {
                        cml[f] += 0.5 * (prev_loss[f] + loss) * cfg.dt;
                    }
                    prev_loss[f] = loss;
                    curves[f].push(cml[f]);
                }
                if k < steps {
                    let dy = x * cfg.dt + sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                    for i in 0..cfg.n {
                        ytilde[i] += basis.eval(i, t) * dy;
                    }
                }
            }
            (cml, curves)
        })
        .collect();

    let time_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let mut rows = Vec::with_capacity(nf);
    let mut curves = Vec::with_capacity(nf);
    let mut trial_losses = Vec::with_capacity(nf);
    for (f, name) in GAUSSIAN_FILTER_NAMES.iter().enumerate() {
        let losses: Vec<f64> = per_trial.iter().map(|(c, _)| c[f]).collect();
        let mean = losses.iter().sum::<f64>() / cfg.trials as f64;
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
            / (cfg.trials.max(2) - 1) as f64;
        rows.push(FilterSummary {
            filter: name.to_string(),
            source: "random-k-sparse".into(),
            cmle: mean,
            stderr: (var / cfg.trials as f64).sqrt(),
        });
        let mut curve = vec![0.0; steps + 1];
        for (_, trial_curves) in &per_trial {
            for (c, v) in curve.iter_mut().zip(&trial_curves[f]) {
                *c += v / cfg.trials as f64;
            }
        }
        curves.push((name.to_string(), curve));
        trial_losses.push((name.to_string(), "random-k-sparse".to_string(), losses));
    }
    Ok(ExperimentResult { rows, prior, mi_nats, time_grid, curves, trial_losses })
}

#[derive(Debug, Clone)]
pub struct PoissonExperimentConfig {
    pub lo: f64,
    pub hi: f64,
    pub horizon: f64,
    /// evaluation grid of DC truths; empty means random uniform truth
    pub truths: Vec<f64>,
    pub trials: u64,
    pub dt: f64,
    pub seed: u64,
    pub stop_tol: f64,
    pub prior: Option<DiscreteDistribution>,
}

impl PoissonExperimentConfig {
    /// The published setup: a=0.5, A=2, T=10, truth grid {0.5,1,1.5,2}.
    pub fn reference(trials: u64, seed: u64) -> Self {
        PoissonExperimentConfig {
            lo: 0.5,
            hi: 2.0,
            horizon: 10.0,
            truths: vec![0.5, 1.0, 1.5, 2.0],
            trials,
            dt: 0.01,
            seed,
            stop_tol: 1e-5,
            prior: None,
        }
    }
}

pub const POISSON_FILTER_NAMES: [&str; 3] = ["minimax", "uniform-prior", "ml-clipped"];

/// DC-Poisson comparison: minimax (Bayes under the peak-constrained
/// capacity prior), the uniform-prior Bayes filter, and clipped ML. One
/// row per (filter, truth); with an empty truth grid, one row per filter
/// under uniform random truth.
pub fn run_poisson_experiment(
    cfg: &PoissonExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    if cfg.trials == 0 || cfg.dt <= 0.0 {
        return Err(ExperimentError::BadConfig("trials >= 1 and dt > 0 required".into()));
    }
    if !(cfg.lo > 0.0 && cfg.hi > cfg.lo) {
        return Err(ExperimentError::BadConfig(format!(
            "need 0 < lo < hi, got [{}, {}]",
            cfg.lo, cfg.hi
        )));
    }
    let (prior, mi_nats) = match &cfg.prior {
        Some(p) => (p.clone(), f64::NAN),
        None => {
            let constraints = ConstraintSet {
                avg_power: None,
                duty_cycle: None,
                peak: Some((cfg.lo, cfg.hi)),
            };
            let r = solve_capacity(
                ChannelModel::PoissonExposure { exposure: cfg.horizon },
                &constraints,
                cfg.stop_tol,
            )?;
            (r.prior, r.mi_nats)
        }
    };
    for &a in prior.atoms() {
        if a <= 0.0 {
            return Err(ExperimentError::BadConfig(
                "poisson prior atoms must be positive".into(),
            ));
        }
    }

    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let nf = POISSON_FILTER_NAMES.len();
    let random_truth = cfg.truths.is_empty();
    let sources: Vec<Option<f64>> = if random_truth {
        vec![None]
    } else {
        cfg.truths.iter().map(|&x| Some(x)).collect()
    };

    let mut rows = Vec::new();
    let mut trial_losses = Vec::new();
    let mut curve_acc = vec![vec![0.0; steps + 1]; nf];
    let total_runs = sources.len() as u64 * cfg.trials;
    for (si, source) in sources.iter().enumerate() {
        let per_trial: Result<Vec<TrialOutput>, SimError> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(cfg.seed.wrapping_add(si as u64 * 0x9e37), trial);
                let x = match source {
                    Some(x) => *x,
                    None => rng.gen_range(cfg.lo..cfg.hi),
                };
                let path = simulate_poisson(x, cfg.horizon, cfg.dt, rng.gen());
                let mut cml = vec![0.0; nf];
                let mut curves = vec![Vec::with_capacity(steps + 1); nf];
                let mut prev_loss = vec![0.0; nf];
                for k in 0..=steps {
                    let t = path.grid[k];
                    let count = path.y[k] as u64;
                    let ests = [
                        poisson_posterior_mean(&prior, t, count),
                        uniform_prior_filter(t, count, cfg.lo, cfg.hi),
                        ml_clipped(t, count, cfg.lo, cfg.hi),
                    ];
                    for (f, &xh) in ests.iter().enumerate() {
                        let loss = Loss::NaturalPoisson.eval(x, xh)?;
                        if k > 0 {
                            cml[f] += 0.5 * (prev_loss[f] + loss) * cfg.dt;
                        }
                        prev_loss[f] = loss;
                        curves[f].push(cml[f]);
                    }
                }
                Ok((cml, curves))
            })
            .collect();
        let per_trial = per_trial?;
        let source_id = match source {
            Some(x) => format!("x={x}"),
            None => "uniform-random".to_string(),
        };
        for (f, name) in POISSON_FILTER_NAMES.iter().enumerate() {
            let losses: Vec<f64> = per_trial.iter().map(|(c, _)| c[f]).collect();
            let mean = losses.iter().sum::<f64>() / cfg.trials as f64;
            let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
                / (cfg.trials.max(2) - 1) as f64;
            rows.push(FilterSummary {
                filter: name.to_string(),
                source: source_id.clone(),
                cmle: mean,
                stderr: (var / cfg.trials as f64).sqrt(),
            });
            for (_, trial_curves) in &per_trial {
                for (c, v) in curve_acc[f].iter_mut().zip(&trial_curves[f]) {
                    *c += v / total_runs as f64;
                }
            }
            trial_losses.push((name.to_string(), source_id.clone(), losses));
        }
    }

    let time_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let curves = POISSON_FILTER_NAMES
        .iter()
        .zip(curve_acc)
        .map(|(name, c)| (name.to_string(), c))
        .collect();
    Ok(ExperimentResult { rows, prior, mi_nats, time_grid, curves, trial_losses })
}

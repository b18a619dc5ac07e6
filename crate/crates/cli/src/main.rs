//! `mmf` — capacity solving, minimax filtering, experiment replication,
//! finite-instance oracles, and config validation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure
//! (non-convergence or certificate failure).

mod config;
mod plot;

use clap::{Args, CommandFactory, Parser, Subcommand};
use minimax_filtering::capacity::{
    solve_capacity, CapacityResult, ChannelModel, ConstraintSet, KKT_WARN_SLACK,
};
use minimax_filtering::distributions::{kl_vec, DiscreteDistribution};
use minimax_filtering::experiments::{
    run_gaussian_experiment, run_poisson_experiment, ExperimentResult,
};
use minimax_filtering::gaussian::{
    default_eigen_tol, genie_filter, linear_nosparsity_filter, ml_filter,
    prune_prior_for_enumeration, reconstruct, whiten_gram, BasisSystem, MinimaxFilter,
    Threshold, ENUMERATION_CAP,
};
use minimax_filtering::info::{minimax_mixture, regret_capacity_oracle, strong_regret_check};
use minimax_filtering::poisson::{ml_clipped, poisson_posterior_mean, uniform_prior_filter};
use minimax_filtering::sim::{simulate_poisson, trial_rng};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use config::{ExperimentConfig, GaussianSection, OutputSection, PoissonSection, SCHEMA_VERSION};

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Parser)]
#[command(
    name = "mmf",
    version,
    about = "Minimax filtering toolkit: capacity-achieving priors, Bayesian causal \
             filters, and Monte-Carlo experiments for Gaussian and Poisson channels",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for a capacity-achieving input distribution
    Capacity {
        #[command(subcommand)]
        channel: CapacityCmd,
    },
    /// Run a causal filter over one simulated path and emit per-step estimates
    Filter {
        #[command(subcommand)]
        channel: FilterCmd,
    },
    /// Run a full Monte-Carlo comparison experiment
    Experiment {
        #[command(subcommand)]
        which: ExperimentCmd,
    },
    /// Finite-instance information oracles
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// Check an experiment config file; prints one diagnostic per line
    Validate {
        /// path to the TOML experiment config
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum CapacityCmd {
    /// Unit-variance additive Gaussian noise with power and duty-cycle constraints
    Awgn {
        /// average power bound E[A^2] <= P
        #[arg(long)]
        power: f64,
        /// duty-cycle bound P(A != 0) <= q
        #[arg(long, default_value_t = 1.0)]
        duty: f64,
        /// mass-point growth stopping tolerance in nats
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// report information quantities in bits instead of nats
        #[arg(long)]
        bits: bool,
        /// also write the result document to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Poisson observations with intensity on a peak interval
    Poisson {
        /// lower intensity bound a > 0
        #[arg(long)]
        lo: f64,
        /// upper intensity bound A
        #[arg(long)]
        hi: f64,
        /// observation horizon (exposure) T
        #[arg(long)]
        exposure: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long)]
        bits: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FilterCommon {
    /// prior file path, or "auto" to run the capacity solver
    #[arg(long, default_value = "auto")]
    prior: String,
    /// simulation step
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// RNG seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// also write the estimate table to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FilterCmd {
    /// Sparse-coefficient Gaussian white-noise channel
    Gaussian {
        /// basis dimension
        #[arg(long, default_value_t = 7)]
        n: usize,
        /// sparsity (number of nonzero coefficients)
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// average power in dB (P = 10^(dB/10))
        #[arg(long, default_value_t = 4.0)]
        power_db: f64,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        /// orthonormal system ("haar" is the only one built in)
        #[arg(long, default_value = "haar")]
        basis: String,
        #[command(flatten)]
        common: FilterCommon,
    },
    /// DC Poisson channel with intensity on a peak interval
    Poisson {
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 2.0)]
        hi: f64,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        /// true constant intensity of the simulated path
        #[arg(long)]
        truth: f64,
        #[command(flatten)]
        common: FilterCommon,
    },
}

#[derive(Args)]
struct ExperimentCommon {
    /// Monte-Carlo trials
    #[arg(long)]
    trials: Option<u64>,
    /// simulation step
    #[arg(long)]
    dt: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// load the full config from this TOML file (flags override nothing)
    #[arg(long)]
    config: Option<PathBuf>,
    /// directory for the result table, plot, prior, and manifest
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// skip the SVG plot
    #[arg(long)]
    no_plot: bool,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Sparse-Gaussian filter comparison (minimax, thresholded ML, linear, genie)
    Fig1 {
        #[command(flatten)]
        common: ExperimentCommon,
    },
    /// DC-Poisson filter comparison (minimax, uniform-prior, clipped ML)
    Fig2 {
        #[command(flatten)]
        common: ExperimentCommon,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Both sides of the regret-capacity identity on a finite instance
    RegretCapacity {
        /// instance file: one source pmf per line, whitespace-separated
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        bits: bool,
    },
    /// Strong regret-capacity bound for matched filters on a finite instance
    StrongRegret {
        #[arg(long)]
        instance: PathBuf,
        /// comma-separated epsilon values in (0,1)
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 0.9])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Capacity { channel } => run_capacity(channel),
        Command::Filter { channel } => run_filter(channel),
        Command::Experiment { which } => run_experiment(which),
        Command::Oracle { which } => run_oracle(which),
        Command::Validate { config } => run_validate(&config),
    }
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

fn run_capacity(cmd: CapacityCmd) -> Result<(), CliError> {
    let (channel, constraints, tol, bits, out, label) = match cmd {
        CapacityCmd::Awgn { power, duty, tol, bits, out } => (
            ChannelModel::AwgnUnitVariance,
            ConstraintSet { avg_power: Some(power), duty_cycle: Some(duty), peak: None },
            tol,
            bits,
            out,
            "awgn",
        ),
        CapacityCmd::Poisson { lo, hi, exposure, tol, bits, out } => (
            ChannelModel::PoissonExposure { exposure },
            ConstraintSet { avg_power: None, duty_cycle: None, peak: Some((lo, hi)) },
            tol,
            bits,
            out,
            "poisson",
        ),
    };
    let r = solve_capacity(channel, &constraints, tol)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let doc = capacity_document(label, &r, bits);
    print!("{doc}");
    if let Some(path) = out {
        write_file(&path, &doc)?;
    }
    if r.warning {
        return Err(CliError::Numerical(format!(
            "certificate failure: KKT slack {:.3e} exceeds {KKT_WARN_SLACK:.0e}",
            r.kkt_slack
        )));
    }
    Ok(())
}

fn capacity_document(channel: &str, r: &CapacityResult, bits: bool) -> String {
    let unit = if bits { "bits" } else { "nats" };
    let conv = if bits { 1.0 / LN_2 } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, "channel\t{channel}");
    let _ = writeln!(s, "mi_nats\t{}", r.mi_nats);
    let _ = writeln!(s, "mi_bits\t{}", r.mi_nats / LN_2);
    let _ = writeln!(s, "kkt_slack\t{}", r.kkt_slack);
    let _ = writeln!(s, "multiplier_power\t{}", r.multipliers.0);
    let _ = writeln!(s, "multiplier_duty\t{}", r.multipliers.1);
    let _ = writeln!(s, "warning\t{}", r.warning);
    let _ = writeln!(s, "atom_history\t# count\tmi_{unit}");
    for (count, mi) in &r.atom_count_history {
        let _ = writeln!(s, "atom_history\t{count}\t{}", mi * conv);
    }
    let _ = writeln!(s, "prior\t# atom\tprobability");
    for (a, p) in r.prior.iter() {
        let _ = writeln!(s, "prior\t{a}\t{p}");
    }
    s
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

fn run_filter(cmd: FilterCmd) -> Result<(), CliError> {
    match cmd {
        FilterCmd::Gaussian { n, k, power_db, horizon, basis, common } => {
            if basis != "haar" {
                return Err(CliError::Config(format!(
                    "basis: only \"haar\" is available, got {basis:?}"
                )));
            }
            if k == 0 || k > n {
                return Err(CliError::Config(format!("k: sparsity {k} outside 1..={n}")));
            }
            if common.dt <= 0.0 || horizon <= 0.0 {
                return Err(CliError::Config("dt and horizon must be positive".into()));
            }
            let power = 10f64.powf(power_db / 10.0);
            let prior = match common.prior.as_str() {
                "auto" => {
                    let constraints = ConstraintSet {
                        avg_power: Some(power),
                        duty_cycle: Some(k as f64 / n as f64),
                        peak: None,
                    };
                    solve_capacity(ChannelModel::AwgnUnitVariance, &constraints, 1e-5)
                        .map_err(|e| CliError::Numerical(e.to_string()))?
                        .prior
                }
                path => config::load_prior(path).map_err(CliError::Config)?,
            };
            let table = gaussian_filter_table(n, k, power, horizon, &prior, &common)?;
            print!("{table}");
            if let Some(path) = &common.out {
                write_file(path, &table)?;
            }
            Ok(())
        }
        FilterCmd::Poisson { lo, hi, horizon, truth, common } => {
            if !(lo > 0.0 && hi > lo) {
                return Err(CliError::Config(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
            }
            if !(lo..=hi).contains(&truth) {
                return Err(CliError::Config(format!(
                    "truth: {truth} outside the peak interval [{lo}, {hi}]"
                )));
            }
            if common.dt <= 0.0 || horizon <= 0.0 {
                return Err(CliError::Config("dt and horizon must be positive".into()));
            }
            let prior = match common.prior.as_str() {
                "auto" => {
                    let constraints = ConstraintSet {
                        avg_power: None,
                        duty_cycle: None,
                        peak: Some((lo, hi)),
                    };
                    solve_capacity(
                        ChannelModel::PoissonExposure { exposure: horizon },
                        &constraints,
                        1e-5,
                    )
                    .map_err(|e| CliError::Numerical(e.to_string()))?
                    .prior
                }
                path => {
                    let p = config::load_prior(path).map_err(CliError::Config)?;
                    if p.atoms().iter().any(|&a| a <= 0.0) {
                        return Err(CliError::Config(
                            "prior: poisson prior atoms must be positive".into(),
                        ));
                    }
                    p
                }
            };
            let path = simulate_poisson(truth, horizon, common.dt, common.seed);
            let mut s = String::from("t\tx\tminimax\tuniform-prior\tml-clipped\n");
            for (k, &t) in path.grid.iter().enumerate() {
                let count = path.y[k].round() as u64;
                let _ = writeln!(
                    s,
                    "{t}\t{truth}\t{}\t{}\t{}",
                    poisson_posterior_mean(&prior, t, count),
                    uniform_prior_filter(t, count, lo, hi),
                    ml_clipped(t, count, lo, hi)
                );
            }
            print!("{s}");
            if let Some(path) = &common.out {
                write_file(path, &s)?;
            }
            Ok(())
        }
    }
}

/// One seeded sparse-coefficient trial: per-step signal value and the four
/// filter estimates, mirroring the comparison experiment's inner loop.
fn gaussian_filter_table(
    n: usize,
    k: usize,
    power: f64,
    horizon: f64,
    prior: &DiscreteDistribution,
    common: &FilterCommon,
) -> Result<String, CliError> {
    let basis = BasisSystem::haar(n, horizon);
    let bayes_prior = prune_prior_for_enumeration(prior, n, ENUMERATION_CAP);
    let filter =
        MinimaxFilter::new(&bayes_prior, n).map_err(|e| CliError::Numerical(e.to_string()))?;
    let steps = (horizon / common.dt).round() as usize;
    let coef_sd = (n as f64 * power / k as f64).sqrt();
    let mut rng = trial_rng(common.seed, 0);
    let mut support: Vec<usize> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if support.contains(&t) {
            support.push(j);
        } else {
            support.push(t);
        }
    }
    support.sort_unstable();
    let mut coef = vec![0.0; n];
    for &s in &support {
        coef[s] = coef_sd * rng.sample::<f64, _>(StandardNormal);
    }
    let sqrt_dt = common.dt.sqrt();
    let mut ytilde = DVector::<f64>::zeros(n);
    let mut out = String::from("t\tx\tminimax\tml-hard\tlinear-nosparsity\tgenie\n");
    for step in 0..=steps {
        let t = step as f64 * common.dt;
        let x = basis.signal(&coef, t);
        let estimates: Vec<DVector<f64>> = if step == 0 {
            (0..4).map(|_| DVector::zeros(n)).collect()
        } else {
            let gram = basis.gram(t);
            let obs = whiten_gram(&gram, t, &ytilde, default_eigen_tol(&gram));
            vec![
                filter.estimate(&obs),
                ml_filter(&obs, n, Threshold::Hard(k)),
                linear_nosparsity_filter(&obs, power),
                genie_filter(&obs, &support, n, power)
                    .map_err(|e| CliError::Numerical(e.to_string()))?,
            ]
        };
        let _ = write!(out, "{t}\t{x}");
        for est in &estimates {
            let _ = write!(out, "\t{}", reconstruct(est, &basis, t));
        }
        out.push('\n');
        if step < steps {
            let dy = x * common.dt + sqrt_dt * rng.sample::<f64, _>(StandardNormal);
            for i in 0..n {
                ytilde[i] += basis.eval(i, t) * dy;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    tool: String,
    config: ExperimentConfig,
    mi_nats: f64,
    artifacts: Vec<ManifestArtifact>,
}

#[derive(Serialize)]
struct ManifestArtifact {
    path: String,
    sha256: String,
}

fn run_experiment(cmd: ExperimentCmd) -> Result<(), CliError> {
    let (id, common) = match cmd {
        ExperimentCmd::Fig1 { common } => ("fig1", common),
        ExperimentCmd::Fig2 { common } => ("fig2", common),
    };
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(CliError::Config)?,
        None => default_config(id),
    };
    // flags fill any holes left by the config file
    cfg.trials = common.trials.or(cfg.trials);
    cfg.dt = common.dt.or(cfg.dt);
    cfg.seed = common.seed.or(cfg.seed);
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(CliError::Config(diags.join("\n")));
    }
    if cfg.experiment.as_deref() != Some(id) {
        return Err(CliError::Config(format!(
            "experiment: config file declares {:?} but the subcommand is {id}",
            cfg.experiment
        )));
    }

    let result = match id {
        "fig1" => {
            let rc = cfg.resolve_gaussian().map_err(CliError::Config)?;
            run_gaussian_experiment(&rc).map_err(|e| CliError::Numerical(e.to_string()))?
        }
        _ => {
            let rc = cfg.resolve_poisson().map_err(CliError::Config)?;
            run_poisson_experiment(&rc).map_err(|e| CliError::Numerical(e.to_string()))?
        }
    };

    let out_dir = match cfg.output.as_ref().and_then(|o| o.dir.clone()) {
        Some(d) => PathBuf::from(d),
        None => common.out_dir.clone(),
    };
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let plot_enabled =
        !common.no_plot && cfg.output.as_ref().and_then(|o| o.plot).unwrap_or(true);

    let table = result.table();
    print!("{table}");
    if result.mi_nats.is_finite() {
        let (v, unit) = if cfg.in_bits() {
            (result.mi_nats / LN_2, "bits")
        } else {
            (result.mi_nats, "nats")
        };
        println!("# capacity prior mutual information: {v} {unit}");
    }

    let mut artifacts = Vec::new();
    let table_path = out_dir.join("results.tsv");
    write_file(&table_path, &table)?;
    artifacts.push(artifact(&out_dir, "results.tsv", &table));
    let prior_text = result.prior.to_text();
    write_file(&out_dir.join("prior.txt"), &prior_text)?;
    artifacts.push(artifact(&out_dir, "prior.txt", &prior_text));
    if plot_enabled {
        let svg = render_plot(id, &result);
        write_file(&out_dir.join("curves.svg"), &svg)?;
        artifacts.push(artifact(&out_dir, "curves.svg", &svg));
    }

    // echo the fully-resolved config so the manifest alone reproduces the run
    let resolved = resolved_config(id, &cfg, &out_dir, plot_enabled);
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: format!("mmf {}", env!("CARGO_PKG_VERSION")),
        config: resolved,
        mi_nats: result.mi_nats,
        artifacts,
    };
    let manifest_text = toml::to_string(&manifest)
        .map_err(|e| CliError::Numerical(format!("manifest serialization: {e}")))?;
    write_file(&out_dir.join("manifest.toml"), &manifest_text)?;
    Ok(())
}

fn default_config(id: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        schema_version: Some(SCHEMA_VERSION),
        experiment: Some(id.to_string()),
        ..Default::default()
    };
    match id {
        "fig1" => {
            cfg.gaussian = Some(GaussianSection {
                n: Some(7),
                k: Some(2),
                power_db: Some(4.0),
                horizon: Some(10.0),
            });
        }
        _ => {
            cfg.poisson = Some(PoissonSection {
                lo: Some(0.5),
                hi: Some(2.0),
                horizon: Some(10.0),
                truths: Some(vec![0.5, 1.0, 1.5, 2.0]),
            });
        }
    }
    cfg
}

fn resolved_config(
    id: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    plot: bool,
) -> ExperimentConfig {
    let mut r = cfg.clone();
    r.schema_version = Some(SCHEMA_VERSION);
    r.experiment = Some(id.to_string());
    r.trials = Some(cfg.trials.unwrap_or(100));
    r.dt = Some(cfg.dt.unwrap_or(0.01));
    r.seed = Some(cfg.seed.unwrap_or(1));
    r.units = Some(cfg.units.clone().unwrap_or_else(|| "nats".into()));
    r.prior = Some(cfg.prior.clone().unwrap_or_else(|| "auto".into()));
    r.output = Some(OutputSection {
        dir: Some(out_dir.display().to_string()),
        plot: Some(plot),
    });
    r
}

fn render_plot(id: &str, result: &ExperimentResult) -> String {
    let title = match id {
        "fig1" => "Sparse Gaussian: mean cumulative loss",
        _ => "DC Poisson: mean cumulative loss",
    };
    plot::line_plot(title, "time", "cumulative loss", &result.time_grid, &result.curves)
}

fn artifact(dir: &Path, name: &str, content: &str) -> ManifestArtifact {
    let mut h = Sha256::new();
    h.update(content.as_bytes());
    let _ = dir; // stored path is relative to the manifest location
    ManifestArtifact {
        path: name.to_string(),
        sha256: format!("{:x}", h.finalize()),
    }
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

/// Instance file: one source pmf per line, probabilities separated by
/// whitespace; blank lines and '#' comments ignored.
fn load_instance(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut sources = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|e| {
                CliError::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Config(format!(
                    "{}:{}: probability {v} outside [0,1]",
                    path.display(),
                    lineno + 1
                )));
            }
            row.push(v);
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(CliError::Config(format!(
                "{}:{}: row sums to {s}, not 1",
                path.display(),
                lineno + 1
            )));
        }
        for v in row.iter_mut() {
            *v /= s;
        }
        sources.push(row);
    }
    if sources.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least two source pmfs",
            path.display()
        )));
    }
    Ok(sources)
}

fn run_oracle(cmd: OracleCmd) -> Result<(), CliError> {
    match cmd {
        OracleCmd::RegretCapacity { instance, tol, bits } => {
            let sources = load_instance(&instance)?;
            let report = regret_capacity_oracle(&sources, tol)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let conv = if bits { 1.0 / LN_2 } else { 1.0 };
            let unit = if bits { "bits" } else { "nats" };
            println!("quantity\tvalue\tunit");
            println!("capacity\t{}\t{unit}", report.capacity * conv);
            println!("minimax\t{}\t{unit}", report.minimax * conv);
            println!("gap\t{}\t{unit}", report.gap * conv);
            Ok(())
        }
        OracleCmd::StrongRegret { instance, eps, tol } => {
            for &e in &eps {
                if !(0.0..1.0).contains(&e) {
                    return Err(CliError::Config(format!("eps: {e} outside [0,1)")));
                }
            }
            let sources = load_instance(&instance)?;
            let (weights, capacity) = minimax_mixture(&sources, tol)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            // filter battery: Bayes-matched to each source, plus the
            // capacity mixture itself (regret D(P_theta || Q))
            let mut battery: Vec<(String, Vec<f64>)> = Vec::new();
            let ncols = sources[0].len();
            let mut qstar = vec![0.0; ncols];
            for (p, &w) in sources.iter().zip(weights.probs()) {
                for (qj, &pj) in qstar.iter_mut().zip(p) {
                    *qj += w * pj;
                }
            }
            battery.push((
                "minimax".into(),
                sources.iter().map(|p| kl_vec(p, &qstar)).collect(),
            ));
            for j in 0..sources.len() {
                battery.push((
                    format!("matched-{j}"),
                    sources.iter().map(|p| kl_vec(p, &sources[j])).collect(),
                ));
            }
            println!("filter\teps\tmass\tbound\tpass");
            let mut all_pass = true;
            for (name, regrets) in &battery {
                for &e in &eps {
                    let check = strong_regret_check(regrets, &weights, capacity, e);
                    all_pass &= check.pass;
                    println!(
                        "{name}\t{e}\t{}\t{}\t{}",
                        check.mass, check.bound, check.pass
                    );
                }
            }
            if !all_pass {
                return Err(CliError::Numerical(
                    "strong regret bound violated on this instance".into(),
                ));
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn run_validate(path: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_path(path).map_err(CliError::Config)?;
    let diags = cfg.validate();
    if diags.is_empty() {
        println!("ok");
        Ok(())
    } else {
        for d in &diags {
            println!("{d}");
        }
        Err(CliError::Config(format!("{} diagnostic(s)", diags.len())))
    }
}

// ---------------------------------------------------------------------------

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

#[allow(dead_code)]
fn assert_cli_consistency() {
    Cli::command().debug_assert();
}

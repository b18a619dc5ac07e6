//! Experiment configuration: versioned TOML schema, validation
//! diagnostics, and resolution into the library's experiment configs.

use minimax_filtering::distributions::DiscreteDistribution;
use minimax_filtering::experiments::{GaussianExperimentConfig, PoissonExperimentConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk experiment configuration. Optional fields stay optional so that
/// validation can name exactly what is missing instead of failing to parse.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: Option<u32>,
    /// "fig1" (sparse Gaussian) or "fig2" (Poisson DC)
    pub experiment: Option<String>,
    pub trials: Option<u64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    /// "nats" (default) or "bits" for reported information quantities
    pub units: Option<String>,
    /// "auto" (capacity solver) or a path to a prior text file
    pub prior: Option<String>,
    pub gaussian: Option<GaussianSection>,
    pub poisson: Option<PoissonSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub power_db: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoissonSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub horizon: Option<f64>,
    pub truths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub plot: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Schema and semantic checks; an empty list means the config is
    /// runnable. Each diagnostic names the offending field.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        match self.schema_version {
            None => diags.push("schema_version: required (current version is 1)".into()),
            Some(v) if v != SCHEMA_VERSION => {
                diags.push(format!("schema_version: unsupported version {v} (expected 1)"))
            }
            _ => {}
        }
        let experiment = self.experiment.as_deref();
        match experiment {
            None => diags.push("experiment: required (\"fig1\" or \"fig2\")".into()),
            Some("fig1") | Some("fig2") => {}
            Some(other) => {
                diags.push(format!("experiment: unknown id {other:?} (expected fig1 or fig2)"))
            }
        }
        if let Some(t) = self.trials {
            if t < 1 {
                diags.push("trials: must be >= 1".into());
            }
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                diags.push(format!("dt: must be positive, got {dt}"));
            }
        }
        if let Some(u) = self.units.as_deref() {
            if u != "nats" && u != "bits" {
                diags.push(format!("units: expected \"nats\" or \"bits\", got {u:?}"));
            }
        }
        match experiment {
            Some("fig1") => {
                let g = self.gaussian.clone().unwrap_or_default();
                if self.gaussian.is_none() {
                    diags.push("gaussian: section required for fig1".into());
                }
                match g.horizon {
                    None => diags.push("gaussian.horizon: required".into()),
                    Some(h) if h <= 0.0 => {
                        diags.push("gaussian.horizon: must be positive".into())
                    }
                    _ => {}
                }
                let n = g.n.unwrap_or(7);
                let k = g.k.unwrap_or(2);
                if k == 0 || k > n {
                    diags.push(format!("gaussian.k: sparsity {k} outside 1..={n}"));
                }
            }
            Some("fig2") => {
                let p = self.poisson.clone().unwrap_or_default();
                if self.poisson.is_none() {
                    diags.push("poisson: section required for fig2".into());
                }
                match p.horizon {
                    None => diags.push("poisson.horizon: required".into()),
                    Some(h) if h <= 0.0 => {
                        diags.push("poisson.horizon: must be positive".into())
                    }
                    _ => {}
                }
                let lo = p.lo.unwrap_or(0.5);
                let hi = p.hi.unwrap_or(2.0);
                if !(lo > 0.0 && hi > lo) {
                    diags.push(format!("poisson.lo/hi: need 0 < lo < hi, got [{lo}, {hi}]"));
                }
                if let Some(truths) = &p.truths {
                    for &x in truths {
                        if !(lo..=hi).contains(&x) {
                            diags.push(format!(
                                "poisson.truths: truth {x} outside the peak interval [{lo}, {hi}]"
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        if let Some(prior) = self.prior.as_deref() {
            if prior != "auto" {
                match load_prior(prior) {
                    Err(e) => diags.push(format!("prior: {e}")),
                    Ok(d) => {
                        if experiment == Some("fig2") && d.atoms().iter().any(|&a| a <= 0.0) {
                            diags.push(
                                "prior: poisson prior atoms must be positive \
                                 (the channel requires intensities a > 0)"
                                    .into(),
                            );
                        }
                    }
                }
            }
        }
        diags
    }

    /// Fill defaults and convert to the library config. Call `validate`
    /// first; this panics only on contracts validate already enforces.
    pub fn resolve_gaussian(&self) -> Result<GaussianExperimentConfig, String> {
        let g = self.gaussian.clone().unwrap_or_default();
        let mut cfg = GaussianExperimentConfig::reference(
            self.trials.unwrap_or(100),
            self.seed.unwrap_or(1),
        );
        cfg.n = g.n.unwrap_or(cfg.n);
        cfg.k = g.k.unwrap_or(cfg.k);
        if let Some(db) = g.power_db {
            cfg.avg_power = 10f64.powf(db / 10.0);
        }
        cfg.horizon = g.horizon.ok_or("gaussian.horizon: required")?;
        cfg.dt = self.dt.unwrap_or(cfg.dt);
        cfg.prior = self.resolve_prior()?;
        Ok(cfg)
    }

    pub fn resolve_poisson(&self) -> Result<PoissonExperimentConfig, String> {
        let p = self.poisson.clone().unwrap_or_default();
        let mut cfg = PoissonExperimentConfig::reference(
            self.trials.unwrap_or(100),
            self.seed.unwrap_or(1),
        );
        cfg.lo = p.lo.unwrap_or(cfg.lo);
        cfg.hi = p.hi.unwrap_or(cfg.hi);
        cfg.horizon = p.horizon.ok_or("poisson.horizon: required")?;
        if let Some(truths) = p.truths {
            cfg.truths = truths;
        }
        cfg.dt = self.dt.unwrap_or(cfg.dt);
        cfg.prior = self.resolve_prior()?;
        Ok(cfg)
    }

    fn resolve_prior(&self) -> Result<Option<DiscreteDistribution>, String> {
        match self.prior.as_deref() {
            None | Some("auto") => Ok(None),
            Some(path) => load_prior(path).map(Some),
        }
    }

    pub fn in_bits(&self) -> bool {
        self.units.as_deref() == Some("bits")
    }
}

/// Read a prior from its text representation on disk.
pub fn load_prior(path: &str) -> Result<DiscreteDistribution, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    DiscreteDistribution::from_text(&text).map_err(|e| format!("{path}: {e}"))
}

//! Experiment configuration: a single JSON document with defaults for every
//! key, overridable from the command line.

use std::path::{Path, PathBuf};

use detsched_core::coverage::SinrParams;
use detsched_core::fairness::{OptimizerSettings, MAX_OPTIMIZE_NODES};
use detsched_core::{Network, PathLossModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Fixed,
    Adaptive,
    Determinantal,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::Fixed, SchedulerKind::Adaptive, SchedulerKind::Determinantal];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Fixed => "fixed",
            SchedulerKind::Adaptive => "adaptive",
            SchedulerKind::Determinantal => "determinantal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathLossKind {
    Bounded,
    Singular,
}

/// Serializable mirror of [`OptimizerSettings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_step: f64,
    pub initial_step: f64,
    pub utility_tolerance: f64,
    pub w_bounds: [f64; 2],
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let s = OptimizerSettings::default();
        Self {
            max_iterations: s.max_iterations,
            gradient_step: s.gradient_step,
            initial_step: s.initial_step,
            utility_tolerance: s.utility_tolerance,
            w_bounds: [s.w_bounds.0, s.w_bounds.1],
        }
    }
}

impl From<OptimizerConfig> for OptimizerSettings {
    fn from(c: OptimizerConfig) -> Self {
        OptimizerSettings {
            max_iterations: c.max_iterations,
            gradient_step: c.gradient_step,
            initial_step: c.initial_step,
            utility_tolerance: c.utility_tolerance,
            w_bounds: (c.w_bounds[0], c.w_bounds[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_pairs: usize,
    pub realizations: usize,
    pub window: f64,
    pub r_max: f64,
    pub tau: f64,
    pub beta: f64,
    /// Only used by the singular path-loss law.
    pub kappa: f64,
    pub pathloss_kind: PathLossKind,
    pub noise: f64,
    pub fading_mean: f64,
    pub sigma: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub optimizer: OptimizerConfig,
    pub schedulers: Vec<SchedulerKind>,
    pub output_dir: PathBuf,
    /// Write per-realization optimizer traces under `traces/`.
    pub write_traces: bool,
    /// Monte Carlo samples per scheduler and instance in `verify`.
    pub mc_samples: usize,
    /// Number of fresh instances checked by `verify`.
    pub verify_instances: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_pairs: 5,
            realizations: 100,
            window: 1.0,
            r_max: 0.1,
            tau: 10.0,
            beta: 4.0,
            kappa: 1.0,
            pathloss_kind: PathLossKind::Bounded,
            noise: 0.0,
            fading_mean: 1.0,
            sigma: 10.0,
            r0: 1.0,
            optimizer: OptimizerConfig::default(),
            schedulers: SchedulerKind::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            write_traces: false,
            mc_samples: 200_000,
            verify_instances: 3,
        }
    }
}

/// Command-line values that replace config keys when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_pairs: Option<usize>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub realizations: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} must be > 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_json(&text)?
            }
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("invalid config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.n_pairs {
            self.n_pairs = v;
        }
        if let Some(v) = o.tau {
            self.tau = v;
        }
        if let Some(v) = o.sigma {
            self.sigma = v;
        }
        if let Some(v) = o.realizations {
            self.realizations = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_pairs < 1 {
            return Err(CliError::Invalid("n_pairs must be >= 1".into()));
        }
        if self.n_pairs > MAX_OPTIMIZE_NODES {
            return Err(CliError::Invalid(format!("n_pairs must be <= {MAX_OPTIMIZE_NODES}, got {}", self.n_pairs)));
        }
        if self.realizations < 1 {
            return Err(CliError::Invalid("realizations must be >= 1".into()));
        }
        for (name, v) in [
            ("window", self.window),
            ("r_max", self.r_max),
            ("tau", self.tau),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("fading_mean", self.fading_mean),
            ("sigma", self.sigma),
            ("R0", self.r0),
        ] {
            positive(name, v)?;
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(CliError::Invalid(format!("noise must be >= 0, got {}", self.noise)));
        }
        if self.schedulers.is_empty() {
            return Err(CliError::Invalid("schedulers must name at least one of fixed, adaptive, determinantal".into()));
        }
        if self.mc_samples < 100 {
            return Err(CliError::Invalid(format!("mc_samples must be >= 100, got {}", self.mc_samples)));
        }
        if self.verify_instances < 1 {
            return Err(CliError::Invalid("verify_instances must be >= 1".into()));
        }
        OptimizerSettings::from(self.optimizer).validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Schedulers in canonical order without duplicates.
    pub fn scheduler_list(&self) -> Vec<SchedulerKind> {
        let mut list = self.schedulers.clone();
        list.sort();
        list.dedup();
        list
    }

    pub fn pathloss(&self) -> CliResult<PathLossModel> {
        match self.pathloss_kind {
            PathLossKind::Bounded => PathLossModel::bounded(self.beta),
            PathLossKind::Singular => PathLossModel::singular(self.kappa, self.beta),
        }
        .map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn sinr_params(&self) -> CliResult<SinrParams> {
        SinrParams::new(self.tau, self.noise, self.fading_mean).map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        self.optimizer.into()
    }

    /// Network of realization `index`, seeded with `seed + index`.
    pub fn network(&self, index: u64) -> CliResult<Network> {
        Ok(detsched_core::generate_network(
            self.n_pairs,
            self.window,
            self.r_max,
            self.pathloss()?,
            self.noise,
            self.seed.wrapping_add(index),
        )?)
    }
}

//! Cross-checks of the determinant coverage formula against subset enumeration
//! and Monte Carlo simulation on fresh seeded instances.
//!
//! Instance `k` uses the network seeded with `seed + k`. Scheduler parameters
//! are drawn from a separate stream of the same seed: fixed and adaptive access
//! probabilities uniform in [0.1, 0.9], and a Gaussian L-ensemble (bandwidth
//! `sigma`) with log-quality uniform in [-1, 2].

use std::fmt::Write as _;
use std::path::PathBuf;

use detsched_core::coverage::{coverage_prob_from_factors, link_factors};
use detsched_core::dpp::gaussian_similarity;
use detsched_core::fairness::SchedulerSpec;
use detsched_core::oracle::{
    enumerate_coverage_all, enumeration_mass, mc_coverage_all, oracle_csv, OracleRow, MAX_ENUMERATION_NODES,
};
use detsched_core::rng::rng_from_seed;
use detsched_core::{Error, QualityVector};
use rand::Rng;

use crate::config::{ExperimentConfig, SchedulerKind};
use crate::error::{write_file, CliError, CliResult};

pub const EXACT_TOLERANCE: f64 = 1e-10;
pub const SE_BAND: f64 = 4.0;

/// Deliberate corruption of the determinant path, used to check that the
/// comparison catches errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Replace every survival factor `h` by `1 - h`.
    ComplementH,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyTable {
    pub instance: usize,
    pub kind: SchedulerKind,
    pub rows: Vec<OracleRow>,
    pub enumeration_mass: f64,
}

impl VerifyTable {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if (self.enumeration_mass - 1.0).abs() >= EXACT_TOLERANCE {
            out.push(format!(
                "instance {} {}: enumeration mass {:.15}",
                self.instance,
                self.kind.name(),
                self.enumeration_mass
            ));
        }
        for r in self.rows.iter().filter(|r| !r.passes(EXACT_TOLERANCE, SE_BAND)) {
            out.push(format!(
                "instance {} {} link {}: det {:.12e} enum {:.12e} |diff| {:.3e} mc {:.6e} +- {:.2e}",
                self.instance,
                self.kind.name(),
                r.link,
                r.exact_det,
                r.exact_enum,
                r.abs_diff,
                r.mc_mean,
                r.mc_se
            ));
        }
        out
    }

    pub fn file_name(&self) -> String {
        format!("instance{}_{}.csv", self.instance, self.kind.name())
    }
}

fn spec_for(kind: SchedulerKind, config: &ExperimentConfig, net: &detsched_core::Network, instance_seed: u64) -> CliResult<SchedulerSpec> {
    let n = net.len();
    let mut rng = rng_from_seed(instance_seed ^ 0x9e37_79b9_7f4a_7c15);
    let fixed = rng.random_range(0.1..0.9);
    let adaptive: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
    Ok(match kind {
        SchedulerKind::Fixed => SchedulerSpec::FixedAloha(fixed),
        SchedulerKind::Adaptive => SchedulerSpec::AdaptiveAloha(adaptive),
        SchedulerKind::Determinantal => SchedulerSpec::LEnsemble {
            similarity: gaussian_similarity(net, config.sigma)?,
            quality: QualityVector::from_log(w)?,
        },
    })
}

pub fn verify_instance(config: &ExperimentConfig, instance: usize, fault: Fault) -> CliResult<Vec<VerifyTable>> {
    let instance_seed = config.seed.wrapping_add(instance as u64);
    let net = config.network(instance as u64)?;
    let p = config.sinr_params()?;
    let n = net.len();
    let mut tables = Vec::new();
    for (slot, kind) in config.scheduler_list().into_iter().enumerate() {
        let spec = spec_for(kind, config, &net, instance_seed)?;
        let k = spec.marginal_kernel(n)?;
        let l = spec.ensemble_kernel(n)?;
        let enumerated = enumerate_coverage_all(&l, &net, &p)?;
        let mc_seed = instance_seed.rotate_left(17) ^ (slot as u64 + 1);
        let mc = mc_coverage_all(&spec, &net, &p, config.mc_samples, mc_seed)?;
        let rows = (0..n)
            .map(|i| {
                let (mut h, w) = link_factors(&net, i, &p)?;
                if fault == Fault::ComplementH {
                    h.iter_mut().for_each(|v| *v = 1.0 - *v);
                }
                let det = coverage_prob_from_factors(&k, i, &h, w)?;
                Ok(OracleRow::new(i, det, enumerated[i], &mc[i]))
            })
            .collect::<CliResult<Vec<_>>>()?;
        tables.push(VerifyTable { instance, kind, rows, enumeration_mass: enumeration_mass(&l)? });
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub tables: Vec<VerifyTable>,
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Runs every instance, writes one comparison CSV per instance and scheduler
/// under `output_dir/verify/`, and fails with the per-link report when any
/// check does not hold.
pub fn run(config: &ExperimentConfig, fault: Fault) -> CliResult<VerifyReport> {
    config.validate()?;
    if config.n_pairs > MAX_ENUMERATION_NODES {
        return Err(Error::SizeLimit { n: config.n_pairs, max: MAX_ENUMERATION_NODES }.into());
    }
    let mut tables = Vec::new();
    for instance in 0..config.verify_instances {
        tables.extend(verify_instance(config, instance, fault)?);
    }
    let dir = config.output_dir.join("verify");
    let mut files = Vec::new();
    for t in &tables {
        let path = dir.join(t.file_name());
        write_file(&path, &oracle_csv(&t.rows))?;
        files.push(path);
    }
    write_file(&config.output_dir.join("config.json"), &config.to_json())?;
    let failures: Vec<String> = tables.iter().flat_map(|t| t.failures()).collect();
    if !failures.is_empty() {
        let mut msg = format!("verification failed on {} check(s):", failures.len());
        for f in &failures {
            write!(msg, "\n  {f}").unwrap();
        }
        return Err(CliError::Failed(msg));
    }
    Ok(VerifyReport { tables, failures, files })
}

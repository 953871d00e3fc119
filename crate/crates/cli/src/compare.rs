//! Scheduler comparison over seeded realizations.
//!
//! Realization `r` uses the network seeded with `seed + r`. Every requested
//! scheduler is optimized on it and evaluated link by link; the per-realization
//! rows and their aggregates are written as CSV next to a plot script.

use std::fmt::Write as _;
use std::path::Path;

use detsched_core::coverage::CoverageReport;
use detsched_core::dpp::gaussian_similarity;
use detsched_core::fairness::{
    optimize_adaptive_aloha, optimize_fixed_aloha, optimize_lensemble, trace_csv, SchedulerSpec, TraceRow,
};
use detsched_core::Error;

use crate::config::{ExperimentConfig, SchedulerKind};
use crate::error::{write_file, CliResult};

pub const REALIZATIONS_FILE: &str = "realizations.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const PLOT_SCRIPT: &str = "plot_coverage.py";
pub const REALIZATIONS_HEADER: &str =
    "realization,seed,scheduler,link,inclusion,conditional,coverage,throughput,utility,status";
pub const AGGREGATE_HEADER: &str = "scheduler,link,coverage_mean,coverage_se,utility_mean,utility_se";

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimized { report: CoverageReport, utility: f64, trace: Option<Vec<TraceRow>> },
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerResult {
    pub kind: SchedulerKind,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub seed: u64,
    pub results: Vec<SchedulerResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub kind: SchedulerKind,
    pub link: usize,
    pub coverage_mean: f64,
    pub coverage_se: f64,
    pub utility_mean: f64,
    pub utility_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub n_pairs: usize,
    pub realizations: Vec<Realization>,
    pub aggregate: Vec<AggregateRow>,
    /// Scheduler runs skipped because no feasible start existed.
    pub warnings: usize,
}

impl ExperimentResult {
    pub fn rows_for(&self, kind: SchedulerKind) -> impl Iterator<Item = &AggregateRow> {
        self.aggregate.iter().filter(move |r| r.kind == kind)
    }

    /// Mean over links of the mean per-link coverage.
    pub fn mean_coverage(&self, kind: SchedulerKind) -> f64 {
        let rows: Vec<f64> = self.rows_for(kind).map(|r| r.coverage_mean).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    }

    /// Optimized utility of `kind` in every realization (`None` when skipped).
    pub fn utilities(&self, kind: SchedulerKind) -> Vec<Option<f64>> {
        self.realizations
            .iter()
            .map(|r| {
                r.results.iter().find(|s| s.kind == kind).and_then(|s| match &s.outcome {
                    Outcome::Optimized { utility, .. } => Some(*utility),
                    Outcome::InfeasibleStart => None,
                })
            })
            .collect()
    }
}

fn optimize(config: &ExperimentConfig, kind: SchedulerKind, index: usize) -> CliResult<Outcome> {
    let net = config.network(index as u64)?;
    let p = config.sinr_params()?;
    let settings = config.optimizer_settings();
    let n = net.len();
    let attempt = match kind {
        SchedulerKind::Fixed => optimize_fixed_aloha(&net, &p, config.r0, &settings)
            .map(|o| (SchedulerSpec::FixedAloha(o.p), o.utility, None)),
        SchedulerKind::Adaptive => optimize_adaptive_aloha(&net, &p, config.r0, &settings)
            .map(|o| (SchedulerSpec::AdaptiveAloha(o.p), o.utility, Some(o.ensemble.trace))),
        SchedulerKind::Determinantal => gaussian_similarity(&net, config.sigma).and_then(|s| {
            optimize_lensemble(&net, &s, &p, config.r0, &settings)
                .map(|o| (SchedulerSpec::LEnsemble { similarity: s, quality: o.quality }, o.utility, Some(o.trace)))
        }),
    };
    match attempt {
        Ok((spec, utility, trace)) => {
            let k = spec.marginal_kernel(n)?;
            let report = CoverageReport::evaluate(&k, &net, &p, config.r0)?;
            Ok(Outcome::Optimized { report, utility, trace })
        }
        Err(Error::InfeasibleStart) => {
            log::warn!("realization {index}: {} scheduler has no feasible start", kind.name());
            Ok(Outcome::InfeasibleStart)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run_realization(config: &ExperimentConfig, index: usize) -> CliResult<Realization> {
    let results = config
        .scheduler_list()
        .into_iter()
        .map(|kind| Ok(SchedulerResult { kind, outcome: optimize(config, kind, index)? }))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Realization { index, seed: config.seed.wrapping_add(index as u64), results })
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Means and standard errors across realizations, skipping infeasible runs.
pub fn aggregate(realizations: &[Realization], kinds: &[SchedulerKind], n_pairs: usize) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &kind in kinds {
        let done: Vec<(&CoverageReport, f64)> = realizations
            .iter()
            .flat_map(|r| r.results.iter())
            .filter(|s| s.kind == kind)
            .filter_map(|s| match &s.outcome {
                Outcome::Optimized { report, utility, .. } => Some((report, *utility)),
                Outcome::InfeasibleStart => None,
            })
            .collect();
        let utilities: Vec<f64> = done.iter().map(|(_, u)| *u).collect();
        let (utility_mean, utility_se) = mean_se(&utilities);
        for link in 0..n_pairs {
            let cov: Vec<f64> = done.iter().map(|(rep, _)| rep.links[link].coverage).collect();
            let (coverage_mean, coverage_se) = mean_se(&cov);
            rows.push(AggregateRow { kind, link, coverage_mean, coverage_se, utility_mean, utility_se });
        }
    }
    rows
}

pub fn run_experiment(config: &ExperimentConfig) -> CliResult<ExperimentResult> {
    config.validate()?;
    let realizations =
        (0..config.realizations).map(|r| run_realization(config, r)).collect::<CliResult<Vec<_>>>()?;
    let warnings = realizations
        .iter()
        .flat_map(|r| r.results.iter())
        .filter(|s| s.outcome == Outcome::InfeasibleStart)
        .count();
    let aggregate = aggregate(&realizations, &config.scheduler_list(), config.n_pairs);
    Ok(ExperimentResult { n_pairs: config.n_pairs, realizations, aggregate, warnings })
}

/// Per-realization rows; floats use the shortest exact representation.
pub fn realizations_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(REALIZATIONS_HEADER);
    out.push('\n');
    for r in &result.realizations {
        for s in &r.results {
            match &s.outcome {
                Outcome::Optimized { report, utility, .. } => {
                    for l in &report.links {
                        writeln!(
                            out,
                            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},ok",
                            r.index,
                            r.seed,
                            s.kind.name(),
                            l.index,
                            l.inclusion,
                            l.conditional,
                            l.coverage,
                            l.throughput,
                            utility
                        )
                        .unwrap();
                    }
                }
                Outcome::InfeasibleStart => {
                    for link in 0..result.n_pairs {
                        writeln!(out, "{},{},{},{link},NaN,NaN,NaN,NaN,NaN,infeasible-start", r.index, r.seed, s.kind.name())
                            .unwrap();
                    }
                }
            }
        }
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.14e},{:.14e},{:.14e},{:.14e}",
            r.kind.name(),
            r.link,
            r.coverage_mean,
            r.coverage_se,
            r.utility_mean,
            r.utility_se
        )
        .unwrap();
    }
    out
}

/// Python script drawing per-link coverage for realization 0 and the average
/// over realizations, side by side.
pub fn plot_script(n_pairs: usize, realizations: usize) -> String {
    format!(
        r#"#!/usr/bin/env python3
"""Per-link coverage probability: single realization (left) and averaged (right)."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
REALIZATIONS = os.path.join(HERE, "{REALIZATIONS_FILE}")
AGGREGATE = os.path.join(HERE, "{AGGREGATE_FILE}")
N_PAIRS = {n_pairs}
N_REALIZATIONS = {realizations}
MARKERS = {{"fixed": "s", "adaptive": "o", "determinantal": "^"}}


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    single = {{}}
    for row in read(REALIZATIONS):
        if row["realization"] == "0" and row["status"] == "ok":
            single.setdefault(row["scheduler"], []).append((int(row["link"]), float(row["coverage"])))
    averaged = {{}}
    for row in read(AGGREGATE):
        averaged.setdefault(row["scheduler"], []).append(
            (int(row["link"]), float(row["coverage_mean"]), float(row["coverage_se"]))
        )

    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for name, points in single.items():
        points.sort()
        left.plot([p[0] + 1 for p in points], [p[1] for p in points], marker=MARKERS.get(name, "x"), label=name)
    for name, points in averaged.items():
        points.sort()
        right.errorbar(
            [p[0] + 1 for p in points],
            [p[1] for p in points],
            yerr=[p[2] for p in points],
            marker=MARKERS.get(name, "x"),
            capsize=3,
            label=name,
        )
    left.set_title("Single realization ({{}} pairs)".format(N_PAIRS))
    right.set_title("Averaged over {{}} realizations".format(N_REALIZATIONS))
    for ax in (left, right):
        ax.set_xlabel("link")
        ax.set_xticks(range(1, N_PAIRS + 1))
        ax.grid(alpha=0.3)
        ax.legend()
    left.set_ylabel("coverage probability")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "coverage.png"), dpi=150)


if __name__ == "__main__":
    main()
"#
    )
}

fn write_traces(dir: &Path, result: &ExperimentResult) -> CliResult<()> {
    for r in &result.realizations {
        for s in &r.results {
            if let Outcome::Optimized { trace: Some(trace), .. } = &s.outcome {
                let path = dir.join(format!("r{:04}_{}.csv", r.index, s.kind.name()));
                write_file(&path, &trace_csv(trace))?;
            }
        }
    }
    Ok(())
}

/// Runs the experiment and writes its files under `output_dir`.
pub fn run(config: &ExperimentConfig) -> CliResult<ExperimentResult> {
    let result = run_experiment(config)?;
    let dir = &config.output_dir;
    write_file(&dir.join(REALIZATIONS_FILE), &realizations_csv(&result))?;
    write_file(&dir.join(AGGREGATE_FILE), &aggregate_csv(&result.aggregate))?;
    write_file(&dir.join(PLOT_SCRIPT), &plot_script(config.n_pairs, config.realizations))?;
    write_file(&dir.join("config.json"), &config.to_json())?;
    if config.write_traces {
        write_traces(&dir.join("traces"), &result)?;
    }
    if result.warnings > 0 {
        log::warn!("{} scheduler run(s) skipped for infeasible starts", result.warnings);
    }
    Ok(result)
}

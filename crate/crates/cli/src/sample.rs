use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use detsched_core::dpp::{build_l, gaussian_similarity, marginal_from_l, DppSampler};
use detsched_core::rng::rng_from_seed;
use detsched_core::{KernelRole, QualityVector, SymmetricKernel};

use crate::config::ExperimentConfig;
use crate::error::{write_file, CliError, CliResult};

pub const SAMPLES_FILE: &str = "samples.txt";

/// Marginal kernel to sample from: the kernel file when given (an L kernel is
/// mapped to its marginal), else the Gaussian L-ensemble with unit quality on
/// the network of realization 0.
pub fn load_kernel(config: &ExperimentConfig, kernel: Option<&Path>) -> CliResult<SymmetricKernel> {
    match kernel {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read kernel {}: {e}", path.display())))?;
            let k = SymmetricKernel::from_csv(&text)?;
            match k.role() {
                KernelRole::MarginalK => Ok(k),
                KernelRole::EnsembleL => Ok(marginal_from_l(&k)?),
                KernelRole::SimilarityS => {
                    Err(CliError::Invalid("a similarity kernel needs a quality vector; pass a K or L kernel".into()))
                }
            }
        }
        None => {
            let net = config.network(0)?;
            let s = gaussian_similarity(&net, config.sigma)?;
            Ok(marginal_from_l(&build_l(&s, &QualityVector::ones(net.len()))?)?)
        }
    }
}

/// One subset per line as space-separated sorted indices.
pub fn draw(k: &SymmetricKernel, count: usize, seed: u64) -> CliResult<String> {
    let sampler = DppSampler::new(k)?;
    let mut rng = rng_from_seed(seed);
    let mut out = String::new();
    for _ in 0..count {
        let subset = sampler.sample(&mut rng)?;
        let line: Vec<String> = subset.as_slice().iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    Ok(out)
}

pub fn run(config: &ExperimentConfig, kernel: Option<&Path>, count: usize) -> CliResult<PathBuf> {
    let k = load_kernel(config, kernel)?;
    let path = config.output_dir.join(SAMPLES_FILE);
    write_file(&path, &draw(&k, count, config.seed)?)?;
    write_file(&config.output_dir.join("config.json"), &config.to_json())?;
    Ok(path)
}

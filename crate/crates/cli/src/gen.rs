use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::error::{write_file, CliResult};

pub const NETWORK_FILE: &str = "network.json";

/// Writes the network of realization 0 to `output_dir/network.json`.
pub fn run(config: &ExperimentConfig) -> CliResult<PathBuf> {
    let net = config.network(0)?;
    let path = config.output_dir.join(NETWORK_FILE);
    write_file(&path, &(net.to_json() + "\n"))?;
    write_file(&config.output_dir.join("config.json"), &config.to_json())?;
    log::info!("wrote {} pairs to {}", net.len(), path.display());
    Ok(path)
}

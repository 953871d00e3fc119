use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use detsched_cli::verify::Fault;
use detsched_cli::{compare, gen, sample, verify, CliResult, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "detsched", version, about = "Determinantal medium-access scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory.
    #[arg(long = "out")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let overrides = Overrides {
            seed: self.seed,
            n_pairs: self.n_pairs,
            tau: self.tau,
            sigma: self.sigma,
            realizations: self.realizations,
            output_dir: self.out.clone(),
        };
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network and write it as JSON.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Optimize every scheduler over many realizations and write coverage tables.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Write per-realization optimizer traces.
        #[arg(long)]
        traces: bool,
    },
    /// Check the determinant coverage formula against enumeration and simulation.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Draw samples from a marginal kernel.
    Sample {
        #[command(flatten)]
        common: Common,
        /// CSV kernel file: a `# role=K n=<n>` (or `role=L`) header, then matrix rows.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { common } => {
            let path = gen::run(&common.load()?)?;
            println!("{}", path.display());
        }
        Command::Compare { common, traces } => {
            let mut config = common.load()?;
            config.write_traces |= traces;
            let result = compare::run(&config)?;
            for kind in config.scheduler_list() {
                println!("{:<14} mean coverage {:.6}", kind.name(), result.mean_coverage(kind));
            }
        }
        Command::Verify { common, inject_fault } => {
            let fault = if inject_fault { Fault::ComplementH } else { Fault::None };
            let report = verify::run(&common.load()?, fault)?;
            println!("verified {} table(s)", report.tables.len());
        }
        Command::Sample { common, kernel, count } => {
            let path = sample::run(&common.load()?, kernel.as_deref(), count)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

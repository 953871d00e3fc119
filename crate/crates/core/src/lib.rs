//! Determinantal medium-access scheduling for bi-pole wireless networks.
//!
//! The crate models a fixed set of transmitter/receiver pairs, schedules
//! transmissions with a determinantal point process (L-ensemble) over the
//! transmitters, evaluates exact SINR coverage probabilities under Rayleigh
//! fading, and maximizes the proportional-fairness utility `sum_i log T_i`.
//! Independent checks (subset enumeration, Monte Carlo) live in [`oracle`].

pub mod coverage;
pub mod dpp;
pub mod error;
pub mod fairness;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod rng;

pub use coverage::{CoverageReport, LinkCoverage, SinrParams};
pub use dpp::{KernelRole, QualityVector, Subset, SymmetricKernel};
pub use error::{Error, Result};
pub use fairness::{OptimizerSettings, SchedulerSpec};
pub use geometry::{generate_network, Network, PathLossModel, Point};

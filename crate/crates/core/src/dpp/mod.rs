//! Determinantal point processes on a finite ground set.

mod kernel;
mod sampler;

pub use kernel::{
    build_l, ensemble_from_marginal, ensemble_normalizer, factorized_prob, gaussian_similarity,
    marginal_from_l, palm_reduce, scale_kernel, subset_prob_exact, subset_prob_inclusion,
    KernelRole, QualityVector, Subset, SymmetricKernel, PALM_TOL, SYMMETRY_TOL,
};
pub(crate) use kernel::{clamp_probability, palm_matrix, scaled_matrix};
pub use sampler::{sample, DppSampler};

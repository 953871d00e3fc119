#![allow(dead_code)]

use detsched_core::dpp::{build_l, gaussian_similarity};
use detsched_core::rng::{rng_from_seed, SimRng};
use detsched_core::{generate_network, Network, PathLossModel, QualityVector, SinrParams, SymmetricKernel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SimRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut SimRng) -> DMatrix<f64> {
    gaussian_matrix(n, n, rng).qr().q()
}

/// `V diag(values) V^T` with a random orthogonal `V`, symmetrized exactly.
pub fn with_spectrum(values: &[f64], rng: &mut SimRng) -> DMatrix<f64> {
    let n = values.len();
    let v = random_orthogonal(n, rng);
    let m = &v * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * v.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random marginal kernel with eigenvalues uniform in `[0, max_eig)`.
pub fn random_marginal(n: usize, max_eig: f64, rng: &mut SimRng) -> SymmetricKernel {
    let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * max_eig).collect();
    SymmetricKernel::marginal(with_spectrum(&values, rng)).unwrap()
}

/// Random PSD matrix `A A^T / n` with Gaussian `A`, rank `rank`.
pub fn random_psd(n: usize, rank: usize, rng: &mut SimRng) -> DMatrix<f64> {
    let a = gaussian_matrix(n, rank, rng);
    let m = &a * a.transpose() / n as f64;
    (&m + m.transpose()) * 0.5
}

pub fn reference_network(n: usize, seed: u64) -> Network {
    generate_network(n, 1.0, 0.1, PathLossModel::bounded(4.0).unwrap(), 0.0, seed).unwrap()
}

/// Network in a window scaled so that interference matters, with random noise
/// and a random path-loss law.
pub fn random_instance(n: usize, seed: u64) -> (Network, SinrParams) {
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let pathloss = if rng.random::<bool>() {
        PathLossModel::bounded(2.0 + 3.0 * rng.random::<f64>()).unwrap()
    } else {
        PathLossModel::singular(0.5 + rng.random::<f64>(), 2.5 + 2.0 * rng.random::<f64>()).unwrap()
    };
    let noise = if rng.random::<bool>() { 0.0 } else { 0.05 * rng.random::<f64>() };
    let window = 0.2 + 0.8 * rng.random::<f64>();
    let net = generate_network(n, window, 0.1, pathloss, noise, seed).unwrap();
    let tau = 0.5 + 10.0 * rng.random::<f64>();
    let p = SinrParams::for_network(&net, tau).unwrap();
    (net, p)
}

/// L-ensemble with Gaussian similarity of random bandwidth and `w` uniform in
/// `[-1.5, 1.5]`.
pub fn random_lensemble(net: &Network, rng: &mut SimRng) -> (SymmetricKernel, QualityVector, SymmetricKernel) {
    let sigma = 0.05 + 0.5 * rng.random::<f64>();
    let s = gaussian_similarity(net, sigma).unwrap();
    let w: Vec<f64> = (0..net.len()).map(|_| 3.0 * rng.random::<f64>() - 1.5).collect();
    let q = QualityVector::from_log(w).unwrap();
    let l = build_l(&s, &q).unwrap();
    (s, q, l)
}

/// All subsets of `0..n` as index lists, by bit mask.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0u64..1 << n).map(|m| (0..n).filter(|&b| m >> b & 1 == 1).collect()).collect()
}

pub fn det_of(m: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]).determinant()
}

//! Independent verification paths: exact subset enumeration over an L-ensemble
//! and direct Monte Carlo simulation of the SINR model under Rayleigh fading.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::coverage::{h_func, w_func, SinrParams};
use crate::dpp::{ensemble_normalizer, DppSampler, KernelRole, Subset, SymmetricKernel};
use crate::error::{invalid, Error, Result};
use crate::fairness::SchedulerSpec;
use crate::geometry::Network;
use crate::rng::rng_from_seed;

/// Largest ground set the enumeration oracles accept.
pub const MAX_ENUMERATION_NODES: usize = 12;

pub const MIN_MC_SAMPLES: usize = 100;

/// Frequency estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McEstimate {
    fn from_count(hits: usize, samples: usize, seed: u64) -> Self {
        let mean = hits as f64 / samples as f64;
        let std_error = (mean * (1.0 - mean) / samples as f64).max(0.0).sqrt();
        Self { mean, std_error, samples, seed }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }

    /// Count-weighted merge of estimates from independent streams; the merged
    /// seed is that of the first part.
    pub fn merge(parts: &[McEstimate]) -> Result<McEstimate> {
        let first = parts.first().ok_or_else(|| invalid("nothing to merge"))?;
        let samples: usize = parts.iter().map(|e| e.samples).sum();
        let hits: f64 = parts.iter().map(|e| e.mean * e.samples as f64).sum();
        Ok(Self::from_count(hits.round() as usize, samples, first.seed))
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(invalid(format!("need at least {MIN_MC_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::SizeLimit { n, max: MAX_ENUMERATION_NODES });
    }
    Ok(())
}

/// `P(SINR_i > tau | Psi = psi) = w(r_i) * prod_{j in psi, j != i} h(|x_j - y_i|, r_i)`.
pub fn conditional_coverage_given_subset(net: &Network, i: usize, psi: &Subset, p: &SinrParams) -> Result<f64> {
    if !psi.contains(i) {
        return Err(invalid(format!("link {i} is not in the subset {:?}", psi.as_slice())));
    }
    let model = net.pathloss();
    let r = net.link_distance(i)?;
    let mut value = w_func(r, p, &model)?;
    for &j in psi.as_slice().iter().filter(|&&j| j != i) {
        value *= h_func(net.cross_distance(j, i)?, r, p, &model)?;
    }
    Ok(value)
}

/// Visits every subset of `0..n` in binary-counter order with
/// `P(Psi = psi) = det(L_psi) / det(L + I)`.
pub fn for_each_subset<F>(l: &SymmetricKernel, mut visit: F) -> Result<()>
where
    F: FnMut(&Subset, f64) -> Result<()>,
{
    l.expect_role(KernelRole::EnsembleL, "enumeration")?;
    let n = l.dim();
    check_enumerable(n)?;
    let z = ensemble_normalizer(l)?;
    let m = l.matrix();
    let mut indices = Vec::with_capacity(n);
    for mask in 0u64..(1u64 << n) {
        indices.clear();
        indices.extend((0..n).filter(|&b| mask >> b & 1 == 1));
        let det = if indices.is_empty() {
            1.0
        } else {
            DMatrix::from_fn(indices.len(), indices.len(), |a, b| m[(indices[a], indices[b])]).determinant()
        };
        visit(&Subset::from_mask(mask, n), det.max(0.0) / z)?;
    }
    Ok(())
}

/// Total probability mass of the enumeration; 1 up to rounding.
pub fn enumeration_mass(l: &SymmetricKernel) -> Result<f64> {
    let mut total = 0.0;
    for_each_subset(l, |_, prob| {
        total += prob;
        Ok(())
    })?;
    Ok(total)
}

/// Ground-truth coverage of link `i`: `sum_{psi containing i} P(Psi = psi) * P(SINR_i > tau | psi)`.
pub fn enumerate_coverage(l: &SymmetricKernel, net: &Network, i: usize, p: &SinrParams) -> Result<f64> {
    check_enumerable(net.len())?;
    if i >= net.len() {
        return Err(invalid(format!("link {i} out of range for {} pairs", net.len())));
    }
    Ok(enumerate_coverage_all(l, net, p)?[i])
}

/// Enumeration coverage of every link from one pass over the subsets.
pub fn enumerate_coverage_all(l: &SymmetricKernel, net: &Network, p: &SinrParams) -> Result<Vec<f64>> {
    check_enumerable(net.len())?;
    if l.dim() != net.len() {
        return Err(invalid(format!("kernel size {} does not match network size {}", l.dim(), net.len())));
    }
    let mut totals = vec![0.0; net.len()];
    for_each_subset(l, |psi, prob| {
        if prob > 0.0 {
            for &i in psi.as_slice() {
                totals[i] += prob * conditional_coverage_given_subset(net, i, psi, p)?;
            }
        }
        Ok(())
    })?;
    Ok(totals)
}

/// Whether link `i` decodes when `active` transmit, drawing a fresh
/// exponential fade for the signal and for every active interferer.
fn sinr_success<R: Rng + ?Sized>(
    net: &Network,
    i: usize,
    active: &Subset,
    p: &SinrParams,
    fade: &Exp<f64>,
    rng: &mut R,
) -> Result<bool> {
    let model = net.pathloss();
    let signal = fade.sample(rng) * model.gain(net.link_distance(i)?);
    let mut interference = p.noise;
    for &j in active.as_slice().iter().filter(|&&j| j != i) {
        interference += fade.sample(rng) * model.gain(net.cross_distance(j, i)?);
    }
    Ok(signal > p.tau * interference)
}

fn fading(p: &SinrParams) -> Result<Exp<f64>> {
    Exp::new(1.0 / p.fading_mean).map_err(|e| invalid(format!("fading mean {}: {e}", p.fading_mean)))
}

/// Monte Carlo estimate of `P(i in Psi, SINR_i > tau)`.
pub fn mc_coverage(
    spec: &SchedulerSpec,
    net: &Network,
    i: usize,
    p: &SinrParams,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if i >= net.len() {
        return Err(invalid(format!("link {i} out of range for {} pairs", net.len())));
    }
    check_samples(samples)?;
    let sampler = DppSampler::new(&spec.marginal_kernel(net.len())?)?;
    let fade = fading(p)?;
    let mut rng = rng_from_seed(seed);
    let mut hits = 0;
    for _ in 0..samples {
        let active = sampler.sample(&mut rng)?;
        if active.contains(i) && sinr_success(net, i, &active, p, &fade, &mut rng)? {
            hits += 1;
        }
    }
    Ok(McEstimate::from_count(hits, samples, seed))
}

/// Monte Carlo coverage of every link. Schedule draws are shared across links;
/// fades are drawn afresh for each link.
pub fn mc_coverage_all(
    spec: &SchedulerSpec,
    net: &Network,
    p: &SinrParams,
    samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_samples(samples)?;
    let sampler = DppSampler::new(&spec.marginal_kernel(net.len())?)?;
    let fade = fading(p)?;
    let mut rng = rng_from_seed(seed);
    let mut hits = vec![0usize; net.len()];
    for _ in 0..samples {
        let active = sampler.sample(&mut rng)?;
        for &i in active.as_slice() {
            if sinr_success(net, i, &active, p, &fade, &mut rng)? {
                hits[i] += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| McEstimate::from_count(h, samples, seed)).collect())
}

/// Monte Carlo estimate of `P(SINR_i > tau | Psi = psi)` with fresh fades per draw.
pub fn mc_conditional_coverage(
    net: &Network,
    i: usize,
    psi: &Subset,
    p: &SinrParams,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !psi.contains(i) {
        return Err(invalid(format!("link {i} is not in the subset {:?}", psi.as_slice())));
    }
    check_samples(samples)?;
    let fade = fading(p)?;
    let mut rng = rng_from_seed(seed);
    let mut hits = 0;
    for _ in 0..samples {
        if sinr_success(net, i, psi, p, &fade, &mut rng)? {
            hits += 1;
        }
    }
    Ok(McEstimate::from_count(hits, samples, seed))
}

/// Empirical inclusion frequency of every index.
pub fn mc_inclusion(k: &SymmetricKernel, samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_samples(samples)?;
    let sampler = DppSampler::new(k)?;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0usize; k.dim()];
    for _ in 0..samples {
        for &i in sampler.sample(&mut rng)?.as_slice() {
            counts[i] += 1;
        }
    }
    Ok(counts.into_iter().map(|c| McEstimate::from_count(c, samples, seed)).collect())
}

/// Empirical frequency of `{i, j}` being jointly included.
pub fn mc_pair_inclusion(k: &SymmetricKernel, i: usize, j: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    if i >= k.dim() || j >= k.dim() {
        return Err(invalid(format!("pair ({i}, {j}) out of range for size {}", k.dim())));
    }
    check_samples(samples)?;
    let sampler = DppSampler::new(k)?;
    let mut rng = rng_from_seed(seed);
    let mut hits = 0;
    for _ in 0..samples {
        let s = sampler.sample(&mut rng)?;
        if s.contains(i) && s.contains(j) {
            hits += 1;
        }
    }
    Ok(McEstimate::from_count(hits, samples, seed))
}

/// Empirical frequency of every exact subset, indexed by bit mask.
pub fn mc_subset_frequencies(k: &SymmetricKernel, samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    check_enumerable(k.dim())?;
    check_samples(samples)?;
    let sampler = DppSampler::new(k)?;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0usize; 1 << k.dim()];
    for _ in 0..samples {
        counts[sampler.sample(&mut rng)?.mask() as usize] += 1;
    }
    Ok(counts.into_iter().map(|c| McEstimate::from_count(c, samples, seed)).collect())
}

/// One row of the oracle comparison table. `abs_diff` is the gap between the
/// two exact paths; the Monte Carlo column is judged in standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub link: usize,
    pub exact_det: f64,
    pub exact_enum: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub abs_diff: f64,
}

impl OracleRow {
    pub fn new(link: usize, exact_det: f64, exact_enum: f64, mc: &McEstimate) -> Self {
        Self { link, exact_det, exact_enum, mc_mean: mc.mean, mc_se: mc.std_error, abs_diff: (exact_det - exact_enum).abs() }
    }

    /// Exact paths within `exact_tol`, Monte Carlo within `se_band` standard
    /// errors of the determinant value.
    pub fn passes(&self, exact_tol: f64, se_band: f64) -> bool {
        self.abs_diff < exact_tol && (self.mc_mean - self.exact_det).abs() <= se_band * self.mc_se
    }
}

pub const ORACLE_CSV_HEADER: &str = "link,exact_det,exact_enum,mc_mean,mc_se,abs_diff";

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.6e}",
            r.link, r.exact_det, r.exact_enum, r.mc_mean, r.mc_se, r.abs_diff
        )
        .unwrap();
    }
    out
}

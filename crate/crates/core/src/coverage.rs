//! SINR coverage probabilities and throughputs under a determinantal scheduler.
//!
//! Under Rayleigh fading, the probability that link `i` is covered given the
//! active set `psi` factorizes into a noise factor `w(|x_i - y_i|)` and one
//! survival factor `h` per active interferer. Averaging over a DPP with marginal
//! kernel `K` gives
//!
//! ```text
//! P_i(tau) = K_ii * det(I - K^!_i{h_i}) * W_i
//! ```
//!
//! where `K^!_i` is the reduced Palm kernel at `i` and `{h_i}` scales it by
//! `sqrt(1 - h)` on both sides.
//!
//! The survival and noise factors are written for an arbitrary path-loss gain:
//! `h = 1 / (1 + tau * g(s) / g(r))` and `w = exp(-tau * (W / mu) / g(r))`. For the
//! singular law these reduce to `u / (u + tau)` with `u = (s / r)^beta` and
//! `exp(-tau W (kappa r)^beta)`. Fading ratios cancel in `h`, so the fading mean
//! `mu` only rescales the noise.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::dpp::{clamp_probability, palm_matrix, scaled_matrix, KernelRole, SymmetricKernel, PALM_TOL};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Network, PathLossModel};
use crate::linalg::{self, EIGEN_TOL};
use crate::quadrature;

/// SINR threshold, noise power and fading mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrParams {
    pub tau: f64,
    pub noise: f64,
    pub fading_mean: f64,
}

impl SinrParams {
    pub fn new(tau: f64, noise: f64, fading_mean: f64) -> Result<Self> {
        if !(tau > 0.0) || tau.is_nan() {
            return Err(invalid(format!("SINR threshold tau must be > 0, got {tau}")));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(invalid(format!("noise must be finite and >= 0, got {noise}")));
        }
        if !(fading_mean.is_finite() && fading_mean > 0.0) {
            return Err(invalid(format!("fading mean must be > 0, got {fading_mean}")));
        }
        Ok(Self { tau, noise, fading_mean })
    }

    /// Threshold `tau` with the network's noise power and unit-mean fading.
    pub fn for_network(net: &Network, tau: f64) -> Result<Self> {
        Self::new(tau, net.noise_power(), 1.0)
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Self::new(tau, self.noise, self.fading_mean)
    }

    /// Noise power in units of the mean fade.
    pub fn effective_noise(&self) -> f64 {
        self.noise / self.fading_mean
    }
}

/// Probability that one active interferer at distance `s` from the receiver
/// does not break a link of length `r`.
pub fn h_func(s: f64, r: f64, p: &SinrParams, model: &PathLossModel) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("link length must be > 0, got {r}")));
    }
    if !(s >= 0.0) {
        return Err(invalid(format!("interferer distance must be >= 0, got {s}")));
    }
    Ok(match *model {
        PathLossModel::SingularPowerLaw { beta, .. } => {
            let u = (s / r).powf(beta);
            if u.is_infinite() {
                1.0
            } else {
                u / (u + p.tau)
            }
        }
        PathLossModel::BoundedPowerLaw { .. } => {
            1.0 / (1.0 + p.tau * model.gain(s) / model.gain(r))
        }
    })
}

/// Probability that noise alone does not break a link of length `r`.
pub fn w_func(r: f64, p: &SinrParams, model: &PathLossModel) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("link length must be > 0, got {r}")));
    }
    let noise = p.effective_noise();
    if noise == 0.0 {
        return Ok(1.0);
    }
    Ok(match *model {
        PathLossModel::SingularPowerLaw { kappa, beta } => {
            (-(p.tau * noise) * (kappa * r).powf(beta)).exp()
        }
        PathLossModel::BoundedPowerLaw { .. } => (-p.tau * noise / model.gain(r)).exp(),
    })
}

/// Survival factors `h_{x_i}(x_j)` for every `j != i` (in increasing `j`) and the
/// noise factor `W_{x_i}`.
pub fn link_factors(net: &Network, i: usize, p: &SinrParams) -> Result<(Vec<f64>, f64)> {
    let model = net.pathloss();
    let r = net.link_distance(i)?;
    let h = (0..net.len())
        .filter(|&j| j != i)
        .map(|j| h_func(net.cross_distance(j, i)?, r, p, &model))
        .collect::<Result<Vec<_>>>()?;
    Ok((h, w_func(r, p, &model)?))
}

fn check_marginal(k: &SymmetricKernel, net: &Network, i: usize) -> Result<()> {
    k.expect_role(KernelRole::MarginalK, "coverage")?;
    if k.dim() != net.len() {
        return Err(invalid(format!("kernel size {} does not match network size {}", k.dim(), net.len())));
    }
    if i >= net.len() {
        return Err(invalid(format!("link {i} out of range for {} pairs", net.len())));
    }
    Ok(())
}

/// `I - K^!_i{h}` over the `n - 1` points other than `i`.
fn interference_block(k: &DMatrix<f64>, i: usize, h: &[f64]) -> Result<DMatrix<f64>> {
    let scaled = scaled_matrix(&palm_matrix(k, i)?, h)?;
    let m = scaled.nrows();
    Ok(DMatrix::identity(m, m) - scaled)
}

/// `det(I - M)` for a symmetric `M` with spectrum in `[0, 1]` up to tolerance.
fn det_one_minus(block: &DMatrix<f64>) -> Result<f64> {
    // `block` is I - M; its eigenvalues are 1 - lambda(M).
    let values = linalg::sym_eigenvalues(block)?;
    let mut det = 1.0;
    for &v in values.iter() {
        if v < -EIGEN_TOL || v > 1.0 + EIGEN_TOL {
            return Err(Error::NumericFailure(format!(
                "scaled Palm kernel eigenvalue {} outside [0, 1]",
                1.0 - v
            )));
        }
        det *= v.clamp(0.0, 1.0);
    }
    Ok(det)
}

/// Conditional coverage of link `i` from precomputed factors: `h` holds the
/// survival factor of every other transmitter in increasing index order and `w`
/// is the noise factor.
pub fn conditional_coverage_from_factors(k: &SymmetricKernel, i: usize, h: &[f64], w: f64) -> Result<f64> {
    if i >= k.dim() || h.len() + 1 != k.dim() {
        return Err(invalid(format!(
            "link {i} with {} survival factors does not fit a kernel of size {}",
            h.len(),
            k.dim()
        )));
    }
    let block = interference_block(k.matrix(), i, h)?;
    Ok(clamp_probability(det_one_minus(&block)? * w))
}

/// Coverage probability of link `i` from precomputed factors.
pub fn coverage_prob_from_factors(k: &SymmetricKernel, i: usize, h: &[f64], w: f64) -> Result<f64> {
    let kii = k.get(i, i);
    if kii <= PALM_TOL {
        return Ok(0.0);
    }
    Ok(clamp_probability(kii * conditional_coverage_from_factors(k, i, h, w)?))
}

/// `P(SINR_i > tau | x_i scheduled) = det(I - K^!_i{h_i}) * W_i`.
pub fn conditional_coverage(k: &SymmetricKernel, net: &Network, i: usize, p: &SinrParams) -> Result<f64> {
    check_marginal(k, net, i)?;
    let (h, w) = link_factors(net, i, p)?;
    conditional_coverage_from_factors(k, i, &h, w)
}

/// `P_i(tau) = K_ii * det(I - K^!_i{h_i}) * W_i`; zero when `K_ii <= 1e-12`.
pub fn coverage_prob(k: &SymmetricKernel, net: &Network, i: usize, p: &SinrParams) -> Result<f64> {
    check_marginal(k, net, i)?;
    if k.get(i, i) <= PALM_TOL {
        return Ok(0.0);
    }
    let (h, w) = link_factors(net, i, p)?;
    coverage_prob_from_factors(k, i, &h, w)
}

/// Coverage of every link.
pub fn coverage_all(k: &SymmetricKernel, net: &Network, p: &SinrParams) -> Result<Vec<f64>> {
    (0..net.len()).map(|i| coverage_prob(k, net, i, p)).collect()
}

/// Full-size coverage matrix for link `i`: the block `I - K^!_i{h_i}` on the
/// other indices, `W_i K_ii` at `(i, i)`, zeros elsewhere in row and column `i`.
/// Its determinant is `P_i(tau)`. When `K_ii <= 1e-12` the Palm block is
/// undefined and the identity is used instead, so the determinant is still
/// `W_i K_ii`.
pub fn coverage_matrix(k: &SymmetricKernel, net: &Network, i: usize, p: &SinrParams) -> Result<DMatrix<f64>> {
    check_marginal(k, net, i)?;
    let n = net.len();
    let (h, w) = link_factors(net, i, p)?;
    let kii = k.get(i, i);
    let block = if kii <= PALM_TOL {
        DMatrix::identity(n - 1, n - 1)
    } else {
        interference_block(k.matrix(), i, &h)?
    };
    let mut out = DMatrix::zeros(n, n);
    let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    for (a, &ja) in rest.iter().enumerate() {
        for (b, &jb) in rest.iter().enumerate() {
            out[(ja, jb)] = block[(a, b)];
        }
    }
    out[(i, i)] = w * kii;
    Ok(out)
}

/// Throughput under the constant-rate model, `R0 * P_i`.
pub fn throughput_constant(coverage: f64, r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(invalid(format!("R0 must be positive, got {r0}")));
    }
    if !(0.0..=1.0).contains(&coverage) {
        return Err(invalid(format!("coverage {coverage} is not a probability")));
    }
    Ok(r0 * coverage)
}

/// A strictly increasing map from SINR to transmission rate.
pub trait RateFunction {
    fn rate(&self, sinr: f64) -> f64;
    /// SINR needed to reach `rate`; `None` when the map cannot be inverted.
    fn inverse(&self, rate: f64) -> Option<f64>;
}

/// Shannon-type rate `C * ln(1 + t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShannonRate {
    pub c: f64,
}

impl RateFunction for ShannonRate {
    fn rate(&self, sinr: f64) -> f64 {
        self.c * sinr.ln_1p()
    }

    fn inverse(&self, rate: f64) -> Option<f64> {
        (self.c > 0.0).then(|| (rate / self.c).exp_m1())
    }
}

/// Settings for the variable-rate throughput integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableRateSettings {
    pub rel_tol: f64,
    /// Integrand floor relative to its peak that defines the upper limit.
    pub floor: f64,
    pub initial_upper: f64,
    pub upper_cap: f64,
}

impl Default for VariableRateSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-6, floor: 1e-10, initial_upper: 1.0, upper_cap: 1e6 }
    }
}

/// `T_i = int_0^inf P_i(r^-1(v)) dv` for a rate function `r`.
///
/// The upper limit doubles from `initial_upper` until the integrand falls below
/// `floor * K_ii` (an upper bound on its peak); passing `upper_cap` is reported as
/// a divergent integral.
pub fn throughput_variable(
    k: &SymmetricKernel,
    net: &Network,
    i: usize,
    p: &SinrParams,
    rate_fn: &dyn RateFunction,
    settings: &VariableRateSettings,
) -> Result<f64> {
    check_marginal(k, net, i)?;
    if !rate_fn.inverse(1.0).is_some_and(|t| t.is_finite() && t > 0.0) {
        return Err(invalid("rate function has no usable inverse"));
    }
    let peak = k.get(i, i);
    if peak <= PALM_TOL {
        return Ok(0.0);
    }
    let model = net.pathloss();
    let r = net.link_distance(i)?;
    let cross: Vec<f64> = (0..net.len())
        .filter(|&j| j != i)
        .map(|j| net.cross_distance(j, i))
        .collect::<Result<_>>()?;
    let mut failure: Option<Error> = None;
    let mut integrand = |v: f64| -> f64 {
        let tau = match rate_fn.inverse(v) {
            Some(t) if t > 0.0 => t,
            Some(_) => f64::MIN_POSITIVE,
            None => {
                failure.get_or_insert_with(|| invalid(format!("rate inverse undefined at {v}")));
                return f64::NAN;
            }
        };
        let eval = || -> Result<f64> {
            let pt = SinrParams { tau, ..*p };
            let h = cross.iter().map(|&s| h_func(s, r, &pt, &model)).collect::<Result<Vec<_>>>()?;
            coverage_prob_from_factors(k, i, &h, w_func(r, &pt, &model)?)
        };
        match eval() {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };

    let floor = settings.floor * peak;
    let mut upper = settings.initial_upper;
    loop {
        let value = integrand(upper);
        if value.is_nan() {
            break;
        }
        if value < floor {
            break;
        }
        if upper > settings.upper_cap {
            return Err(Error::DivergingIntegral { upper, integrand: value });
        }
        upper *= 2.0;
    }
    let result = quadrature::integrate(&mut integrand, 0.0, upper, settings.rel_tol, floor * upper * 1e-3, 5000);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.0)
}

/// Per-node rate multiplier `g(m)` in `R_i(psi) = peak * g(|psi|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardinalityCase {
    /// `g = 1`.
    Separate,
    /// `g(m) = 1 / m`.
    RoundRobin,
    /// `g(m) = H_m / m` with `H_m` the harmonic number.
    Opportunistic,
}

pub fn cardinality_rate(peak: f64, case: CardinalityCase, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("cardinality must be >= 1"));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(invalid(format!("peak rate must be positive, got {peak}")));
    }
    let mf = m as f64;
    let g = match case {
        CardinalityCase::Separate => 1.0,
        CardinalityCase::RoundRobin => 1.0 / mf,
        CardinalityCase::Opportunistic => (1..=m).map(|k| 1.0 / k as f64).sum::<f64>() / mf,
    };
    Ok(peak * g)
}

/// Per-link coverage record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCoverage {
    pub index: usize,
    pub inclusion: f64,
    pub conditional: f64,
    pub coverage: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageReport {
    pub links: Vec<LinkCoverage>,
}

pub const COVERAGE_CSV_HEADER: &str = "link,inclusion,conditional,coverage,throughput";

impl CoverageReport {
    /// Evaluates every link under marginal kernel `k` with the constant-rate
    /// model. Links that are never scheduled report conditional coverage 0.
    pub fn evaluate(k: &SymmetricKernel, net: &Network, p: &SinrParams, r0: f64) -> Result<Self> {
        let mut links = Vec::with_capacity(net.len());
        for i in 0..net.len() {
            check_marginal(k, net, i)?;
            let inclusion = k.get(i, i);
            let (conditional, coverage) = if inclusion <= PALM_TOL {
                (0.0, 0.0)
            } else {
                let (h, w) = link_factors(net, i, p)?;
                let c = conditional_coverage_from_factors(k, i, &h, w)?;
                (c, clamp_probability(inclusion * c))
            };
            links.push(LinkCoverage {
                index: i,
                inclusion,
                conditional,
                coverage,
                throughput: throughput_constant(coverage, r0)?,
            });
        }
        Ok(Self { links })
    }

    pub fn coverages(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.coverage).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COVERAGE_CSV_HEADER);
        out.push('\n');
        for l in &self.links {
            writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e}",
                l.index, l.inclusion, l.conditional, l.coverage, l.throughput
            )
            .unwrap();
        }
        out
    }
}

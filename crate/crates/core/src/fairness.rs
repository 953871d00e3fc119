//! Proportional-fairness utility and its maximization over scheduler families.
//!
//! Three families are supported, each lowering to a marginal kernel:
//! fixed Aloha `diag(p, .., p)`, adaptive Aloha `diag(p_i)`, and the L(S, q)
//! ensemble `K = L (L + I)^-1` with `L = diag(q) S diag(q)`. Adaptive Aloha is the
//! L(I, q) ensemble with `p_i = q_i^2 / (1 + q_i^2)`.
//!
//! The L-ensemble optimizer works in `w = log q` on a box and uses projected
//! gradient ascent with central finite-difference gradients, Barzilai-Borwein
//! trial steps and halving backtracking. After convergence, coordinates whose
//! gradient points out of the box are snapped to the bound if that improves U.

use std::fmt::Write as _;

use crate::coverage::{self, SinrParams};
use crate::dpp::{build_l, ensemble_from_marginal, marginal_from_l, KernelRole, QualityVector, SymmetricKernel};
use crate::error::{invalid, Error, Result};
use crate::geometry::Network;
use crate::linalg;

/// Largest network the optimizers accept.
pub const MAX_OPTIMIZE_NODES: usize = 32;

/// A random medium-access scheduler.
#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerSpec {
    FixedAloha(f64),
    AdaptiveAloha(Vec<f64>),
    LEnsemble { similarity: SymmetricKernel, quality: QualityVector },
}

impl SchedulerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerSpec::FixedAloha(_) => "fixed",
            SchedulerSpec::AdaptiveAloha(_) => "adaptive",
            SchedulerSpec::LEnsemble { .. } => "determinantal",
        }
    }

    /// Marginal kernel of the scheduler on `n` nodes.
    pub fn marginal_kernel(&self, n: usize) -> Result<SymmetricKernel> {
        match self {
            SchedulerSpec::FixedAloha(p) => SymmetricKernel::bernoulli(&vec![*p; n]),
            SchedulerSpec::AdaptiveAloha(p) => {
                check_len(p.len(), n)?;
                SymmetricKernel::bernoulli(p)
            }
            SchedulerSpec::LEnsemble { similarity, quality } => {
                check_len(similarity.dim(), n)?;
                marginal_from_l(&build_l(similarity, quality)?)
            }
        }
    }

    /// L-ensemble matrix of the scheduler; Aloha variants need every `p < 1`.
    pub fn ensemble_kernel(&self, n: usize) -> Result<SymmetricKernel> {
        match self {
            SchedulerSpec::LEnsemble { similarity, quality } => {
                check_len(similarity.dim(), n)?;
                build_l(similarity, quality)
            }
            _ => ensemble_from_marginal(&self.marginal_kernel(n)?),
        }
    }
}

fn check_len(got: usize, n: usize) -> Result<()> {
    if got == n {
        Ok(())
    } else {
        Err(invalid(format!("scheduler defined on {got} nodes, network has {n}")))
    }
}

/// Quality vector whose L(I, q) ensemble is adaptive Aloha with probabilities
/// `p`: `q_i = sqrt(p_i / (1 - p_i))`. Requires every `p_i < 1`.
pub fn quality_for_probabilities(p: &[f64]) -> Result<QualityVector> {
    let q = p
        .iter()
        .map(|&pi| {
            if (0.0..1.0).contains(&pi) {
                Ok((pi / (1.0 - pi)).sqrt())
            } else {
                Err(invalid(format!("probability {pi} has no finite quality")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    QualityVector::new(q)
}

/// `sum_i log(R0 * P_i)` for the scheduler with marginal kernel `k`; `-inf` when
/// any link has zero coverage.
pub fn utility_of_kernel(k: &SymmetricKernel, net: &Network, p: &SinrParams, r0: f64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..net.len() {
        let t = coverage::throughput_constant(coverage::coverage_prob(k, net, i, p)?, r0)?;
        if t <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += t.ln();
    }
    Ok(total)
}

/// Proportional-fairness utility of a scheduler.
pub fn utility(spec: &SchedulerSpec, net: &Network, p: &SinrParams, r0: f64) -> Result<f64> {
    utility_of_kernel(&spec.marginal_kernel(net.len())?, net, p, r0)
}

/// The same utility from eigenvalues of the per-link coverage matrices:
/// `n log R0 + sum_i sum_j log lambda_ij`.
pub fn utility_eigen(spec: &SchedulerSpec, net: &Network, p: &SinrParams, r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(invalid(format!("R0 must be positive, got {r0}")));
    }
    let k = spec.marginal_kernel(net.len())?;
    let n = net.len();
    let mut total = n as f64 * r0.ln();
    for i in 0..n {
        let m = coverage::coverage_matrix(&k, net, i, p)?;
        for &lam in linalg::sym_eigenvalues(&m)?.iter() {
            let lam = lam.clamp(0.0, 1.0);
            if lam <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += lam.ln();
        }
    }
    Ok(total)
}

/// Settings for the utility maximizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Half-step of the central finite differences.
    pub gradient_step: f64,
    pub initial_step: f64,
    /// Stop once an accepted step changes the utility by less than this.
    pub utility_tolerance: f64,
    pub w_bounds: (f64, f64),
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_step: 1e-6,
            initial_step: 0.1,
            utility_tolerance: 1e-9,
            w_bounds: (-20.0, 20.0),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.w_bounds;
        if self.max_iterations == 0
            || !(self.gradient_step > 0.0)
            || !(self.initial_step > 0.0)
            || !(self.utility_tolerance > 0.0)
        {
            return Err(invalid("optimizer settings must be positive"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("w bounds must satisfy w_min < w_max, got [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// One accepted iteration of the ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub utility: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    pub active_bounds: usize,
}

pub const TRACE_CSV_HEADER: &str = "iteration,utility,step_size,grad_norm,active_bounds";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.11e},{:.11e},{:.11e},{}",
            r.iteration, r.utility, r.step_size, r.grad_norm, r.active_bounds
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LEnsembleOptimum {
    pub quality: QualityVector,
    pub utility: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Coordinates of `w` sitting on the box.
    pub bound_active: Vec<bool>,
    pub trace: Vec<TraceRow>,
}

impl LEnsembleOptimum {
    pub fn log_quality(&self) -> &[f64] {
        self.quality.log_params().expect("optimizer results carry w")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedAlohaOptimum {
    pub p: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveAlohaOptimum {
    pub p: Vec<f64>,
    pub utility: f64,
    pub ensemble: LEnsembleOptimum,
}

fn check_optimizable(net: &Network) -> Result<()> {
    if net.len() > MAX_OPTIMIZE_NODES {
        return Err(Error::SizeLimit { n: net.len(), max: MAX_OPTIMIZE_NODES });
    }
    Ok(())
}

/// Utility of the L(S, e^w) ensemble.
pub fn lensemble_utility(
    net: &Network,
    s: &SymmetricKernel,
    w: &[f64],
    p: &SinrParams,
    r0: f64,
) -> Result<f64> {
    let spec = SchedulerSpec::LEnsemble { similarity: s.clone(), quality: QualityVector::from_log(w.to_vec())? };
    utility(&spec, net, p, r0)
}

/// Central finite-difference gradient of `f` at `x` with half-step `h`.
pub fn fd_gradient<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = f(&probe)?;
        probe[k] = x[k] - h;
        let down = f(&probe)?;
        probe[k] = x[k];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Maximizes the utility of the L(S, q) ensemble over `q = exp(w)`, starting at
/// `w = 0`.
pub fn optimize_lensemble(
    net: &Network,
    s: &SymmetricKernel,
    p: &SinrParams,
    r0: f64,
    settings: &OptimizerSettings,
) -> Result<LEnsembleOptimum> {
    optimize_lensemble_from(net, s, p, r0, settings, &vec![0.0; net.len()])
}

/// As [`optimize_lensemble`] from a given start `w0`. A start with utility
/// `-inf` falls back to `w = 0`.
pub fn optimize_lensemble_from(
    net: &Network,
    s: &SymmetricKernel,
    p: &SinrParams,
    r0: f64,
    settings: &OptimizerSettings,
    w0: &[f64],
) -> Result<LEnsembleOptimum> {
    settings.validate()?;
    check_optimizable(net)?;
    s.expect_role(KernelRole::SimilarityS, "optimize_lensemble")?;
    if s.dim() != net.len() {
        return Err(invalid(format!("similarity size {} does not match network size {}", s.dim(), net.len())));
    }
    let f = |w: &[f64]| lensemble_utility(net, s, w, p, r0);
    let h = settings.gradient_step;
    let grad = |w: &[f64]| fd_gradient(&mut |x: &[f64]| lensemble_utility(net, s, x, p, r0), w, h);
    let result = gradient_ascent(f, grad, w0, settings)?;
    Ok(LEnsembleOptimum {
        quality: QualityVector::from_log(result.w)?,
        utility: result.utility,
        iterations: result.iterations,
        converged: result.converged,
        bound_active: result.bound_active,
        trace: result.trace,
    })
}

/// Outcome of [`gradient_ascent`].
#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub w: Vec<f64>,
    pub utility: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bound_active: Vec<bool>,
    pub trace: Vec<TraceRow>,
}

/// Projected gradient ascent of `f` over the box `settings.w_bounds` from `w0`,
/// with gradients supplied by `grad`.
///
/// A start where `f` is `-inf` is replaced by the origin; if that is `-inf`
/// too the result is [`Error::InfeasibleStart`]. Each iteration tries a
/// Barzilai-Borwein step and halves it until `f` strictly increases; the loop
/// stops when the increase falls below `utility_tolerance`, when no step down to
/// 1e-12 ascends, or after `max_iterations`.
pub fn gradient_ascent<F, G>(mut f: F, mut grad: G, w0: &[f64], settings: &OptimizerSettings) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    settings.validate()?;
    let n = w0.len();
    let (lo, hi) = settings.w_bounds;
    let clamp = |w: &mut Vec<f64>| w.iter_mut().for_each(|v| *v = v.clamp(lo, hi));

    let mut w = w0.to_vec();
    clamp(&mut w);
    let mut u = f(&w)?;
    if u == f64::NEG_INFINITY {
        w = vec![0.0f64.clamp(lo, hi); n];
        u = f(&w)?;
        if u == f64::NEG_INFINITY {
            return Err(Error::InfeasibleStart);
        }
    }

    let mut step = settings.initial_step;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let g = grad(&w)?;
        if g.len() != n {
            return Err(invalid(format!("gradient has {} entries, expected {n}", g.len())));
        }
        let projected: Vec<f64> = g
            .iter()
            .zip(&w)
            .map(|(&gk, &wk)| if (wk >= hi && gk > 0.0) || (wk <= lo && gk < 0.0) { 0.0 } else { gk })
            .collect();
        let grad_norm = projected.iter().map(|x| x * x).sum::<f64>().sqrt();
        if grad_norm == 0.0 {
            converged = true;
            break;
        }
        if let Some((w_prev, g_prev)) = &previous {
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..n {
                let dw = w[k] - w_prev[k];
                ss += dw * dw;
                sy += dw * (g[k] - g_prev[k]);
            }
            step = if sy < 0.0 { (ss / -sy).clamp(1e-12, 1e6) } else { (2.0 * step).min(1e6) };
        }

        let mut t = step;
        let accepted = loop {
            let mut candidate: Vec<f64> = w.iter().zip(&projected).map(|(wk, gk)| wk + t * gk).collect();
            clamp(&mut candidate);
            let uc = f(&candidate)?;
            if uc > u {
                break Some((candidate, uc));
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        let Some((w_new, u_new)) = accepted else {
            converged = true;
            break;
        };
        let delta = u_new - u;
        let active = w_new.iter().filter(|&&v| v <= lo || v >= hi).count();
        trace.push(TraceRow { iteration: iterations, utility: u_new, step_size: t, grad_norm, active_bounds: active });
        previous = Some((std::mem::replace(&mut w, w_new), g));
        u = u_new;
        step = t;
        if delta.abs() < settings.utility_tolerance {
            converged = true;
            break;
        }
    }

    // On flat ascending tails the |dU| stop fires before the box is reached; move
    // coordinates whose gradient points outward onto the bound when that helps.
    let g = grad(&w)?;
    for k in 0..n {
        let target = if g[k] > 0.0 && w[k] < hi {
            hi
        } else if g[k] < 0.0 && w[k] > lo {
            lo
        } else {
            continue;
        };
        let mut candidate = w.clone();
        candidate[k] = target;
        let uc = f(&candidate)?;
        if uc > u {
            w = candidate;
            u = uc;
        }
    }

    let bound_active = w.iter().map(|&v| v <= lo || v >= hi).collect();
    Ok(AscentResult { w, utility: u, iterations, converged, bound_active, trace })
}

/// Largest relative error `|g - g_fd| / max(|g_fd|, 1e-12)` (Euclidean norms)
/// between a supplied gradient and central differences over `points`.
pub fn gradient_check<F, G>(mut f: F, mut grad: G, points: &[Vec<f64>], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut worst = 0.0f64;
    for x in points {
        let fd = fd_gradient(&mut f, x, h)?;
        let g = grad(x)?;
        if g.len() != fd.len() {
            return Err(invalid(format!("gradient has {} entries, expected {}", g.len(), fd.len())));
        }
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    Ok(worst)
}

/// Best common access probability `p` in `(0, 1]`, by golden-section search on
/// `log p` down to `|dp| < 1e-9`.
pub fn optimize_fixed_aloha(
    net: &Network,
    p: &SinrParams,
    r0: f64,
    settings: &OptimizerSettings,
) -> Result<FixedAlohaOptimum> {
    settings.validate()?;
    check_optimizable(net)?;
    let f = |x: f64| utility(&SchedulerSpec::FixedAloha(x.exp().min(1.0)), net, p, r0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-9f64.ln(), 0.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b.exp() - a.exp() >= 1e-9 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut best = if fc >= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    let at_one = f(0.0)?;
    if at_one >= best.1 {
        best = (1.0, at_one);
    }
    Ok(FixedAlohaOptimum { p: best.0, utility: best.1 })
}

/// Best per-node access probabilities: the L(I, q) ensemble optimum, started
/// from the fixed-Aloha optimum so the result never falls below it.
pub fn optimize_adaptive_aloha(
    net: &Network,
    p: &SinrParams,
    r0: f64,
    settings: &OptimizerSettings,
) -> Result<AdaptiveAlohaOptimum> {
    let fixed = optimize_fixed_aloha(net, p, r0, settings)?;
    let (lo, hi) = settings.w_bounds;
    let w0 = if fixed.p >= 1.0 { hi } else { (0.5 * (fixed.p / (1.0 - fixed.p)).ln()).clamp(lo, hi) };
    let identity = SymmetricKernel::identity(net.len(), KernelRole::SimilarityS);
    let ensemble = optimize_lensemble_from(net, &identity, p, r0, settings, &vec![w0; net.len()])?;
    Ok(AdaptiveAlohaOptimum {
        p: ensemble.quality.independent_probabilities(),
        utility: ensemble.utility,
        ensemble,
    })
}

/// Per-node feature extractors for the log-affine quality model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureExtractor {
    /// `(1, min_{j != i} |x_i - y_j|)`: distance to the nearest foreign receiver.
    #[default]
    NearestForeignReceiver,
    /// `(1, min_{j != i} |x_i - x_j|)`: distance to the nearest other transmitter.
    NearestOtherTransmitter,
}

impl FeatureExtractor {
    pub fn dim(&self) -> usize {
        2
    }

    /// Feature vector of node `i`. With a single node the distance feature is
    /// the window diagonal.
    pub fn extract(&self, net: &Network, i: usize) -> Result<Vec<f64>> {
        if i >= net.len() {
            return Err(invalid(format!("node {i} out of range for {} pairs", net.len())));
        }
        let x = net.transmitters()[i];
        let targets = match self {
            FeatureExtractor::NearestForeignReceiver => net.receivers(),
            FeatureExtractor::NearestOtherTransmitter => net.transmitters(),
        };
        let nearest = targets
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, t)| x.distance(t))
            .fold(f64::INFINITY, f64::min);
        let nearest = if nearest.is_finite() { nearest } else { net.window_diagonal() };
        Ok(vec![1.0, nearest])
    }
}

/// Features `(1, min_{j != i} |x_i - y_j|)` of node `i`.
pub fn extract_features(net: &Network, i: usize) -> Result<Vec<f64>> {
    FeatureExtractor::NearestForeignReceiver.extract(net, i)
}

/// Log-affine quality model `q_i = exp(theta . f_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub theta: Vec<f64>,
    pub extractor: FeatureExtractor,
}

impl FeatureModel {
    pub fn new(theta: Vec<f64>, extractor: FeatureExtractor) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("theta must be a non-empty finite vector"));
        }
        Ok(Self { theta, extractor })
    }
}

pub fn quality_from_features(model: &FeatureModel, net: &Network) -> Result<QualityVector> {
    if model.theta.len() != model.extractor.dim() {
        return Err(invalid(format!(
            "theta has {} entries, features have {}",
            model.theta.len(),
            model.extractor.dim()
        )));
    }
    let w = (0..net.len())
        .map(|i| {
            let f = model.extractor.extract(net, i)?;
            Ok(model.theta.iter().zip(&f).map(|(t, x)| t * x).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    QualityVector::from_log(w)
}

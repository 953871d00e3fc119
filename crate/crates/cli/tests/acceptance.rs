//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use detsched_cli::compare::run_experiment;
use detsched_cli::{ExperimentConfig, SchedulerKind};
use detsched_core::coverage::coverage_prob;
use detsched_core::dpp::{build_l, ensemble_from_marginal, gaussian_similarity, marginal_from_l, subset_prob_exact};
use detsched_core::fairness::{
    lensemble_utility, optimize_adaptive_aloha, optimize_fixed_aloha, optimize_lensemble, utility, utility_eigen,
};
use detsched_core::oracle::{enumerate_coverage, mc_coverage_all, mc_subset_frequencies};
use detsched_core::rng::{rng_from_seed, SimRng};
use detsched_core::{
    generate_network, KernelRole, Network, OptimizerSettings, PathLossModel, QualityVector, SchedulerSpec,
    SinrParams, Subset, SymmetricKernel,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const SE_BAND: f64 = 4.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within_budget(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

fn reference_network(n: usize, seed: u64) -> Network {
    generate_network(n, 1.0, 0.1, PathLossModel::bounded(4.0).unwrap(), 0.0, seed).unwrap()
}

fn reference_params() -> SinrParams {
    SinrParams::new(10.0, 0.0, 1.0).unwrap()
}

/// Random network, law, noise and threshold, plus a Gaussian-similarity
/// L-ensemble with random bandwidth and log-quality.
struct Instance {
    net: Network,
    p: SinrParams,
    s: SymmetricKernel,
    q: QualityVector,
    l: SymmetricKernel,
}

fn random_instance(n: usize, seed: u64) -> Instance {
    let mut rng = rng_from_seed(seed ^ 0xacce_97);
    let pathloss = if rng.random::<bool>() {
        PathLossModel::bounded(2.0 + 3.0 * rng.random::<f64>()).unwrap()
    } else {
        PathLossModel::singular(0.5 + rng.random::<f64>(), 2.5 + 2.0 * rng.random::<f64>()).unwrap()
    };
    let noise = if rng.random::<bool>() { 0.0 } else { 0.05 * rng.random::<f64>() };
    let window = 0.2 + 0.8 * rng.random::<f64>();
    let net = generate_network(n, window, 0.1, pathloss, noise, seed).unwrap();
    let p = SinrParams::for_network(&net, 0.5 + 10.0 * rng.random::<f64>()).unwrap();
    let s = gaussian_similarity(&net, 0.05 + 0.5 * rng.random::<f64>()).unwrap();
    let w: Vec<f64> = (0..n).map(|_| 3.0 * rng.random::<f64>() - 1.5).collect();
    let q = QualityVector::from_log(w).unwrap();
    let l = build_l(&s, &q).unwrap();
    Instance { net, p, s, q, l }
}

fn criterion1_instances() -> Vec<Instance> {
    (0..50).map(|k| random_instance(2 + k % 9, 1000 + k as u64)).collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut links = 0;
    for inst in criterion1_instances() {
        let k = marginal_from_l(&inst.l).unwrap();
        for i in 0..inst.net.len() {
            let det = coverage_prob(&k, &inst.net, i, &inst.p).unwrap();
            let en = enumerate_coverage(&inst.l, &inst.net, i, &inst.p).unwrap();
            worst = worst.max((det - en).abs());
            links += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        worst < 1e-10 && within_budget(t, 60),
        format!("50 instances, {links} links, max |det - enum| = {worst:.2e} (tol 1e-10), {:.1}s (budget 60s)", t.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let samples = 200_000;
    let mut worst_z = 0.0f64;
    let mut checks = 0;
    let mut misses = 0;
    for k in 0..10u64 {
        let net = reference_network(5, 2000 + k);
        let p = SinrParams::new(10.0, 1e-4, 1.0).unwrap();
        let mut rng = rng_from_seed(2100 + k);
        let specs = [
            SchedulerSpec::FixedAloha(rng.random_range(0.1..0.9)),
            SchedulerSpec::AdaptiveAloha((0..5).map(|_| rng.random_range(0.1..0.9)).collect()),
            SchedulerSpec::LEnsemble {
                similarity: gaussian_similarity(&net, 10.0).unwrap(),
                quality: QualityVector::from_log((0..5).map(|_| rng.random_range(-1.0..2.0)).collect()).unwrap(),
            },
        ];
        for (f, spec) in specs.iter().enumerate() {
            let kmat = spec.marginal_kernel(5).unwrap();
            let mc = mc_coverage_all(spec, &net, &p, samples, 2200 + 10 * k + f as u64).unwrap();
            for (i, est) in mc.iter().enumerate() {
                let exact = coverage_prob(&kmat, &net, i, &p).unwrap();
                checks += 1;
                if !est.agrees_with(exact, SE_BAND) {
                    misses += 1;
                }
                if est.std_error > 0.0 {
                    worst_z = worst_z.max((est.mean - exact).abs() / est.std_error);
                }
            }
        }
    }
    let t = start.elapsed();
    verdict(
        misses == 0 && within_budget(t, 300),
        format!(
            "10 instances x 3 families, {checks} links, {misses} outside 4 SE, max |z| = {worst_z:.2}, {:.1}s (budget 300s)",
            t.as_secs_f64()
        ),
    )
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SimRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn with_spectrum(values: &[f64], rng: &mut SimRng) -> DMatrix<f64> {
    let v = gaussian_matrix(values.len(), values.len(), rng).qr().q();
    let m = &v * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * v.transpose();
    (&m + m.transpose()) * 0.5
}

fn criterion_3() -> Verdict {
    let samples = 200_000;
    let mut rng = rng_from_seed(3000);
    let mut misses = 0;
    let mut worst_z = 0.0f64;
    for k in 0..20u64 {
        let values: Vec<f64> = (0..4).map(|_| 0.95 * rng.random::<f64>()).collect();
        let kmat = SymmetricKernel::marginal(with_spectrum(&values, &mut rng)).unwrap();
        let l = ensemble_from_marginal(&kmat).unwrap();
        let freqs = mc_subset_frequencies(&kmat, samples, 3100 + k).unwrap();
        for (mask, est) in freqs.iter().enumerate() {
            let exact = subset_prob_exact(&l, &Subset::from_mask(mask as u64, 4)).unwrap();
            let se = (exact * (1.0 - exact) / samples as f64).sqrt();
            let z = (est.mean - exact).abs() / se.max(1e-300);
            worst_z = worst_z.max(z);
            if z > SE_BAND {
                misses += 1;
            }
        }
    }
    verdict(misses == 0, format!("20 kernels x 16 subsets, {misses} outside 4 SE, max |z| = {worst_z:.2}"))
}

fn criterion_4() -> Verdict {
    let mut rng = rng_from_seed(4000);
    let mut worst_eig = 0.0f64;
    let mut worst_trip = 0.0f64;
    let mut worst_direct = 0.0f64;
    for k in 0..100usize {
        let n = 1 + k % 16;
        let rank = 1 + rng.random_range(0..n);
        let a = gaussian_matrix(n, rank, &mut rng);
        let m = &a * a.transpose() / n as f64;
        let lm = (&m + m.transpose()) * 0.5;
        let l = SymmetricKernel::ensemble(lm.clone()).unwrap();
        let kmat = marginal_from_l(&l).unwrap();

        let mut lam: Vec<f64> = lm.clone().symmetric_eigen().eigenvalues.iter().map(|&x| x.max(0.0)).collect();
        lam.sort_by(f64::total_cmp);
        let mut kappa: Vec<f64> = kmat.matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        kappa.sort_by(f64::total_cmp);
        for (x, y) in lam.iter().zip(&kappa) {
            worst_eig = worst_eig.max((x / (1.0 + x) - y).abs());
        }

        let id = DMatrix::<f64>::identity(n, n);
        let direct = &lm * (&lm + &id).try_inverse().unwrap();
        worst_direct = worst_direct.max((&direct - kmat.matrix()).amax());
        let back = ensemble_from_marginal(&kmat).unwrap();
        worst_trip = worst_trip.max((back.matrix() - &lm).amax());
    }
    let tol = 1e-9;
    verdict(
        worst_eig < tol && worst_trip < tol && worst_direct < tol,
        format!(
            "100 PSD matrices n <= 16: eigen map {worst_eig:.2e}, L(L+I)^-1 {worst_direct:.2e}, round trip {worst_trip:.2e} (tol 1e-9)"
        ),
    )
}

fn criterion_5() -> Verdict {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut evaluated = 0;
    let p = reference_params();
    for k in 0..10u64 {
        let net = reference_network(5, 5000 + k);
        let s = gaussian_similarity(&net, 10.0).unwrap();
        let mut rng = rng_from_seed(5100 + k);
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let ua = lensemble_utility(&net, &s, &a, &p, 1.0).unwrap();
            let ub = lensemble_utility(&net, &s, &b, &p, 1.0).unwrap();
            let um = lensemble_utility(&net, &s, &mid, &p, 1.0).unwrap();
            if !(ua.is_finite() && ub.is_finite() && um.is_finite()) {
                continue;
            }
            evaluated += 1;
            let slack = um - 0.5 * (ua + ub);
            worst = worst.min(slack);
            if slack < -1e-9 {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0 && evaluated == 1000,
        format!("{evaluated} segments over 10 instances, {violations} with slack < -1e-9, min slack = {worst:.3e}"),
    )
}

fn criterion_6() -> Verdict {
    let settings = OptimizerSettings::default();
    let p = reference_params();
    let mut nesting_gap = f64::NEG_INFINITY;
    let mut lowering = 0.0f64;
    let mut small_sigma = 0.0f64;
    for k in 0..10u64 {
        let net = reference_network(5, 6000 + k);
        let fixed = optimize_fixed_aloha(&net, &p, 1.0, &settings).unwrap();
        let adaptive = optimize_adaptive_aloha(&net, &p, 1.0, &settings).unwrap();
        nesting_gap = nesting_gap.max(fixed.utility - adaptive.utility);

        let mut rng = rng_from_seed(6100 + k);
        let probs: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..0.99)).collect();
        let q = QualityVector::new(probs.iter().map(|&x| (x / (1.0 - x)).sqrt()).collect()).unwrap();
        let aloha = SchedulerSpec::AdaptiveAloha(probs).marginal_kernel(5).unwrap();
        let identity = SymmetricKernel::identity(5, KernelRole::SimilarityS);
        let lens = SchedulerSpec::LEnsemble { similarity: identity, quality: q }.marginal_kernel(5).unwrap();
        lowering = lowering.max((aloha.matrix() - lens.matrix()).amax());

        let s = gaussian_similarity(&net, 1e-6).unwrap();
        let det = optimize_lensemble(&net, &s, &p, 1.0, &settings).unwrap();
        small_sigma = small_sigma.max((det.utility - adaptive.utility).abs());
    }
    verdict(
        nesting_gap <= 1e-9 && lowering <= 1e-12 && small_sigma <= 1e-4,
        format!(
            "10 instances: max U*(fixed) - U*(adaptive) = {nesting_gap:.2e} (<= 1e-9), kernel lowering {lowering:.2e} (<= 1e-12), |U*(sigma=1e-6) - U*(adaptive)| = {small_sigma:.2e} (<= 1e-4)"
        ),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let base = ExperimentConfig { realizations: 100, ..Default::default() };
    let five = run_experiment(&ExperimentConfig { n_pairs: 5, ..base.clone() }).unwrap();
    let ten = run_experiment(&ExperimentConfig { n_pairs: 10, ..base.clone() }).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in SchedulerKind::ALL {
        let (c5, c10) = (five.mean_coverage(kind), ten.mean_coverage(kind));
        pass &= c10 < c5;
        parts.push(format!("{} {c5:.4} -> {c10:.4}", kind.name()));
    }
    for (label, result) in [("5 pairs", &five), ("10 pairs", &ten)] {
        let det = result.utilities(SchedulerKind::Determinantal);
        let ada = result.utilities(SchedulerKind::Adaptive);
        let wins = det.iter().zip(&ada).filter(|(d, a)| matches!((d, a), (Some(d), Some(a)) if d >= a)).count();
        let share = wins as f64 / det.len() as f64;
        pass &= share >= 0.9;
        parts.push(format!("{label}: determinantal >= adaptive on {wins}/{}", det.len()));
    }
    let t = start.elapsed();
    pass &= within_budget(t, 900);
    verdict(pass, format!("mean coverage {}, {:.1}s (budget 900s)", parts.join("; "), t.as_secs_f64()))
}

fn criterion_8() -> Verdict {
    let mut worst = 0.0f64;
    let mut finite = 0;
    for inst in criterion1_instances() {
        let spec = SchedulerSpec::LEnsemble { similarity: inst.s.clone(), quality: inst.q.clone() };
        let a = utility(&spec, &inst.net, &inst.p, 1.0).unwrap();
        let b = utility_eigen(&spec, &inst.net, &inst.p, 1.0).unwrap();
        if a.is_finite() && b.is_finite() {
            finite += 1;
            worst = worst.max((a - b).abs());
        }
    }
    verdict(worst < 1e-8, format!("{finite} finite instances, max |U - U_eigen| = {worst:.2e} (tol 1e-8)"))
}

fn criterion_9() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_detsched"))
            .args(["compare", "--seed", "9", "--realizations", "20", "--out", d.path().to_str().unwrap()])
            .output()
            .unwrap();
        if !out.status.success() {
            return verdict(false, format!("compare failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut identical = true;
    let mut names = Vec::new();
    for name in ["realizations.csv", "aggregate.csv", "plot_coverage.py"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        identical &= a == b;
        names.push(format!("{name} {}", if a == b { "identical" } else { "DIFFERS" }));
    }
    verdict(identical, names.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("oracle equivalence", criterion_1),
        ("Monte Carlo agreement", criterion_2),
        ("sampler exactness", criterion_3),
        ("spectral map", criterion_4),
        ("concavity in log-quality", criterion_5),
        ("nesting and dominance", criterion_6),
        ("coverage under densification", criterion_7),
        ("dual utility paths", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {} ({name}): {} - {}", idx + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

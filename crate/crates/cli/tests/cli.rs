use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use detsched_core::geometry::Network;

fn detsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detsched")).args(args).output().expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn gen_writes_a_parseable_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["gen", "--n-pairs", "7", "--seed", "11", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net = Network::from_json(&read(&dir.path().join("network.json"))).unwrap();
    assert_eq!(net.len(), 7);
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn gen_is_deterministic_in_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(detsched(&["gen", "--seed", seed, "--out", &out_arg(dir.path())]).status.success());
    }
    let net = |d: &tempfile::TempDir| std::fs::read(d.path().join("network.json")).unwrap();
    assert_eq!(net(&a), net(&b));
    assert_ne!(net(&a), net(&c));
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["gen", "--n-pairs", "0", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_pairs must be >= 1"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"nonsense": 1}"#).unwrap();
    let out = detsched(&["gen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n_pairs": 4, "seed": 9}"#).unwrap();
    let out = detsched(&["gen", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(out.status.success());
    let net = Network::from_json(&read(&dir.path().join("network.json"))).unwrap();
    assert_eq!(net.len(), 4);
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn agrees_to_12_digits(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn compare_outputs_have_expected_shape_and_reaggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["compare", "--realizations", "6", "--seed", "5", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, agg) = parse_csv(&read(&dir.path().join("aggregate.csv")));
    assert_eq!(header, ["scheduler", "link", "coverage_mean", "coverage_se", "utility_mean", "utility_se"]);
    assert_eq!(agg.len(), 15);
    let schedulers: std::collections::BTreeSet<_> = agg.iter().map(|r| r[0].clone()).collect();
    assert_eq!(schedulers.len(), 3);

    let (rheader, rows) = parse_csv(&read(&dir.path().join("realizations.csv")));
    assert_eq!(rows.len(), 6 * 3 * 5);
    let col = |name: &str| rheader.iter().position(|h| h == name).unwrap();
    let (cs, cl, cc, cu) = (col("scheduler"), col("link"), col("coverage"), col("utility"));

    let mut groups: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &rows {
        let g = groups.entry((r[cs].clone(), r[cl].clone())).or_default();
        g.0.push(r[cc].parse().unwrap());
        g.1.push(r[cu].parse().unwrap());
    }
    for r in &agg {
        let (cov, util) = &groups[&(r[0].clone(), r[1].clone())];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let reported: f64 = r[2].parse().unwrap();
        assert!(agrees_to_12_digits(mean(cov), reported), "{r:?}: {} vs {reported}", mean(cov));
        let reported: f64 = r[4].parse().unwrap();
        assert!(agrees_to_12_digits(mean(util), reported), "{r:?}");
    }
    let script = read(&dir.path().join("plot_coverage.py"));
    assert!(script.contains("aggregate.csv"));
}

#[test]
fn compare_writes_traces_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["compare", "--realizations", "2", "--traces", "--out", &out_arg(dir.path())]);
    assert!(out.status.success());
    let trace = read(&dir.path().join("traces").join("r0001_determinantal.csv"));
    assert!(trace.lines().count() > 1);
}

#[test]
fn verify_passes_on_six_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["verify", "--n-pairs", "6", "--out", &out_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&read(&dir.path().join("verify").join("instance0_determinantal.csv")));
    assert_eq!(header, ["link", "exact_det", "exact_enum", "mc_mean", "mc_se", "abs_diff"]);
    assert_eq!(rows.len(), 6);
}

#[test]
fn verify_reports_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["verify", "--n-pairs", "6", "--inject-fault", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("verification failed"));
    assert!(stderr.contains("link 0"));
}

#[test]
fn verify_refuses_large_networks() {
    let dir = tempfile::tempdir().unwrap();
    let out = detsched(&["verify", "--n-pairs", "13", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size limit"));
}

fn write_kernel(dir: &Path, rows: &[&[f64]]) -> String {
    let mut text = format!("# role=K n={}\n", rows.len());
    for r in rows {
        text += &r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
        text.push('\n');
    }
    let path = dir.join("kernel.csv");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn sample_lines(dir: &Path, kernel: &str, count: usize) -> Vec<Vec<usize>> {
    let out = detsched(&["sample", "--kernel", kernel, "--count", &count.to_string(), "--out", &out_arg(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.join("samples.txt"));
    let lines: Vec<Vec<usize>> =
        text.lines().map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect()).collect();
    assert_eq!(lines.len(), count);
    lines
}

#[test]
fn zero_kernel_samples_are_empty() {
    let dir = tempfile::tempdir().unwrap();
    let k = write_kernel(dir.path(), &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
    assert!(sample_lines(dir.path(), &k, 50).iter().all(|l| l.is_empty()));
}

#[test]
fn diagonal_kernel_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let p = [0.2, 0.5, 0.9];
    let k = write_kernel(dir.path(), &[&[p[0], 0.0, 0.0], &[0.0, p[1], 0.0], &[0.0, 0.0, p[2]]]);
    let n = 20_000;
    let lines = sample_lines(dir.path(), &k, n);
    for (i, &pi) in p.iter().enumerate() {
        let freq = lines.iter().filter(|l| l.contains(&i)).count() as f64 / n as f64;
        let se = (pi * (1.0 - pi) / n as f64).sqrt();
        assert!((freq - pi).abs() <= 4.0 * se, "node {i}: {freq} vs {pi}");
    }
    assert!(lines.iter().all(|l| l.windows(2).all(|w| w[0] < w[1])));
}

#[test]
fn projection_kernel_has_fixed_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    // Projection onto span{(1,1,0,0)/sqrt2, (0,0,1,1)/sqrt2}.
    let k = write_kernel(
        dir.path(),
        &[&[0.5, 0.5, 0.0, 0.0], &[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.5, 0.5], &[0.0, 0.0, 0.5, 0.5]],
    );
    let lines = sample_lines(dir.path(), &k, 500);
    assert!(lines.iter().all(|l| l.len() == 2));
}

#[test]
fn sample_rejects_similarity_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "# role=S n=1\n1\n").unwrap();
    let out = detsched(&["sample", "--kernel", path.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use infostream::formats::{format_dist, read_dist, read_stream};
use infostream::TrialReport;
use infostream_core::streaming::item_counts;
use infostream_core::Target;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infostream"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn report(args: &[&str]) -> TrialReport {
    serde_json::from_str(&ok(args)).unwrap()
}

#[test]
fn gen_dist_examples() {
    assert_eq!(ok(&["gen-dist", "--kind", "uniform", "--n", "4"]), "#n=4\n0\t0.25\n1\t0.25\n2\t0.25\n3\t0.25\n");
    let pm = ok(&["gen-dist", "--kind", "pointmass", "--n", "6"]);
    assert_eq!(pm.lines().skip(1).collect::<Vec<_>>(), ["0\t1.0"]);
}

#[test]
fn dist_round_trip_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(&dir, "z.dist");
    ok(&["gen-dist", "--kind", "zipf(1.3)", "--n", "200", "--out", &f]);
    let text = std::fs::read_to_string(&f).unwrap();
    assert_eq!(format_dist(&read_dist(Path::new(&f)).unwrap()), text);
}

#[test]
fn hard_l1_writes_a_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (p, q) = (path(&dir, "p.dist"), path(&dir, "q.dist"));
    let base = ["gen-dist", "--kind", "hard-l1", "--n", "1000", "--eps", "0.2", "--set", "k=3", "--set", "a=0.2"];
    ok(&[&base[..], &["--out", &p, "--out-q", &q, "--far"]].concat());
    let d = ok(&["exact", "--dist", &p, "--dist-q", &q, "--kind", "l1"]);
    assert!((d.trim().parse::<f64>().unwrap() - 0.2 * 1.6).abs() < 1e-12);
    assert_eq!(cli(&base).status.code(), Some(2));
}

#[test]
fn gen_stream_examples() {
    let dir = tempfile::tempdir().unwrap();
    let pm = path(&dir, "pm.dist");
    ok(&["gen-dist", "--kind", "pointmass", "--n", "3", "--set", "item=2", "--out", &pm]);
    let s = ok(&["gen-stream", "--dist", &pm, "--m", "5"]);
    assert_eq!(s, "#n=3\n#order=as-given\nP\t2\nP\t2\nP\t2\nP\t2\nP\t2\n");

    let u = path(&dir, "u.dist");
    ok(&["gen-dist", "--kind", "uniform", "--n", "2", "--out", &u]);
    let (a, b) = (path(&dir, "a.stream"), path(&dir, "b.stream"));
    ok(&["gen-stream", "--dist", &u, "--m", "100000", "--seed", "4", "--out", &a]);
    ok(&["gen-stream", "--dist", &u, "--m", "100000", "--seed", "4", "--order", "shuffled", "--out", &b]);
    let (sa, sb) = (read_stream(Path::new(&a)).unwrap(), read_stream(Path::new(&b)).unwrap());
    let ca = item_counts(2, sa.items(Target::P));
    assert_eq!(ca, item_counts(2, sb.items(Target::P)));
    assert_ne!(sa.tokens, sb.tokens);
    // Binomial(10^5, 1/2): 4σ is about 632.
    assert!((ca[0] as f64 - 50_000.0).abs() <= 4.0 * (100_000.0f64 * 0.25).sqrt());
}

#[test]
fn gen_stream_counts_pass_chi_square() {
    let dir = tempfile::tempdir().unwrap();
    let z = path(&dir, "z.dist");
    ok(&["gen-dist", "--kind", "zipf", "--n", "500", "--out", &z]);
    let s = path(&dir, "z.stream");
    ok(&["gen-stream", "--dist", &z, "--m", "1000000", "--order", "shuffled", "--seed", "12", "--out", &s]);
    let p = read_dist(Path::new(&z)).unwrap();
    let counts = item_counts(500, read_stream(Path::new(&s)).unwrap().items(Target::P));
    let stat: f64 = counts
        .iter()
        .zip(p.probs())
        .map(|(&c, &x)| {
            let e = x * 1e6;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let crit = ChiSquared::new(499.0).unwrap().inverse_cdf(1.0 - 1e-4);
    assert!(stat < crit, "{stat} >= {crit}");
}

#[test]
fn gen_stream_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let z = path(&dir, "z.dist");
    ok(&["gen-dist", "--kind", "zipf", "--n", "50", "--out", &z]);
    let args = ["gen-stream", "--dist", &z, "--dist-q", &z, "--m", "500", "--m-q", "300", "--order", "shuffled", "--seed", "8"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    assert_eq!(a.lines().filter(|l| l.starts_with('Q')).count(), 300);
}

#[test]
fn run_examples() {
    let dir = tempfile::tempdir().unwrap();
    let u = path(&dir, "u.dist");
    ok(&["gen-dist", "--kind", "uniform", "--n", "16", "--out", &u]);
    assert_eq!(ok(&["exact", "--dist", &u]).trim(), "4");
    let r = report(&["run", "exact", "--dist", &u]);
    assert_eq!(r.estimate, Some(4.0));
    let r = report(&["run", "combined-entropy", "--dist", &u, "--eps", "0.1", "--set", "lb=1"]);
    assert_eq!(r.estimate, Some(4.0));
    assert!(r.calls.samples_p > 0);

    let s = path(&dir, "u.stream");
    ok(&["gen-stream", "--dist", &u, "--m", "4000", "--out", &s]);
    let r = report(&["run", "f0-entropy", "--stream", &s]);
    assert!(r.details["sandwich"].is_array());
    assert!(r.details["raw"].is_number());
    assert!(r.space_words.is_some());
}

#[test]
fn run_is_reproducible_except_timing() {
    let dir = tempfile::tempdir().unwrap();
    let z = path(&dir, "z.dist");
    let u = path(&dir, "u.dist");
    ok(&["gen-dist", "--kind", "zipf", "--n", "64", "--out", &z]);
    ok(&["gen-dist", "--kind", "uniform", "--n", "64", "--out", &u]);
    for algo in ["delta-test", "combined-distance", "large-small", "random-ptas", "oracle-sim-2p"] {
        let args = [
            "run", algo, "--dist", &z, "--dist-q", &u, "--m", "2000", "--order", "shuffled", "--eps", "0.5",
            "--seed", "31", "--set", "iters=64",
        ];
        assert_eq!(report(&args).without_timing(), report(&args).without_timing(), "{algo}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let u = path(&dir, "u.dist");
    ok(&["gen-dist", "--kind", "uniform", "--n", "8", "--out", &u]);
    let s = path(&dir, "u.stream");
    ok(&["gen-stream", "--dist", &u, "--m", "100", "--out", &s]);
    // As-given stream fed to the one-pass simulation.
    let out = cli(&["run", "oracle-sim-1p", "--stream", &s, "--set", "iters=5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("random-order"));
    assert_eq!(cli(&["run", "random-ptas", "--stream", &s]).status.code(), Some(2));
    assert_eq!(cli(&["run", "nonsense", "--dist", &u]).status.code(), Some(2));
    assert_eq!(cli(&["run", "exact", "--dist", &path(&dir, "missing")]).status.code(), Some(1));
    std::fs::write(path(&dir, "bad.dist"), "#n=2\n0\t0.3\n").unwrap();
    assert_eq!(cli(&["exact", "--dist", &path(&dir, "bad.dist")]).status.code(), Some(2));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "run.cfg");
    std::fs::write(&cfg, "# base\ngen = uniform\nn = 8\niters = 10\n").unwrap();
    let r = report(&["run", "combined-entropy", "--config", &cfg, "--n", "32"]);
    assert_eq!(r.estimate, Some(5.0));
    assert_eq!(r.params.str("n"), Some("32"));
    let r = report(&["run", "combined-entropy", "--config", &cfg, "--set", "n=4"]);
    assert_eq!(r.estimate, Some(2.0));
}

/// Spearman rank correlation (no ties expected).
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn sweep_error_decreases_in_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "sweep.cfg");
    let iters: Vec<String> = (0..12).map(|k| (10u64 << k).to_string()).collect();
    std::fs::write(
        &cfg,
        format!("algo = combined-entropy\ngen = zipf\nn = 1000\ntrials = 40\nseed = 5\naxis.iters = {}\n", iters.join(", ")),
    )
    .unwrap();
    let out = path(&dir, "a.csv");
    ok(&["sweep", "--config", &cfg, "--workers", "2", "--out", &out]);
    let csv_a = std::fs::read_to_string(&out).unwrap();
    ok(&["sweep", "--config", &cfg, "--workers", "1", "--out", &out]);
    assert_eq!(csv_a, std::fs::read_to_string(&out).unwrap());

    let mut rdr = csv::Reader::from_reader(csv_a.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ci, ce) = (col("iters"), col("rel_error"));
    let mut mean = vec![0.0; iters.len()];
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let k = iters.iter().position(|v| v == &rec[ci]).unwrap();
        mean[k] += rec[ce].parse::<f64>().unwrap() / 40.0;
    }
    let xs: Vec<f64> = iters.iter().map(|v| v.parse().unwrap()).collect();
    let rho = spearman(&xs, &mean);
    assert!(rho < -0.8, "rho = {rho}, errors {mean:?}");
}

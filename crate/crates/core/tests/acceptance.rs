//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantity when it holds.
//!
//! Run with `cargo test -p dp-plr --test acceptance -- --nocapture`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dp_plr::baselines::{build_crypte, build_dp_bplus, build_special};
use dp_plr::bench::{run_experiment, ExperimentConfig};
use dp_plr::dpnoise::{laplace_sample, noisy_cfc, ZeroNoise};
use dp_plr::{
    cfc_error_bound, compute_cfc, compute_histogram, fit_plr, generate_column, isotonic_regression,
    postprocess_curve, Distribution, DpPlrIndex, IndexRange, Method, PrivacyParams, SortedColumn,
};

fn column_from_counts(counts: &[u64], rng: &mut ChaCha8Rng) -> SortedColumn {
    let mut keys = Vec::with_capacity(counts.len());
    let mut cursor = 0i64;
    for _ in 0..counts.len() {
        cursor += rng.random_range(1..=5);
        keys.push(cursor);
    }
    let mut tuples = Vec::new();
    for (k, c) in keys.iter().zip(counts) {
        tuples.extend(std::iter::repeat_n(*k, *c as usize));
    }
    SortedColumn::new(keys, tuples).unwrap()
}

fn exact_ranges(col: &SortedColumn) -> Vec<IndexRange> {
    let cfc = compute_cfc(&compute_histogram(col));
    let mut prev = 0u64;
    cfc.values()
        .iter()
        .map(|y| {
            let r = IndexRange { lo: prev, hi: *y as u64 };
            prev = r.hi;
            r
        })
        .collect()
}

/// Criterion 1: with noise disabled, tau = 0 and the pessimism margin
/// removed, build + lookup reproduces the exact index range for every key,
/// exhaustively over N in 1..=64 with 20 random histograms each.
#[test]
fn criterion_01_zero_noise_oracle() {
    let params = PrivacyParams::new(1.0, 0.05, 1.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    for n in 1..=64usize {
        for _ in 0..20 {
            let counts: Vec<u64> = (0..n).map(|_| rng.random_range(0..40)).collect();
            let col = column_from_counts(&counts, &mut rng);
            let idx = DpPlrIndex::build_with_source(&col, &params, &mut ZeroNoise)
                .unwrap()
                .with_z_pad(0.0);
            let truth = exact_ranges(&col);
            for (key, expected) in col.keys().iter().zip(&truth) {
                let got = idx.lookup(*key).unwrap();
                assert_eq!(got, *expected, "N={n} key={key}");
                checked += 1;
            }
        }
    }
    println!("PASS criterion 1: zero-noise oracle equality on {checked} lookups");
}

/// Criterion 2: at N=4096, epsilon=1, the per-point noisy CFC error exceeds
/// the (2 log2 N)^{3/2} sqrt(ln(2/beta)) / epsilon bound with frequency at
/// most beta plus two standard errors, over 1000 seeds x 16 keys.
#[test]
fn criterion_02_cfc_error_bound_frequency() {
    let n = 4096usize;
    let beta = 0.05f64;
    let params = PrivacyParams::new(1.0, beta, 1.0, 0.0).unwrap();
    let bound = cfc_error_bound(&params, n).unwrap();
    let col = generate_column(Distribution::Uniform, n, 100 * n as u64, 2024).unwrap();
    let hist = compute_histogram(&col);
    let exact = compute_cfc(&hist);

    let seeds = 1000u64;
    let keys_per_seed = 16usize;
    let mut exceed = 0usize;
    let mut key_rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = noisy_cfc(&hist, &params, &mut rng).unwrap();
        for _ in 0..keys_per_seed {
            let i = key_rng.random_range(0..n);
            if (noisy.values()[i] - exact.values()[i]).abs() > bound {
                exceed += 1;
            }
        }
    }
    let trials = (seeds as usize * keys_per_seed) as f64;
    let freq = exceed as f64 / trials;
    let allowed = beta + 2.0 * (beta * (1.0 - beta) / trials).sqrt();
    assert!(freq <= allowed, "exceedance {freq:.5} > allowed {allowed:.5}");
    println!(
        "PASS criterion 2: |noisy - exact| > {bound:.2} in {freq:.5} of trials (allowed {allowed:.5})"
    );
}

/// Criterion 3: sums of k i.i.d. Laplace(1) draws exceed 2 sqrt(k ln(1/beta))
/// with frequency at most beta plus three standard errors, for
/// k in {16, 256, 4096} over 1e5 trials each.
#[test]
fn criterion_03_laplace_sum_tail() {
    let beta = 0.05f64;
    let trials = 100_000usize;
    let allowed = beta + 3.0 * (beta * (1.0 - beta) / trials as f64).sqrt();
    for (salt, k) in [16usize, 256, 4096].into_iter().enumerate() {
        let threshold = 2.0 * (k as f64 * (1.0 / beta).ln()).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + salt as u64);
        let mut exceed = 0usize;
        for _ in 0..trials {
            let mut sum = 0.0;
            for _ in 0..k {
                sum += laplace_sample(1.0, &mut rng).unwrap();
            }
            if sum >= threshold {
                exceed += 1;
            }
        }
        let freq = exceed as f64 / trials as f64;
        assert!(freq <= allowed, "k={k}: exceedance {freq:.5} > allowed {allowed:.5}");
        println!(
            "PASS criterion 3 (k={k}): sum tail frequency {freq:.5} <= {allowed:.5} at threshold {threshold:.2}"
        );
    }
}

/// Criterion 4: with the default pessimism multiplier sqrt(ln(2/beta)),
/// lookups have zero query error in at least 94% of 16,000 (seed, key)
/// trials at N=4096, epsilon=1.
#[test]
fn criterion_04_nearly_lossless() {
    let cfg = ExperimentConfig {
        methods: vec![Method::DpPlr],
        n_keys: vec![4096],
        tuples_per_key: 100,
        epsilons: vec![1.0],
        seeds: 1000,
        keys_per_seed: 16,
        ..ExperimentConfig::default()
    };
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 16_000);
    let zero = records.iter().filter(|r| r.query_error == 0).count();
    let fraction = zero as f64 / records.len() as f64;
    assert!(fraction >= 0.94, "zero-error fraction {fraction:.4} < 0.94");
    println!("PASS criterion 4: zero query error in {fraction:.4} of 16000 trials (>= 0.94)");
}

/// Criterion 5: the paired one-sided curves never miss a tuple, in any
/// trial, at any scale tested.
#[test]
fn criterion_05_special_losslessness() {
    let cfg = ExperimentConfig {
        methods: vec![Method::Special],
        n_keys: vec![1024, 4096],
        tuples_per_key: 100,
        epsilons: vec![0.5, 1.0],
        seeds: 300,
        keys_per_seed: 8,
        ..ExperimentConfig::default()
    };
    let records = run_experiment(&cfg).unwrap();
    assert!(!records.is_empty());
    for r in &records {
        assert_eq!(
            r.query_error, 0,
            "lossy special lookup at N={} epsilon={} seed={} key={}",
            r.n_keys, r.epsilon, r.seed, r.key
        );
    }
    println!(
        "PASS criterion 5: zero query error in 100% of {} special trials",
        records.len()
    );
}

/// Criterion 6: at N=2^14, epsilon=1, the mean query overhead of the learned
/// index is at least 10x below both per-point-noise baselines.
#[test]
fn criterion_06_overhead_ordering() {
    let cfg = ExperimentConfig {
        methods: vec![Method::DpPlr, Method::Crypte, Method::Special],
        n_keys: vec![1 << 14],
        tuples_per_key: 100,
        epsilons: vec![1.0],
        seeds: 100,
        keys_per_seed: 8,
        ..ExperimentConfig::default()
    };
    let records = run_experiment(&cfg).unwrap();
    let mean = |m: Method| {
        let (sum, count) = records
            .iter()
            .filter(|r| r.method == m)
            .fold((0u64, 0u64), |(s, c), r| (s + r.query_overhead, c + 1));
        sum as f64 / count as f64
    };
    let dp_plr = mean(Method::DpPlr);
    let crypte = mean(Method::Crypte);
    let special = mean(Method::Special);
    assert!(
        dp_plr * 10.0 < crypte,
        "dp_plr {dp_plr:.1} not 10x below crypte {crypte:.1}"
    );
    assert!(
        dp_plr * 10.0 < special,
        "dp_plr {dp_plr:.1} not 10x below special {special:.1}"
    );
    println!(
        "PASS criterion 6: mean overhead dp_plr {dp_plr:.1} vs crypte {crypte:.1} ({:.1}x) and special {special:.1} ({:.1}x)",
        crypte / dp_plr,
        special / dp_plr
    );
}

/// Criterion 7: storage accounting matches the per-method formulas, and the
/// learned index stays compact (M < N/8) on the uniform workload at N=2^14
/// with tau at half the curve error bound.
#[test]
fn criterion_07_storage_accounting() {
    let n = 1024usize;
    let col = generate_column(Distribution::Uniform, n, 100 * n as u64, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let bplus = build_dp_bplus(&col, 1.0, 4, &mut rng).unwrap();
    assert_eq!(bplus.index_size_bits(), 64 * (2 * n as u64 - 1));
    let crypte = build_crypte(&col, 1.0, &mut rng).unwrap();
    assert_eq!(crypte.index_size_bits(), 64 * n as u64);
    let special = build_special(&col, 1.0, 1.0, &mut rng).unwrap();
    assert_eq!(special.index_size_bits(), 128 * n as u64);

    let big_n = 1usize << 14;
    let big = generate_column(Distribution::Uniform, big_n, 100 * big_n as u64, 7).unwrap();
    let beta = 0.05;
    let alpha_s = (2.0f64 / beta).ln().sqrt();
    let probe = PrivacyParams::new(1.0, beta, alpha_s, 0.0).unwrap();
    let tau = cfc_error_bound(&probe, big_n).unwrap() / 2.0;
    let params = PrivacyParams::new(1.0, beta, alpha_s, tau).unwrap();
    let idx = DpPlrIndex::build(&big, &params, &mut rng).unwrap();
    let m = idx.model().n_segments();
    assert_eq!(idx.index_size_bits(), 128 * m as u64);
    assert!(m < big_n / 8, "M = {m} is not below N/8 = {}", big_n / 8);
    println!(
        "PASS criterion 7: sizes 64(2N-1)/64N/128N/128M verified; M = {m} at N = {big_n} (N/8 = {})",
        big_n / 8
    );
}

/// Criterion 8: every fitted model stays within tau of its training curve,
/// replayed point by point across a grid of builds.
#[test]
fn criterion_08_plr_tau_guarantee() {
    let beta = 0.05f64;
    let mut violations = 0usize;
    let mut fits = 0usize;
    for dist in [Distribution::Uniform, Distribution::Lognormal, Distribution::Zipf] {
        for n in [1024usize, 4096] {
            for epsilon in [0.5, 1.0, 2.0] {
                let col = generate_column(dist, n, 100 * n as u64, 8).unwrap();
                let hist = compute_histogram(&col);
                let params = PrivacyParams::with_default_pessimism(epsilon, beta, 0.0).unwrap();
                let tau = cfc_error_bound(&params, n).unwrap() / 2.0;
                for seed in 0..10u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let noisy = noisy_cfc(&hist, &params, &mut rng).unwrap();
                    let post = postprocess_curve(&noisy, col.total()).unwrap();
                    let model = fit_plr(&post, tau).unwrap();
                    assert!(model.e_max() <= tau);
                    for (key, y) in post.keys().iter().zip(post.values()) {
                        if (model.predict(*key).unwrap() - y).abs() > tau {
                            violations += 1;
                        }
                    }
                    fits += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0, "tau violations across {fits} fits");
    println!("PASS criterion 8: zero tau violations across {fits} fits");
}

/// Constrained least squares by enumerating every consecutive-block
/// partition with non-decreasing block means.
fn isotonic_exhaustive(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut best_sse = f64::INFINITY;
    let mut best = values.to_vec();
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut means = Vec::new();
        let mut start = 0usize;
        for end in 0..n {
            if end == n - 1 || mask & (1 << end) != 0 {
                let block = &values[start..=end];
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                means.push(mean);
                fit.extend(std::iter::repeat_n(mean, block.len()));
                start = end + 1;
            }
        }
        if means.windows(2).any(|w| w[1] < w[0]) {
            continue;
        }
        let sse: f64 = fit.iter().zip(values).map(|(f, v)| (f - v) * (f - v)).sum();
        if sse < best_sse {
            best_sse = sse;
            best = fit;
        }
    }
    best
}

/// Criterion 9: pool-adjacent-violators matches exhaustive constrained
/// least squares on every input of length <= 6 over a 4-value alphabet.
#[test]
fn criterion_09_pava_oracle() {
    let alphabet = [0.0f64, 1.0, 2.0, 3.0];
    let mut checked = 0usize;
    for len in 1..=6usize {
        let mut input = vec![0usize; len];
        loop {
            let values: Vec<f64> = input.iter().map(|i| alphabet[*i]).collect();
            let fit = isotonic_regression(&values).unwrap();
            let oracle = isotonic_exhaustive(&values);
            for (a, b) in fit.iter().zip(&oracle) {
                assert!(
                    (a - b).abs() <= 1e-9,
                    "input {values:?}: fit {fit:?} vs oracle {oracle:?}"
                );
            }
            checked += 1;
            // Odometer over the alphabet.
            let mut pos = 0;
            loop {
                if pos == len {
                    break;
                }
                input[pos] += 1;
                if input[pos] < alphabet.len() {
                    break;
                }
                input[pos] = 0;
                pos += 1;
            }
            if pos == len {
                break;
            }
        }
    }
    assert_eq!(checked, 4 + 16 + 64 + 256 + 1024 + 4096);
    println!("PASS criterion 9: pool-adjacent-violators matches the oracle on {checked} inputs");
}

/// Criterion 10: every CLI command rerun with identical inputs produces
/// byte-identical output files.
#[test]
fn criterion_10_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_dpplr");
    let base = std::env::temp_dir().join(format!("dpplr-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);

    let run = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        std::fs::create_dir_all(dir).unwrap();
        let sh = |args: &[&str]| {
            let out = std::process::Command::new(bin)
                .args(args)
                .current_dir(dir)
                .output()
                .expect("spawn dpplr");
            assert!(
                out.status.success(),
                "dpplr {args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            out.stdout
        };
        sh(&[
            "gen", "--dist", "zipf", "--n-keys", "512", "--n-tuples", "51200", "--seed", "9",
            "--out", "col.json",
        ]);
        sh(&[
            "build", "--column", "col.json", "--epsilon", "1", "--seed", "5", "--out", "idx.json",
        ]);
        let col: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("col.json")).unwrap()).unwrap();
        let key = col["keys"][31].as_i64().unwrap().to_string();
        let lookup_stdout = sh(&["lookup", "--index", "idx.json", "--key", &key]);
        let config = serde_json::json!({
            "methods": ["dp_plr", "dp_bplus", "crypte", "special"],
            "n_keys": [256],
            "tuples_per_key": 50,
            "epsilons": [1.0],
            "beta": 0.05,
            "seeds": 30,
            "keys_per_seed": 4,
            "distribution": "uniform",
            "base_seed": 42,
            "tau_fraction": 0.5,
            "mu": 1.0
        });
        std::fs::write(dir.join("cfg.json"), serde_json::to_string_pretty(&config).unwrap())
            .unwrap();
        sh(&[
            "bench", "--config", "cfg.json", "--csv", "report.csv", "--json", "report.json",
        ]);
        let check_stdout = sh(&["check", "--report", "report.json"]);

        let mut outputs = vec![
            ("lookup.stdout".to_string(), lookup_stdout),
            ("check.stdout".to_string(), check_stdout),
        ];
        for name in ["col.json", "idx.json", "report.csv", "report.json"] {
            outputs.push((name.to_string(), std::fs::read(dir.join(name)).unwrap()));
        }
        outputs
    };

    let first = run(&base.join("a"));
    let second = run(&base.join("b"));
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "{name_a} differs between identical reruns"
        );
    }
    std::fs::remove_dir_all(&base).unwrap();
    println!(
        "PASS criterion 10: {} outputs byte-identical across reruns",
        first.len()
    );
}

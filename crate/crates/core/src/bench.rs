//! Experiment runner: builds every configured index over synthetic columns,
//! samples lookups, records the four comparison metrics, and checks the
//! empirical exceedance frequency of each formal bound.
//!
//! Everything is keyed off an explicit base seed. Trial streams are derived
//! per (method, cell, seed, purpose), so any record is reproducible in
//! isolation and reruns are byte-identical.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_crypte, build_dp_bplus, build_special};
use crate::cfc::{compute_cfc, compute_histogram, generate_column, Distribution, SortedColumn};
use crate::dpnoise::{cfc_error_bound, tree_levels, PrivacyParams};
use crate::envelope::{AnyIndex, LookupOutcome, Method};
use crate::error::{Error, Result};
use crate::index::{z_pad_for, DpPlrIndex, IndexRange};

/// Grid of experiment cells plus the knobs shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub n_keys: Vec<usize>,
    /// |D| = tuples_per_key * N for each configured N.
    pub tuples_per_key: u64,
    pub epsilons: Vec<f64>,
    pub beta: f64,
    /// Independent builds per cell.
    pub seeds: u64,
    /// Uniformly sampled query keys per build.
    pub keys_per_seed: usize,
    pub distribution: Distribution,
    pub base_seed: u64,
    /// tau = tau_fraction * cfc_error_bound for the cell.
    pub tau_fraction: f64,
    /// Pessimism multiplier; defaults to sqrt(ln(2/beta)) when absent.
    #[serde(default)]
    pub alpha_s: Option<f64>,
    /// Overflow dummies per leaf; defaults to 2 (L/eps) ln(1/beta) rounded.
    #[serde(default)]
    pub overflow_b: Option<u64>,
    /// One-sided shift for the paired-curve baseline.
    pub mu: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            n_keys: vec![1 << 10, 1 << 12, 1 << 14],
            tuples_per_key: 100,
            epsilons: vec![0.5, 1.0, 2.0],
            beta: 0.05,
            seeds: 1000,
            keys_per_seed: 4,
            distribution: Distribution::Uniform,
            base_seed: 42,
            tau_fraction: 0.5,
            alpha_s: None,
            overflow_b: None,
            mu: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::InvalidConfig { field: field.to_string(), reason: reason.to_string() })
        };
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required");
        }
        if self.n_keys.is_empty() || self.n_keys.iter().any(|n| *n < 2) {
            return bad("n_keys", "every N must be at least 2");
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilons", "every epsilon must be positive and finite");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", "must lie in (0, 1)");
        }
        if self.seeds == 0 {
            return bad("seeds", "at least one seed is required");
        }
        if self.keys_per_seed == 0 {
            return bad("keys_per_seed", "at least one key per seed is required");
        }
        if !(self.tau_fraction >= 0.0 && self.tau_fraction.is_finite()) {
            return bad("tau_fraction", "must be non-negative and finite");
        }
        if let Some(a) = self.alpha_s {
            if !(a >= 1.0 && a.is_finite()) {
                return bad("alpha_s", "must be at least 1");
            }
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu", "must be non-negative and finite");
        }
        Ok(())
    }
}

/// Parameters resolved for one (N, epsilon) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub n_keys: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub tau: f64,
    pub alpha_s: f64,
    pub overflow_b: u64,
    pub mu: f64,
}

impl CellParams {
    pub fn privacy(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.epsilon, self.beta, self.alpha_s, self.tau)
    }
}

/// Resolves the per-cell tau, pessimism multiplier and overflow size.
pub fn resolve_cell(cfg: &ExperimentConfig, n_keys: usize, epsilon: f64) -> Result<CellParams> {
    let alpha_s = cfg
        .alpha_s
        .unwrap_or_else(|| (2.0 / cfg.beta).ln().sqrt().max(1.0));
    let probe = PrivacyParams::new(epsilon, cfg.beta, alpha_s, 0.0)?;
    let tau = cfg.tau_fraction * cfc_error_bound(&probe, n_keys)?;
    let levels = tree_levels(n_keys) as f64;
    let overflow_b = cfg
        .overflow_b
        .unwrap_or_else(|| (2.0 * levels / epsilon * (1.0 / cfg.beta).ln()).round() as u64);
    Ok(CellParams {
        n_keys,
        epsilon,
        beta: cfg.beta,
        tau,
        alpha_s,
        overflow_b,
        mu: cfg.mu,
    })
}

/// One index lookup measured against ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub seed: u64,
    pub n_keys: usize,
    pub n_tuples: u64,
    pub epsilon: f64,
    pub key: i64,
    pub tau: f64,
    pub alpha_s: f64,
    pub overflow_b: u64,
    pub mu: f64,
    pub query_error: u64,
    pub query_overhead: u64,
    pub index_size_bits: u64,
    pub data_overhead: u64,
    /// Lookup latency; measured, never serialized, ignored by equality.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for TrialRecord {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.seed == other.seed
            && self.n_keys == other.n_keys
            && self.n_tuples == other.n_tuples
            && self.epsilon == other.epsilon
            && self.key == other.key
            && self.tau == other.tau
            && self.alpha_s == other.alpha_s
            && self.overflow_b == other.overflow_b
            && self.mu == other.mu
            && self.query_error == other.query_error
            && self.query_overhead == other.query_overhead
            && self.index_size_bits == other.index_size_bits
            && self.data_overhead == other.data_overhead
    }
}

/// Missing and irrelevant tuple counts for a range lookup:
/// |Idx \ PIdx| and |PIdx \ Idx|.
pub(crate) fn range_metrics(truth: &IndexRange, got: &IndexRange) -> (u64, u64) {
    (truth.difference(got), got.difference(truth))
}

const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(h: u64, v: u64) -> u64 {
    splitmix64(h ^ v.wrapping_mul(SPLITMIX_GAMMA))
}

/// Stream roles so builds and key sampling never share draws.
#[derive(Clone, Copy)]
enum StreamRole {
    Build = 1,
    Keys = 2,
    Column = 3,
}

fn derived_rng(
    base_seed: u64,
    method: Method,
    n_keys: usize,
    eps_bits: u64,
    seed: u64,
    role: StreamRole,
) -> ChaCha8Rng {
    let mut h = splitmix64(base_seed);
    h = mix(h, method as u64 + 1);
    h = mix(h, n_keys as u64);
    h = mix(h, eps_bits);
    h = mix(h, seed);
    h = mix(h, role as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(h);
    rng
}

/// Builds one index for a cell with the given stream.
pub fn build_index(
    method: Method,
    col: &SortedColumn,
    cell: &CellParams,
    rng: &mut ChaCha8Rng,
) -> Result<AnyIndex> {
    Ok(match method {
        Method::DpPlr => AnyIndex::DpPlr(DpPlrIndex::build(col, &cell.privacy()?, rng)?),
        Method::DpBplus => {
            AnyIndex::DpBplus(build_dp_bplus(col, cell.epsilon, cell.overflow_b, rng)?)
        }
        Method::Crypte => AnyIndex::Crypte(build_crypte(col, cell.epsilon, rng)?),
        Method::Special => AnyIndex::Special(build_special(col, cell.epsilon, cell.mu, rng)?),
    })
}

struct GroundTruth {
    col: SortedColumn,
    counts: Vec<u64>,
    truth_ranges: Vec<IndexRange>,
}

fn ground_truth(cfg: &ExperimentConfig, n_keys: usize) -> Result<GroundTruth> {
    let column_seed = {
        let h = splitmix64(cfg.base_seed);
        let h = mix(h, n_keys as u64);
        mix(h, StreamRole::Column as u64)
    };
    let col = generate_column(
        cfg.distribution,
        n_keys,
        cfg.tuples_per_key * n_keys as u64,
        column_seed,
    )?;
    let hist = compute_histogram(&col);
    let cfc = compute_cfc(&hist);
    let mut prev = 0u64;
    let truth_ranges = cfc
        .values()
        .iter()
        .map(|y| {
            let r = IndexRange { lo: prev, hi: *y as u64 };
            prev = r.hi;
            r
        })
        .collect();
    Ok(GroundTruth { col, counts: hist.counts().to_vec(), truth_ranges })
}

/// Runs the full grid. One record per (method, cell, seed, sampled key),
/// deterministic for a fixed config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    for n_keys in &cfg.n_keys {
        let truth = ground_truth(cfg, *n_keys)?;
        let n_tuples = truth.col.total();
        for epsilon in &cfg.epsilons {
            let cell = resolve_cell(cfg, *n_keys, *epsilon)?;
            for method in &cfg.methods {
                for seed in 0..cfg.seeds {
                    let mut build_rng = derived_rng(
                        cfg.base_seed,
                        *method,
                        *n_keys,
                        epsilon.to_bits(),
                        seed,
                        StreamRole::Build,
                    );
                    let index = build_index(*method, &truth.col, &cell, &mut build_rng)?;
                    let mut key_rng = derived_rng(
                        cfg.base_seed,
                        *method,
                        *n_keys,
                        epsilon.to_bits(),
                        seed,
                        StreamRole::Keys,
                    );
                    let size_bits = index.index_size_bits();
                    let data_overhead = match &index {
                        AnyIndex::DpBplus(idx) => idx.data_overhead().round() as u64,
                        _ => 0,
                    };
                    for _ in 0..cfg.keys_per_seed {
                        let pos = key_rng.random_range(0..*n_keys);
                        let key = truth.col.keys()[pos];
                        let started = Instant::now();
                        let outcome = index.lookup(key)?;
                        let wall_time = started.elapsed();
                        let (query_error, query_overhead) = match outcome {
                            LookupOutcome::Range(got) => {
                                range_metrics(&truth.truth_ranges[pos], &got)
                            }
                            LookupOutcome::Count(returned) => {
                                let true_count = truth.counts[pos];
                                (
                                    true_count.saturating_sub(returned),
                                    returned.saturating_sub(true_count),
                                )
                            }
                        };
                        records.push(TrialRecord {
                            method: *method,
                            seed,
                            n_keys: *n_keys,
                            n_tuples,
                            epsilon: *epsilon,
                            key,
                            tau: cell.tau,
                            alpha_s: cell.alpha_s,
                            overflow_b: cell.overflow_b,
                            mu: cell.mu,
                            query_error,
                            query_overhead,
                            index_size_bits: size_bits,
                            data_overhead,
                            wall_time,
                        });
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Verdict for one formal bound on one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub method: Method,
    pub metric: String,
    pub n_keys: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub bound: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub exceedance_freq: f64,
    pub allowed_freq: f64,
    pub pass: bool,
}

const MIN_TRIALS_PER_CELL: usize = 100;

#[allow(clippy::too_many_arguments)]
fn make_check(
    method: Method,
    metric: &str,
    n_keys: usize,
    epsilon: f64,
    beta: f64,
    bound: f64,
    values: impl Iterator<Item = f64>,
    hard_zero: bool,
) -> BoundCheck {
    let mut trials = 0usize;
    let mut exceedances = 0usize;
    for v in values {
        trials += 1;
        if v > bound {
            exceedances += 1;
        }
    }
    let exceedance_freq = exceedances as f64 / trials as f64;
    let allowed_freq = if hard_zero {
        0.0
    } else {
        beta + 2.0 * (beta * (1.0 - beta) / trials as f64).sqrt()
    };
    BoundCheck {
        method,
        metric: metric.to_string(),
        n_keys,
        epsilon,
        beta,
        bound,
        trials,
        exceedances,
        exceedance_freq,
        allowed_freq,
        pass: exceedance_freq <= allowed_freq,
    }
}

/// Evaluates every applicable bound formula against the empirical
/// exceedance frequencies, cell by cell.
pub fn check_bounds(records: &[TrialRecord], beta: f64) -> Result<Vec<BoundCheck>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid_parameter("beta", "must lie in (0, 1)"));
    }
    let mut cells: BTreeMap<(usize, u64, u8), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let method_rank = Method::ALL
            .iter()
            .position(|m| *m == r.method)
            .expect("method enum is closed") as u8;
        cells
            .entry((r.n_keys, r.epsilon.to_bits(), method_rank))
            .or_default()
            .push(r);
    }

    let mut checks = Vec::new();
    for ((n_keys, eps_bits, _), cell) in &cells {
        let epsilon = f64::from_bits(*eps_bits);
        let method = cell[0].method;
        if cell.len() < MIN_TRIALS_PER_CELL {
            return Err(Error::InsufficientTrials {
                cell: format!("{method} N={n_keys} epsilon={epsilon}"),
                got: cell.len(),
                min: MIN_TRIALS_PER_CELL,
            });
        }
        let tau = cell[0].tau;
        let alpha_s = cell[0].alpha_s;
        let overflow_b = cell[0].overflow_b;
        let mu = cell[0].mu;
        if cell.iter().any(|r| {
            r.tau != tau || r.alpha_s != alpha_s || r.overflow_b != overflow_b || r.mu != mu
        }) {
            return Err(Error::MalformedFile {
                what: "trial records",
                reason: format!(
                    "cell {method} N={n_keys} epsilon={epsilon} mixes build parameters"
                ),
            });
        }

        let n = *n_keys as f64;
        let levels = tree_levels(*n_keys) as f64;
        let ln2b = (2.0 / beta).ln();
        let errors = || cell.iter().map(|r| r.query_error as f64);
        let overheads = || cell.iter().map(|r| r.query_overhead as f64);
        match method {
            Method::DpPlr => {
                let probe = PrivacyParams::new(epsilon, beta, alpha_s, tau)?;
                let cfc_bound = cfc_error_bound(&probe, *n_keys)?;
                let z = z_pad_for(&probe, *n_keys);
                checks.push(make_check(
                    method,
                    "query_error",
                    *n_keys,
                    epsilon,
                    beta,
                    (cfc_bound - z).max(0.0),
                    errors(),
                    false,
                ));
                // Rounding outward costs at most one position per endpoint.
                checks.push(make_check(
                    method,
                    "query_overhead",
                    *n_keys,
                    epsilon,
                    beta,
                    cfc_bound + 2.0 * z + 2.0 * tau + 2.0,
                    overheads(),
                    false,
                ));
            }
            Method::DpBplus => {
                let base = levels / epsilon * ln2b;
                checks.push(make_check(
                    method,
                    "query_error",
                    *n_keys,
                    epsilon,
                    beta,
                    (base - overflow_b as f64).max(0.0),
                    errors(),
                    false,
                ));
                checks.push(make_check(
                    method,
                    "query_overhead",
                    *n_keys,
                    epsilon,
                    beta,
                    base + overflow_b as f64,
                    overheads(),
                    false,
                ));
                checks.push(make_check(
                    method,
                    "data_overhead",
                    *n_keys,
                    epsilon,
                    beta,
                    n * overflow_b as f64 + 2.0 * levels / epsilon * (n * ln2b).sqrt(),
                    cell.iter().map(|r| r.data_overhead as f64),
                    false,
                ));
            }
            Method::Crypte => {
                let bound = 2.0 * n / epsilon * ln2b;
                checks.push(make_check(
                    method, "query_error", *n_keys, epsilon, beta, bound, errors(), false,
                ));
                checks.push(make_check(
                    method, "query_overhead", *n_keys, epsilon, beta, bound, overheads(), false,
                ));
            }
            Method::Special => {
                checks.push(make_check(
                    method,
                    "query_error",
                    *n_keys,
                    epsilon,
                    beta,
                    0.0,
                    errors(),
                    true,
                ));
                checks.push(make_check(
                    method,
                    "query_overhead",
                    *n_keys,
                    epsilon,
                    beta,
                    4.0 * n / epsilon * (1.0 / beta).ln() + mu,
                    overheads(),
                    false,
                ));
            }
        }
    }
    Ok(checks)
}

//! The three comparison private indexes, modeled at the accounting level
//! the metric harness measures.
//!
//! The B+ tree variant keeps one noisy tuple count per leaf (true count
//! plus a fixed overflow of dummies plus Laplace noise, floored at zero)
//! and 2N-1 nodes of storage. The per-point noisy curve releases one
//! independent Laplace draw per key. The paired one-sided curves
//! overestimate and underestimate the exact curve deterministically, which
//! trades pure epsilon-DP for lossless lookups.

use rand::Rng;

use crate::cfc::{compute_cfc, compute_histogram, SortedColumn};
use crate::dpnoise::{tree_levels, LaplaceNoise, NoiseSource};
use crate::error::{Error, Result};
use crate::index::IndexRange;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid_parameter("epsilon", "must be positive and finite"));
    }
    Ok(())
}

/// Noisy-leaf B+ tree model: per-key stored counts and the dummy-tuple
/// overhead accumulated while populating the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct DpBPlusIndex {
    keys: Vec<i64>,
    leaf_counts: Vec<f64>,
    overflow: u64,
    data_overhead: f64,
    epsilon: f64,
    total: u64,
}

pub(crate) fn build_dp_bplus_impl<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    overflow: u64,
    source: &mut S,
) -> Result<DpBPlusIndex> {
    check_epsilon(epsilon)?;
    let hist = compute_histogram(col);
    let scale = tree_levels(col.n_keys()) as f64 / epsilon;
    let mut leaf_counts = Vec::with_capacity(col.n_keys());
    let mut data_overhead = 0.0;
    for c in hist.counts() {
        let z = source.draw(scale);
        let adjustment = overflow as f64 + z;
        leaf_counts.push((*c as f64 + adjustment).max(0.0));
        data_overhead += adjustment.max(0.0);
    }
    Ok(DpBPlusIndex {
        keys: col.keys().to_vec(),
        leaf_counts,
        overflow,
        data_overhead,
        epsilon,
        total: col.total(),
    })
}

/// Builds the noisy-leaf B+ tree: each leaf count gains `overflow` dummies
/// plus one Laplace(ceil(log2 N)/epsilon) draw and is floored at zero.
pub fn build_dp_bplus<R: Rng>(
    col: &SortedColumn,
    epsilon: f64,
    overflow: u64,
    rng: &mut R,
) -> Result<DpBPlusIndex> {
    build_dp_bplus_impl(col, epsilon, overflow, &mut LaplaceNoise::new(rng))
}

/// Same build with a caller-supplied noise source; test builds only.
#[cfg(feature = "test-hooks")]
pub fn build_dp_bplus_with_source<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    overflow: u64,
    source: &mut S,
) -> Result<DpBPlusIndex> {
    build_dp_bplus_impl(col, epsilon, overflow, source)
}

impl DpBPlusIndex {
    /// Number of tuples the leaf for `x` hands back, rounded to a whole
    /// count at lookup time.
    pub fn lookup(&self, x: i64) -> Result<u64> {
        let pos = self.keys.binary_search(&x).map_err(|_| Error::KeyNotFound(x))?;
        Ok(self.leaf_counts[pos].round() as u64)
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Dummy tuples injected while populating the leaves.
    pub fn data_overhead(&self) -> f64 {
        self.data_overhead
    }

    pub fn node_count(&self) -> u64 {
        2 * self.keys.len() as u64 - 1
    }

    /// 64 bits per node over 2N-1 nodes.
    pub fn index_size_bits(&self) -> u64 {
        64 * self.node_count()
    }

    pub(crate) fn leaf_counts(&self) -> &[f64] {
        &self.leaf_counts
    }

    pub(crate) fn from_parts(
        keys: Vec<i64>,
        leaf_counts: Vec<f64>,
        overflow: u64,
        data_overhead: f64,
        epsilon: f64,
        total: u64,
    ) -> Self {
        DpBPlusIndex { keys, leaf_counts, overflow, data_overhead, epsilon, total }
    }
}

/// Per-point noisy curve: one independent Laplace(N/epsilon) draw per key.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCfcIndex {
    keys: Vec<i64>,
    curve: Vec<f64>,
    epsilon: f64,
    total: u64,
}

pub(crate) fn build_crypte_impl<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    source: &mut S,
) -> Result<NoisyCfcIndex> {
    check_epsilon(epsilon)?;
    let exact = compute_cfc(&compute_histogram(col));
    let scale = col.n_keys() as f64 / epsilon;
    let curve = exact.values().iter().map(|y| y + source.draw(scale)).collect();
    Ok(NoisyCfcIndex {
        keys: col.keys().to_vec(),
        curve,
        epsilon,
        total: col.total(),
    })
}

pub fn build_crypte<R: Rng>(col: &SortedColumn, epsilon: f64, rng: &mut R) -> Result<NoisyCfcIndex> {
    build_crypte_impl(col, epsilon, &mut LaplaceNoise::new(rng))
}

/// Same build with a caller-supplied noise source; test builds only.
#[cfg(feature = "test-hooks")]
pub fn build_crypte_with_source<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    source: &mut S,
) -> Result<NoisyCfcIndex> {
    build_crypte_impl(col, epsilon, source)
}

impl NoisyCfcIndex {
    /// [round(y~_{i-1}), round(y~_i)) clamped into [0, total]; an inverted
    /// pair collapses to the empty range at its upper endpoint.
    pub fn lookup(&self, x: i64) -> Result<IndexRange> {
        let pos = self.keys.binary_search(&x).map_err(|_| Error::KeyNotFound(x))?;
        let total = self.total as f64;
        let hi = self.curve[pos].round().clamp(0.0, total) as u64;
        let lo = if pos == 0 {
            0
        } else {
            self.curve[pos - 1].round().clamp(0.0, total) as u64
        };
        if lo > hi {
            return Ok(IndexRange { lo: hi, hi });
        }
        Ok(IndexRange { lo, hi })
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// One 64-bit noisy value per key.
    pub fn index_size_bits(&self) -> u64 {
        64 * self.keys.len() as u64
    }

    pub(crate) fn curve(&self) -> &[f64] {
        &self.curve
    }

    pub(crate) fn from_parts(keys: Vec<i64>, curve: Vec<f64>, epsilon: f64, total: u64) -> Self {
        NoisyCfcIndex { keys, curve, epsilon, total }
    }
}

/// Paired one-sided curves: the over-curve adds |Laplace(2N/epsilon)| + mu,
/// the under-curve subtracts it, so the exact curve always sits between.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialIndex {
    keys: Vec<i64>,
    over: Vec<f64>,
    under: Vec<f64>,
    mu: f64,
    epsilon: f64,
    total: u64,
}

pub(crate) fn build_special_impl<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    mu: f64,
    source: &mut S,
) -> Result<SpecialIndex> {
    check_epsilon(epsilon)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::invalid_parameter("mu", "must be non-negative and finite"));
    }
    let exact = compute_cfc(&compute_histogram(col));
    // Each curve consumes half the budget.
    let scale = 2.0 * col.n_keys() as f64 / epsilon;
    let mut over = Vec::with_capacity(col.n_keys());
    let mut under = Vec::with_capacity(col.n_keys());
    for y in exact.values() {
        over.push(y + source.draw(scale).abs() + mu);
        under.push(y - source.draw(scale).abs() - mu);
    }
    Ok(SpecialIndex {
        keys: col.keys().to_vec(),
        over,
        under,
        mu,
        epsilon,
        total: col.total(),
    })
}

pub fn build_special<R: Rng>(
    col: &SortedColumn,
    epsilon: f64,
    mu: f64,
    rng: &mut R,
) -> Result<SpecialIndex> {
    build_special_impl(col, epsilon, mu, &mut LaplaceNoise::new(rng))
}

/// Same build with a caller-supplied noise source; test builds only.
#[cfg(feature = "test-hooks")]
pub fn build_special_with_source<S: NoiseSource>(
    col: &SortedColumn,
    epsilon: f64,
    mu: f64,
    source: &mut S,
) -> Result<SpecialIndex> {
    build_special_impl(col, epsilon, mu, source)
}

impl SpecialIndex {
    /// Lower endpoint from the under-curve, upper from the over-curve, so
    /// the true range is always covered.
    pub fn lookup(&self, x: i64) -> Result<IndexRange> {
        let pos = self.keys.binary_search(&x).map_err(|_| Error::KeyNotFound(x))?;
        let total = self.total as f64;
        let hi = self.over[pos].round().clamp(0.0, total) as u64;
        let lo = if pos == 0 {
            0
        } else {
            self.under[pos - 1].round().clamp(0.0, total) as u64
        };
        Ok(IndexRange { lo: lo.min(hi), hi })
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Two 64-bit values per key, one per curve.
    pub fn index_size_bits(&self) -> u64 {
        128 * self.keys.len() as u64
    }

    pub(crate) fn curves(&self) -> (&[f64], &[f64]) {
        (&self.over, &self.under)
    }

    pub(crate) fn from_parts(
        keys: Vec<i64>,
        over: Vec<f64>,
        under: Vec<f64>,
        mu: f64,
        epsilon: f64,
        total: u64,
    ) -> Self {
        SpecialIndex { keys, over, under, mu, epsilon, total }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfc::{generate_column, Distribution};
    use crate::dpnoise::ZeroNoise;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Forced(Vec<f64>);

    impl NoiseSource for Forced {
        fn draw(&mut self, _scale: f64) -> f64 {
            self.0.remove(0)
        }
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

    #[test]
    fn bplus_without_noise_is_exact() {
        let col = generate_column(Distribution::Uniform, 32, 3200, 1).unwrap();
        let idx = build_dp_bplus_impl(&col, 1.0, 0, &mut ZeroNoise).unwrap();
        let hist = compute_histogram(&col);
        for (k, c) in col.keys().iter().zip(hist.counts()) {
            assert_eq!(idx.lookup(*k).unwrap(), *c);
        }
        assert_eq!(idx.data_overhead(), 0.0);
    }

    #[test]
    fn bplus_size_accounting() {
        let col = generate_column(Distribution::Uniform, 100, 1000, 2).unwrap();
        let idx = build_dp_bplus_impl(&col, 1.0, 0, &mut ZeroNoise).unwrap();
        assert_eq!(idx.node_count(), 199);
        assert_eq!(idx.index_size_bits(), 64 * 199);
    }

    #[test]
    fn bplus_forced_negative_noise_loses_tuples() {
        let col = SortedColumn::new(vec![1], vec![1; 10]).unwrap();
        let overflow = 2u64;
        // Z = -(B + 3) leaves the leaf three tuples short.
        let mut src = Forced(vec![-(overflow as f64 + 3.0)]);
        let idx = build_dp_bplus_impl(&col, 1.0, overflow, &mut src).unwrap();
        let returned = idx.lookup(1).unwrap();
        let true_count = 10u64;
        assert_eq!(true_count.saturating_sub(returned), 3);
    }

    #[test]
    fn bplus_forced_positive_noise_adds_overhead() {
        let col = SortedColumn::new(vec![1], vec![1; 10]).unwrap();
        let mut src = Forced(vec![4.0]);
        let idx = build_dp_bplus_impl(&col, 1.0, 1, &mut src).unwrap();
        let returned = idx.lookup(1).unwrap();
        assert_eq!(returned - 10, 5);
        assert_eq!(idx.data_overhead(), 5.0);
    }

    #[test]
    fn bplus_error_tail_stays_under_beta() {
        // Error exceeds (L/eps) ln(2/beta) - B with frequency at most beta.
        let n = 256usize;
        let epsilon = 1.0;
        let beta = 0.05f64;
        let levels = tree_levels(n) as f64;
        let overflow = 10u64;
        let bound = levels / epsilon * (2.0 / beta).ln() - overflow as f64;
        let col = generate_column(Distribution::Uniform, n, 100 * n as u64, 3).unwrap();
        let hist = compute_histogram(&col);
        let mut exceed = 0usize;
        let trials = 400usize;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let idx = build_dp_bplus(&col, epsilon, overflow, &mut rng).unwrap();
            let pos = seed % n;
            let true_count = hist.counts()[pos];
            let returned = idx.lookup(col.keys()[pos]).unwrap();
            let error = true_count.saturating_sub(returned) as f64;
            if error > bound {
                exceed += 1;
            }
        }
        let freq = exceed as f64 / trials as f64;
        let slack = 3.0 * (beta * (1.0 - beta) / trials as f64).sqrt();
        assert!(freq <= beta + slack, "error tail frequency {freq}");
    }

    #[test]
    fn bplus_data_overhead_concentrates() {
        // With overflow near its recommended size the floor rarely binds and
        // the total overhead sits within the Laplace-sum spread of N * B.
        let n = 1024usize;
        let epsilon = 1.0;
        let beta = 0.05f64;
        let levels = tree_levels(n) as f64;
        let overflow = (2.0 * levels / epsilon * (1.0 / beta).ln()).round() as u64;
        let spread = 2.0 * levels / epsilon * (n as f64 * (2.0 / beta).ln()).sqrt();
        let col = generate_column(Distribution::Uniform, n, 100 * n as u64, 4).unwrap();
        let trials = 200usize;
        let mut within = 0usize;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed as u64);
            let idx = build_dp_bplus(&col, epsilon, overflow, &mut rng).unwrap();
            let expected = (n as u64 * overflow) as f64;
            if (idx.data_overhead() - expected).abs() <= spread {
                within += 1;
            }
        }
        let freq = within as f64 / trials as f64;
        let slack = 3.0 * (beta * (1.0 - beta) / trials as f64).sqrt();
        assert!(freq >= 1.0 - beta - slack, "within-spread frequency {freq}");
    }

    #[test]
    fn crypte_without_noise_is_exact() {
        let col = generate_column(Distribution::Zipf, 64, 6400, 5).unwrap();
        let idx = build_crypte_impl(&col, 1.0, &mut ZeroNoise).unwrap();
        for (k, expected) in col.keys().iter().zip(exact_ranges(&col)) {
            assert_eq!(idx.lookup(*k).unwrap(), expected);
        }
    }

    #[test]
    fn crypte_inverted_endpoints_collapse_to_empty() {
        let col = SortedColumn::new(vec![1, 2], vec![1, 1, 2, 2, 2]).unwrap();
        // First point pushed above the second: lookup(2) inverts.
        let mut src = Forced(vec![3.0, -1.0]);
        let idx = build_crypte_impl(&col, 1.0, &mut src).unwrap();
        let range = idx.lookup(2).unwrap();
        assert!(range.is_empty());
        let truth = exact_ranges(&col)[1];
        assert_eq!(truth.difference(&range), truth.width(), "full query error");
    }

    #[test]
    fn crypte_size_accounting() {
        let col = generate_column(Distribution::Uniform, 64, 640, 6).unwrap();
        let idx = build_crypte_impl(&col, 1.0, &mut ZeroNoise).unwrap();
        assert_eq!(idx.index_size_bits(), 64 * 64);
    }

    #[test]
    fn crypte_symmetric_noise_eventually_loses_data() {
        let n = 4096usize;
        let col = generate_column(Distribution::Uniform, n, 10 * n as u64, 7).unwrap();
        let truth = exact_ranges(&col);
        let mut lossy = 0usize;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = build_crypte(&col, 1.0, &mut rng).unwrap();
            for (i, k) in col.keys().iter().enumerate().step_by(64) {
                let got = idx.lookup(*k).unwrap();
                if truth[i].difference(&got) > 0 {
                    lossy += 1;
                }
            }
        }
        assert!(lossy > 0, "symmetric noise never lost a tuple across 100 seeds");
    }

    #[test]
    fn special_contains_truth_for_every_seed_and_key() {
        let col = generate_column(Distribution::Lognormal, 128, 12800, 8).unwrap();
        let truth = exact_ranges(&col);
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = build_special(&col, 1.0, 10.0, &mut rng).unwrap();
            for (i, k) in col.keys().iter().enumerate() {
                let got = idx.lookup(*k).unwrap();
                assert!(
                    got.contains_range(&truth[i]),
                    "seed {seed} key {k}: {got} does not cover {}",
                    truth[i]
                );
            }
        }
    }

    #[test]
    fn special_curves_straddle_exact_curve() {
        let col = generate_column(Distribution::Uniform, 64, 6400, 9).unwrap();
        let exact = compute_cfc(&compute_histogram(&col));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = build_special(&col, 1.0, 5.0, &mut rng).unwrap();
        let (over, under) = idx.curves();
        for ((o, u), y) in over.iter().zip(under).zip(exact.values()) {
            assert!(*o >= *y && *y >= *u);
        }
    }

    #[test]
    fn special_without_noise_or_shift_is_exact() {
        let col = generate_column(Distribution::Uniform, 32, 3200, 10).unwrap();
        let idx = build_special_impl(&col, 1.0, 0.0, &mut ZeroNoise).unwrap();
        for (k, expected) in col.keys().iter().zip(exact_ranges(&col)) {
            assert_eq!(idx.lookup(*k).unwrap(), expected);
        }
    }

    #[test]
    fn special_size_accounting() {
        let col = generate_column(Distribution::Uniform, 64, 640, 11).unwrap();
        let idx = build_special_impl(&col, 1.0, 0.0, &mut ZeroNoise).unwrap();
        assert_eq!(idx.index_size_bits(), 128 * 64);
    }

    #[test]
    fn special_overhead_tail_stays_under_beta() {
        // Overhead exceeds (4N/eps) ln(1/beta) + mu with frequency <= beta.
        let n = 256usize;
        let epsilon = 1.0;
        let beta = 0.05f64;
        let mu = 20.0;
        let bound = 4.0 * n as f64 / epsilon * (1.0 / beta).ln() + mu;
        let col = generate_column(Distribution::Uniform, n, 100 * n as u64, 12).unwrap();
        let truth = exact_ranges(&col);
        let trials = 400usize;
        let mut exceed = 0usize;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let idx = build_special(&col, epsilon, mu, &mut rng).unwrap();
            let pos = seed % n;
            let got = idx.lookup(col.keys()[pos]).unwrap();
            let overhead = got.difference(&truth[pos]);
            if overhead as f64 > bound {
                exceed += 1;
            }
        }
        let freq = exceed as f64 / trials as f64;
        let slack = 3.0 * (beta * (1.0 - beta) / trials as f64).sqrt();
        assert!(freq <= beta + slack, "overhead tail frequency {freq}");
    }

    #[test]
    fn builders_validate_parameters() {
        let col = generate_column(Distribution::Uniform, 4, 40, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_dp_bplus(&col, 0.0, 0, &mut rng).is_err());
        assert!(build_crypte(&col, -1.0, &mut rng).is_err());
        assert!(build_special(&col, 1.0, -2.0, &mut rng).is_err());
    }

    #[test]
    fn lookups_reject_unknown_keys() {
        let col = generate_column(Distribution::Uniform, 8, 80, 13).unwrap();
        let absent = col.keys().last().unwrap() + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(build_dp_bplus(&col, 1.0, 0, &mut rng).unwrap().lookup(absent).is_err());
        assert!(build_crypte(&col, 1.0, &mut rng).unwrap().lookup(absent).is_err());
        assert!(build_special(&col, 1.0, 0.0, &mut rng).unwrap().lookup(absent).is_err());
    }
}

//! Columns, histograms and cumulative frequency curves.
//!
//! A [`SortedColumn`] is the ground truth every index in this crate is built
//! from and judged against: a sorted public key domain plus the multiset of
//! per-tuple attribute values. [`compute_histogram`] and [`compute_cfc`]
//! derive the per-key counts and their prefix sums, and [`generate_column`]
//! produces deterministic synthetic workloads for the benchmark harness.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// A database column sorted by its attribute, together with the public key
/// domain. Positions are 0-based and ranges over the tuple array are
/// half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedColumn {
    keys: Vec<i64>,
    tuple_keys: Vec<i64>,
    total: u64,
}

impl SortedColumn {
    /// Builds a column from a distinct, strictly increasing key domain and a
    /// non-decreasing multiset of tuple values drawn from it.
    pub fn new(keys: Vec<i64>, tuple_keys: Vec<i64>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::EmptyInput("key domain"));
        }
        for i in 1..keys.len() {
            if keys[i] <= keys[i - 1] {
                return Err(Error::invalid_column(
                    i,
                    format!("keys must be strictly increasing, got {} after {}", keys[i], keys[i - 1]),
                ));
            }
        }
        for i in 1..tuple_keys.len() {
            if tuple_keys[i] < tuple_keys[i - 1] {
                return Err(Error::invalid_column(
                    i,
                    format!(
                        "tuple keys must be non-decreasing, got {} after {}",
                        tuple_keys[i],
                        tuple_keys[i - 1]
                    ),
                ));
            }
        }
        for (i, t) in tuple_keys.iter().enumerate() {
            if keys.binary_search(t).is_err() {
                return Err(Error::invalid_column(
                    i,
                    format!("tuple key {t} is not part of the key domain"),
                ));
            }
        }
        let total = tuple_keys.len() as u64;
        Ok(SortedColumn { keys, tuple_keys, total })
    }

    /// Loads one tuple key per line, sorts and validates. The key domain is
    /// the set of distinct values present.
    pub fn from_tuple_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut tuples = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: i64 = trimmed.parse().map_err(|_| {
                Error::invalid_column(lineno, format!("line {} is not a 64-bit integer: {trimmed:?}", lineno + 1))
            })?;
            tuples.push(value);
        }
        tuples.sort_unstable();
        let mut keys = tuples.clone();
        keys.dedup();
        SortedColumn::new(keys, tuples)
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn tuple_keys(&self) -> &[i64] {
        &self.tuple_keys
    }

    /// Number of distinct keys N.
    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    /// Tuple count |D|.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Position of `key` in the domain, or a key-not-found error.
    pub fn key_position(&self, key: i64) -> Result<usize> {
        self.keys.binary_search(&key).map_err(|_| Error::KeyNotFound(key))
    }

    /// Serializes as `{keys, counts, total}`.
    pub fn to_json(&self) -> Result<String> {
        let hist = compute_histogram(self);
        let doc = ColumnDoc {
            keys: self.keys.clone(),
            counts: hist.counts,
            total: self.total,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses the `{keys, counts, total}` document, expanding counts back
    /// into the tuple multiset.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ColumnDoc = serde_json::from_str(text)?;
        if doc.counts.len() != doc.keys.len() {
            return Err(Error::invalid_column(
                doc.counts.len().min(doc.keys.len()),
                format!("{} counts for {} keys", doc.counts.len(), doc.keys.len()),
            ));
        }
        let sum: u64 = doc.counts.iter().sum();
        if sum != doc.total {
            return Err(Error::invalid_column(
                doc.counts.len().saturating_sub(1),
                format!("counts sum to {sum} but total says {}", doc.total),
            ));
        }
        let mut tuples = Vec::with_capacity(sum as usize);
        for (k, c) in doc.keys.iter().zip(&doc.counts) {
            tuples.extend(std::iter::repeat_n(*k, *c as usize));
        }
        SortedColumn::new(doc.keys, tuples)
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnDoc {
    keys: Vec<i64>,
    counts: Vec<u64>,
    total: u64,
}

/// Per-key tuple counts aligned with the key domain of the source column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    keys: Vec<i64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(keys: Vec<i64>, counts: Vec<u64>) -> Result<Self> {
        if keys.len() != counts.len() {
            return Err(Error::invalid_column(
                keys.len().min(counts.len()),
                "histogram counts must align with keys".to_string(),
            ));
        }
        if keys.is_empty() {
            return Err(Error::EmptyInput("histogram"));
        }
        Ok(Histogram { keys, counts })
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_keys(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Whether a curve's values are exact prefix sums, raw mechanism output, or
/// the monotone clipped rewrite of a noisy release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Exact,
    Noisy,
    Postprocessed,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::Exact => write!(f, "exact"),
            CurveKind::Noisy => write!(f, "noisy"),
            CurveKind::Postprocessed => write!(f, "postprocessed"),
        }
    }
}

/// An ordered collection of (key, cumulative frequency) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CFCurve {
    keys: Vec<i64>,
    values: Vec<f64>,
    kind: CurveKind,
}

impl CFCurve {
    pub fn new(keys: Vec<i64>, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        if keys.len() != values.len() {
            return Err(Error::invalid_column(
                keys.len().min(values.len()),
                "curve values must align with keys".to_string(),
            ));
        }
        if keys.is_empty() {
            return Err(Error::EmptyInput("curve"));
        }
        Ok(CFCurve { keys, values, kind })
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Counts the multiplicity of every domain key in the tuple multiset.
pub fn compute_histogram(col: &SortedColumn) -> Histogram {
    let mut counts = vec![0u64; col.n_keys()];
    // tuple_keys is sorted and validated against the domain, so a single
    // forward scan aligns runs with key positions.
    let mut pos = 0usize;
    for t in col.tuple_keys() {
        while col.keys()[pos] != *t {
            pos += 1;
        }
        counts[pos] += 1;
    }
    Histogram {
        keys: col.keys().to_vec(),
        counts,
    }
}

/// Exact cumulative frequency curve: y_i is the prefix sum of counts through
/// key i, with CF before the first key implicitly 0.
pub fn compute_cfc(hist: &Histogram) -> CFCurve {
    let mut values = Vec::with_capacity(hist.n_keys());
    let mut acc = 0u64;
    for c in hist.counts() {
        acc += c;
        values.push(acc as f64);
    }
    CFCurve {
        keys: hist.keys().to_vec(),
        values,
        kind: CurveKind::Exact,
    }
}

/// Shape of the synthetic per-key tuple distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    Lognormal,
    Zipf,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "lognormal" => Ok(Distribution::Lognormal),
            "zipf" => Ok(Distribution::Zipf),
            other => Err(Error::invalid_parameter(
                "distribution",
                format!("unknown distribution {other:?}; expected uniform, lognormal or zipf"),
            )),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform => write!(f, "uniform"),
            Distribution::Lognormal => write!(f, "lognormal"),
            Distribution::Zipf => write!(f, "zipf"),
        }
    }
}

/// Deterministic synthetic column: `n_keys` distinct keys with small random
/// gaps, and `n_tuples` tuples assigned to keys by inverse-CDF sampling of
/// the requested distribution. Byte-identical output for identical inputs.
pub fn generate_column(
    dist: Distribution,
    n_keys: usize,
    n_tuples: u64,
    seed: u64,
) -> Result<SortedColumn> {
    if n_keys == 0 {
        return Err(Error::invalid_parameter("n_keys", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut keys = Vec::with_capacity(n_keys);
    let mut cursor = 0i64;
    for _ in 0..n_keys {
        cursor += rng.random_range(1..=8);
        keys.push(cursor);
    }

    // Cumulative weights for inverse-CDF tuple placement.
    let mut cumulative = Vec::with_capacity(n_keys);
    let mut acc = 0.0f64;
    for i in 0..n_keys {
        let rank = (i + 1) as f64;
        let w = match dist {
            Distribution::Uniform => 1.0,
            Distribution::Zipf => 1.0 / rank,
            Distribution::Lognormal => {
                let mu = (n_keys as f64).ln() / 2.0;
                let z = rank.ln() - mu;
                (-z * z / 2.0).exp() / rank
            }
        };
        acc += w;
        cumulative.push(acc);
    }
    let total_weight = acc;

    let mut counts = vec![0u64; n_keys];
    for _ in 0..n_tuples {
        let u: f64 = rng.random::<f64>() * total_weight;
        let idx = cumulative.partition_point(|c| *c < u).min(n_keys - 1);
        counts[idx] += 1;
    }

    let mut tuples = Vec::with_capacity(n_tuples as usize);
    for (k, c) in keys.iter().zip(&counts) {
        tuples.extend(std::iter::repeat_n(*k, *c as usize));
    }
    SortedColumn::new(keys, tuples)
}

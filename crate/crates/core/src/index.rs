//! The private learned index: noisy release, constrained postprocessing,
//! PLR fit and pessimistic lookups, assembled behind one build call.
//!
//! Everything after the noisy release is post-processing of already-private
//! values, so a build consumes exactly the epsilon budget of one release.
//! Lookups pad both endpoints by the measured model error plus the
//! pessimism margin Z = alpha_s * ceil(log2 N)^{3/2} / epsilon, then round
//! outward, so the returned range can only widen, never shrink.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfc::{compute_histogram, SortedColumn};
use crate::dpnoise::{noisy_cfc_impl, tree_levels, LaplaceNoise, NoiseSource, PrivacyParams};
use crate::error::{Error, Result};
use crate::plr::{fit_plr, postprocess_curve, PlrModel};

/// Half-open position interval [lo, hi) into the sorted tuple array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: u64,
    pub hi: u64,
}

impl IndexRange {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid_parameter("range", format!("lo {lo} > hi {hi}")));
        }
        Ok(IndexRange { lo, hi })
    }

    pub fn width(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    /// Number of positions shared with `other`.
    pub fn intersection(&self, other: &IndexRange) -> u64 {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        hi.saturating_sub(lo)
    }

    /// Number of positions of `self` not covered by `other`.
    pub fn difference(&self, other: &IndexRange) -> u64 {
        self.width() - self.intersection(other)
    }

    pub fn contains_range(&self, other: &IndexRange) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }
}

impl std::fmt::Display for IndexRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Pessimism margin Z = alpha_s * ceil(log2 N)^{3/2} / epsilon.
pub fn z_pad_for(params: &PrivacyParams, n_keys: usize) -> f64 {
    params.alpha_s() * (tree_levels(n_keys) as f64).powf(1.5) / params.epsilon()
}

/// A built private learned index: the fitted model, its parameters, the
/// public key domain and the pessimism margin.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPlrIndex {
    model: PlrModel,
    params: PrivacyParams,
    keys: Vec<i64>,
    total: u64,
    z_pad: f64,
}

pub(crate) fn build_impl<S: NoiseSource>(
    col: &SortedColumn,
    params: &PrivacyParams,
    source: &mut S,
) -> Result<DpPlrIndex> {
    params.validate()?;
    let hist = compute_histogram(col);
    let noisy = noisy_cfc_impl(&hist, params, source);
    let post = postprocess_curve(&noisy, col.total())?;
    let model = fit_plr(&post, params.tau())?;
    Ok(DpPlrIndex {
        model,
        params: *params,
        keys: col.keys().to_vec(),
        total: col.total(),
        z_pad: z_pad_for(params, col.n_keys()),
    })
}

impl DpPlrIndex {
    /// Builds the index from a column under the given privacy parameters.
    /// Deterministic for a fixed RNG stream.
    pub fn build<R: Rng>(col: &SortedColumn, params: &PrivacyParams, rng: &mut R) -> Result<Self> {
        build_impl(col, params, &mut LaplaceNoise::new(rng))
    }

    /// Build with a caller-supplied noise source; test builds only.
    #[cfg(feature = "test-hooks")]
    pub fn build_with_source<S: NoiseSource>(
        col: &SortedColumn,
        params: &PrivacyParams,
        source: &mut S,
    ) -> Result<Self> {
        build_impl(col, params, source)
    }

    /// Replaces the pessimism margin; test builds only.
    #[cfg(feature = "test-hooks")]
    pub fn with_z_pad(mut self, z_pad: f64) -> Self {
        self.z_pad = z_pad;
        self
    }

    pub fn model(&self) -> &PlrModel {
        &self.model
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
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

    pub fn z_pad(&self) -> f64 {
        self.z_pad
    }

    /// Pessimistic range for a domain key: both endpoints padded by
    /// e_max + Z and rounded outward, clamped into [0, total]. The first
    /// key's lower endpoint is the implicit CF origin 0.
    pub fn lookup(&self, x: i64) -> Result<IndexRange> {
        let pos = self.keys.binary_search(&x).map_err(|_| Error::KeyNotFound(x))?;
        let pad = self.model.e_max() + self.z_pad;
        let total = self.total as f64;
        let hi = (self.model.predict(x)? + pad).ceil().clamp(0.0, total) as u64;
        let lo = if pos == 0 {
            0
        } else {
            let prev = self.keys[pos - 1];
            (self.model.predict(prev)? - pad).floor().clamp(0.0, total) as u64
        };
        Ok(IndexRange { lo: lo.min(hi), hi })
    }

    /// Conservative composition for a key range: the low endpoint of the
    /// left key's range and the high endpoint of the right key's range.
    pub fn range_lookup(&self, x_lo: i64, x_hi: i64) -> Result<IndexRange> {
        if x_lo > x_hi {
            return Err(Error::invalid_parameter(
                "range",
                format!("x_lo {x_lo} > x_hi {x_hi}"),
            ));
        }
        let lo = self.lookup(x_lo)?.lo;
        let hi = self.lookup(x_hi)?.hi;
        Ok(IndexRange { lo: lo.min(hi), hi })
    }

    /// Index payload accounting: two 64-bit values per segment.
    pub fn index_size_bits(&self) -> u64 {
        128 * self.model.n_segments() as u64
    }

    /// Serializes the index envelope.
    pub fn to_json(&self) -> Result<String> {
        crate::envelope::dp_plr_to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match crate::envelope::AnyIndex::from_json(text)? {
            crate::envelope::AnyIndex::DpPlr(idx) => Ok(idx),
            other => Err(Error::MalformedFile {
                what: "index file",
                reason: format!("expected a dp_plr index, found {}", other.method()),
            }),
        }
    }

    pub(crate) fn from_file(doc: DpPlrFile) -> Result<Self> {
        if doc.version != ENVELOPE_VERSION {
            return Err(Error::MalformedFile {
                what: "index file",
                reason: format!("unsupported version {}", doc.version),
            });
        }
        doc.params.validate()?;
        if doc.keys.len() != doc.n_keys {
            return Err(Error::MalformedFile {
                what: "index file",
                reason: format!("{} keys but n_keys says {}", doc.keys.len(), doc.n_keys),
            });
        }
        for w in doc.keys.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::MalformedFile {
                    what: "index file",
                    reason: "keys must be strictly increasing".to_string(),
                });
            }
        }
        // z_pad is not stored; it is recomputed from public parameters.
        Ok(DpPlrIndex {
            z_pad: z_pad_for(&doc.params, doc.n_keys),
            model: doc.model,
            params: doc.params,
            keys: doc.keys,
            total: doc.total,
        })
    }
}

pub(crate) const ENVELOPE_VERSION: u32 = 1;

/// On-disk envelope for the learned index.
#[derive(Serialize, Deserialize)]
pub(crate) struct DpPlrFile {
    pub version: u32,
    pub params: PrivacyParams,
    pub n_keys: usize,
    pub total: u64,
    pub keys: Vec<i64>,
    pub model: PlrModel,
}

//! One JSON envelope family for all four index kinds, discriminated by a
//! `method` field, so the CLI and foreign bindings can load any index file.

use serde::{Deserialize, Serialize};

use crate::baselines::{DpBPlusIndex, NoisyCfcIndex, SpecialIndex};
use crate::error::{Error, Result};
use crate::index::{DpPlrFile, DpPlrIndex, IndexRange, ENVELOPE_VERSION};

/// Index construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DpPlr,
    DpBplus,
    Crypte,
    Special,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::DpPlr, Method::DpBplus, Method::Crypte, Method::Special];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DpPlr => "dp_plr",
            Method::DpBplus => "dp_bplus",
            Method::Crypte => "crypte",
            Method::Special => "special",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp_plr" => Ok(Method::DpPlr),
            "dp_bplus" => Ok(Method::DpBplus),
            "crypte" => Ok(Method::Crypte),
            "special" => Ok(Method::Special),
            other => Err(Error::invalid_parameter(
                "method",
                format!("unknown method {other:?}; expected dp_plr, dp_bplus, crypte or special"),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BPlusParams {
    epsilon: f64,
    overflow_b: u64,
}

#[derive(Serialize, Deserialize)]
struct CrypteParams {
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct SpecialParams {
    epsilon: f64,
    mu: f64,
}

/// On-disk form of any index.
#[derive(Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
enum IndexFile {
    DpPlr(DpPlrFile),
    DpBplus {
        version: u32,
        params: BPlusParams,
        n_keys: usize,
        total: u64,
        keys: Vec<i64>,
        leaf_counts: Vec<f64>,
        data_overhead: f64,
    },
    Crypte {
        version: u32,
        params: CrypteParams,
        n_keys: usize,
        total: u64,
        keys: Vec<i64>,
        curve: Vec<f64>,
    },
    Special {
        version: u32,
        params: SpecialParams,
        n_keys: usize,
        total: u64,
        keys: Vec<i64>,
        over_curve: Vec<f64>,
        under_curve: Vec<f64>,
    },
}

pub(crate) fn dp_plr_to_json(idx: &DpPlrIndex) -> Result<String> {
    let file = IndexFile::DpPlr(DpPlrFile {
        version: ENVELOPE_VERSION,
        params: *idx.params(),
        n_keys: idx.n_keys(),
        total: idx.total(),
        keys: idx.keys().to_vec(),
        model: idx.model().clone(),
    });
    Ok(serde_json::to_string_pretty(&file)?)
}

/// A loaded index of any method.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyIndex {
    DpPlr(DpPlrIndex),
    DpBplus(DpBPlusIndex),
    Crypte(NoisyCfcIndex),
    Special(SpecialIndex),
}

/// What a lookup hands back: a position range, or for the leaf-count model
/// the number of tuples returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupOutcome {
    Range(IndexRange),
    Count(u64),
}

impl std::fmt::Display for LookupOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LookupOutcome::Range(r) => write!(f, "{r}"),
            LookupOutcome::Count(c) => write!(f, "count={c}"),
        }
    }
}

impl AnyIndex {
    pub fn method(&self) -> Method {
        match self {
            AnyIndex::DpPlr(_) => Method::DpPlr,
            AnyIndex::DpBplus(_) => Method::DpBplus,
            AnyIndex::Crypte(_) => Method::Crypte,
            AnyIndex::Special(_) => Method::Special,
        }
    }

    pub fn lookup(&self, key: i64) -> Result<LookupOutcome> {
        Ok(match self {
            AnyIndex::DpPlr(idx) => LookupOutcome::Range(idx.lookup(key)?),
            AnyIndex::DpBplus(idx) => LookupOutcome::Count(idx.lookup(key)?),
            AnyIndex::Crypte(idx) => LookupOutcome::Range(idx.lookup(key)?),
            AnyIndex::Special(idx) => LookupOutcome::Range(idx.lookup(key)?),
        })
    }

    pub fn index_size_bits(&self) -> u64 {
        match self {
            AnyIndex::DpPlr(idx) => idx.index_size_bits(),
            AnyIndex::DpBplus(idx) => idx.index_size_bits(),
            AnyIndex::Crypte(idx) => idx.index_size_bits(),
            AnyIndex::Special(idx) => idx.index_size_bits(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            AnyIndex::DpPlr(idx) => return dp_plr_to_json(idx),
            AnyIndex::DpBplus(idx) => IndexFile::DpBplus {
                version: ENVELOPE_VERSION,
                params: BPlusParams { epsilon: idx.epsilon(), overflow_b: idx.overflow() },
                n_keys: idx.n_keys(),
                total: idx.total(),
                keys: idx.keys().to_vec(),
                leaf_counts: idx.leaf_counts().to_vec(),
                data_overhead: idx.data_overhead(),
            },
            AnyIndex::Crypte(idx) => IndexFile::Crypte {
                version: ENVELOPE_VERSION,
                params: CrypteParams { epsilon: idx.epsilon() },
                n_keys: idx.n_keys(),
                total: idx.total(),
                keys: idx.keys().to_vec(),
                curve: idx.curve().to_vec(),
            },
            AnyIndex::Special(idx) => {
                let (over, under) = idx.curves();
                IndexFile::Special {
                    version: ENVELOPE_VERSION,
                    params: SpecialParams { epsilon: idx.epsilon(), mu: idx.mu() },
                    n_keys: idx.n_keys(),
                    total: idx.total(),
                    keys: idx.keys().to_vec(),
                    over_curve: over.to_vec(),
                    under_curve: under.to_vec(),
                }
            }
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: IndexFile = serde_json::from_str(text)?;
        let check = |version: u32, n_keys: usize, keys: &[i64], aligned: &[usize]| -> Result<()> {
            if version != ENVELOPE_VERSION {
                return Err(Error::MalformedFile {
                    what: "index file",
                    reason: format!("unsupported version {version}"),
                });
            }
            if keys.len() != n_keys || aligned.iter().any(|len| *len != n_keys) {
                return Err(Error::MalformedFile {
                    what: "index file",
                    reason: "per-key arrays must align with n_keys".to_string(),
                });
            }
            Ok(())
        };
        Ok(match file {
            IndexFile::DpPlr(doc) => AnyIndex::DpPlr(DpPlrIndex::from_file(doc)?),
            IndexFile::DpBplus {
                version,
                params,
                n_keys,
                total,
                keys,
                leaf_counts,
                data_overhead,
            } => {
                check(version, n_keys, &keys, &[leaf_counts.len()])?;
                AnyIndex::DpBplus(DpBPlusIndex::from_parts(
                    keys,
                    leaf_counts,
                    params.overflow_b,
                    data_overhead,
                    params.epsilon,
                    total,
                ))
            }
            IndexFile::Crypte { version, params, n_keys, total, keys, curve } => {
                check(version, n_keys, &keys, &[curve.len()])?;
                AnyIndex::Crypte(NoisyCfcIndex::from_parts(keys, curve, params.epsilon, total))
            }
            IndexFile::Special {
                version,
                params,
                n_keys,
                total,
                keys,
                over_curve,
                under_curve,
            } => {
                check(version, n_keys, &keys, &[over_curve.len(), under_curve.len()])?;
                AnyIndex::Special(SpecialIndex::from_parts(
                    keys,
                    over_curve,
                    under_curve,
                    params.mu,
                    params.epsilon,
                    total,
                ))
            }
        })
    }
}

//! Differentially private learned indexes over cumulative frequency curves.
//!
//! The pipeline releases a noisy cumulative frequency curve through a
//! range-tree Laplace mechanism, rewrites it into a monotone clipped curve,
//! fits an error-bounded piecewise linear model, and answers lookups with a
//! pessimistic padding so the true range is covered with high probability.
//! Three baseline private indexes (a noisy-leaf B+ tree model, per-point
//! noisy curves, and paired one-sided curves) plus a Monte Carlo benchmark
//! harness make head-to-head comparisons reproducible.

pub mod baselines;
pub mod bench;
pub mod cfc;
pub mod dpnoise;
pub mod envelope;
pub mod error;
pub mod index;
pub mod plr;
pub mod report;

pub use cfc::{
    compute_cfc, compute_histogram, generate_column, CFCurve, CurveKind, Distribution, Histogram,
    SortedColumn,
};
pub use dpnoise::{
    cfc_error_bound, laplace_sample, noisy_cfc, per_instance_epsilon, tree_levels, PrivacyParams,
};
pub use envelope::{AnyIndex, LookupOutcome, Method};
pub use error::{Error, Result};
pub use index::{z_pad_for, DpPlrIndex, IndexRange};
pub use plr::{clip_cfc, fit_plr, isotonic_regression, postprocess_curve, PlrModel};

//! Laplace sampling and the range-tree release of noisy cumulative
//! frequency curves.
//!
//! The release walks the key domain once, maintaining one partial sum per
//! binary-tree level. At step t the lowest set-bit level of t absorbs all
//! lower live p-sums plus the new count, the lower levels reset, and the
//! absorbed p-sum is perturbed by one fresh Laplace draw. The noisy prefix
//! for t is then the sum of the noisy p-sums at the set-bit levels of t, so
//! every prefix is covered by at most one p-sum per level.
//!
//! The per-instance budget splits epsilon over the ceil(log2 N) tree levels
//! (for a single-key domain the whole budget goes to the one p-sum). All
//! noisy values stay real-valued; rounding happens only at lookup time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfc::{CFCurve, CurveKind, Histogram};
use crate::error::{Error, Result};

/// Privacy and pessimism parameters shared by index construction and the
/// formal bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
    beta: f64,
    alpha_s: f64,
    tau: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, beta: f64, alpha_s: f64, tau: f64) -> Result<Self> {
        let params = PrivacyParams { epsilon, beta, alpha_s, tau };
        params.validate()?;
        Ok(params)
    }

    /// Parameters with the pessimism multiplier at its sufficiency default
    /// sqrt(ln(2/beta)), floored at 1.
    pub fn with_default_pessimism(epsilon: f64, beta: f64, tau: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid_parameter("beta", "must lie in (0, 1)"));
        }
        let alpha_s = (2.0 / beta).ln().sqrt().max(1.0);
        PrivacyParams::new(epsilon, beta, alpha_s, tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid_parameter("epsilon", "must be positive and finite"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid_parameter("beta", "must lie in (0, 1)"));
        }
        if !(self.alpha_s >= 1.0 && self.alpha_s.is_finite()) {
            return Err(Error::invalid_parameter("alpha_s", "must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid_parameter("tau", "must be non-negative"));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha_s(&self) -> f64 {
        self.alpha_s
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

mod source {
    use super::laplace_unchecked;
    use rand::Rng;

    /// Additive noise drawn once per released p-sum.
    pub trait NoiseSource {
        fn draw(&mut self, scale: f64) -> f64;
    }

    /// Laplace noise driven by a caller-owned seeded stream; the library
    /// never reads ambient entropy.
    pub struct LaplaceNoise<R> {
        rng: R,
    }

    impl<R: Rng> LaplaceNoise<R> {
        pub fn new(rng: R) -> Self {
            LaplaceNoise { rng }
        }
    }

    impl<R: Rng> NoiseSource for LaplaceNoise<R> {
        fn draw(&mut self, scale: f64) -> f64 {
            laplace_unchecked(scale, &mut self.rng)
        }
    }

    /// Disables noise entirely for oracle-equivalence tests.
    #[cfg(feature = "test-hooks")]
    pub struct ZeroNoise;

    #[cfg(feature = "test-hooks")]
    impl NoiseSource for ZeroNoise {
        fn draw(&mut self, _scale: f64) -> f64 {
            0.0
        }
    }
}

#[cfg(feature = "test-hooks")]
pub use source::{LaplaceNoise, NoiseSource, ZeroNoise};
#[cfg(not(feature = "test-hooks"))]
pub(crate) use source::{LaplaceNoise, NoiseSource};

/// Number of binary-tree levels the budget is split across:
/// ceil(log2 N), floored at 1 so a single-key domain keeps the full budget.
pub fn tree_levels(n_keys: usize) -> u32 {
    debug_assert!(n_keys >= 1);
    (usize::BITS - n_keys.saturating_sub(1).leading_zeros()).max(1)
}

/// Per-instance budget epsilon' = epsilon / ceil(log2 N).
pub fn per_instance_epsilon(epsilon: f64, n_keys: usize) -> f64 {
    epsilon / tree_levels(n_keys) as f64
}

/// Inverse CDF of Laplace(0, scale) at u in (-1/2, 1/2].
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

fn laplace_unchecked<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    // u = 0 would map to the infinite tail; redraw (probability 2^-53).
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    laplace_inverse_cdf(u - 0.5, scale)
}

/// One draw from Laplace(0, scale).
pub fn laplace_sample<R: Rng>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid_parameter("scale", "must be positive and finite"));
    }
    Ok(laplace_unchecked(scale, rng))
}

/// Rolling p-sum storage for the range-tree release.
///
/// After step t exactly the levels at the set bits of t hold live p-sums;
/// everything below the absorbing level is recycled to zero.
pub struct PSumState {
    alpha: Vec<f64>,
    alpha_noisy: Vec<f64>,
    live: Vec<bool>,
}

impl PSumState {
    pub fn new(n_keys: usize) -> Self {
        let slots = tree_levels(n_keys) as usize + 1;
        PSumState {
            alpha: vec![0.0; slots],
            alpha_noisy: vec![0.0; slots],
            live: vec![false; slots],
        }
    }

    /// Absorbs count c_t at step t (1-based), perturbs the new p-sum with one
    /// draw from `source`, and returns the noisy prefix value for t.
    pub fn step<S: NoiseSource>(&mut self, t: usize, count: f64, scale: f64, source: &mut S) -> f64 {
        debug_assert!(t >= 1, "steps are 1-based");
        let level = t.trailing_zeros() as usize;
        let mut absorbed = count;
        for j in 0..level {
            absorbed += self.alpha[j];
            self.alpha[j] = 0.0;
            self.alpha_noisy[j] = 0.0;
            self.live[j] = false;
        }
        self.alpha[level] = absorbed;
        self.alpha_noisy[level] = absorbed + source.draw(scale);
        self.live[level] = true;

        let mut prefix = 0.0;
        let mut bits = t;
        while bits != 0 {
            prefix += self.alpha_noisy[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        prefix
    }

    /// Exact p-sum currently held at `level`.
    pub fn psum(&self, level: usize) -> f64 {
        self.alpha[level]
    }

    /// Noisy p-sum currently held at `level`.
    pub fn noisy_psum(&self, level: usize) -> f64 {
        self.alpha_noisy[level]
    }

    /// Levels holding live p-sums, ascending.
    pub fn live_levels(&self) -> Vec<usize> {
        self.live
            .iter()
            .enumerate()
            .filter_map(|(j, live)| live.then_some(j))
            .collect()
    }

    /// Levels whose noisy p-sums cover the prefix at step t: the set bits of t.
    pub fn covering_levels(t: usize) -> Vec<usize> {
        let mut levels = Vec::new();
        let mut bits = t;
        while bits != 0 {
            levels.push(bits.trailing_zeros() as usize);
            bits &= bits - 1;
        }
        levels.sort_unstable();
        levels
    }
}

pub(crate) fn noisy_cfc_impl<S: NoiseSource>(
    hist: &Histogram,
    params: &PrivacyParams,
    source: &mut S,
) -> CFCurve {
    let n = hist.n_keys();
    let scale = 1.0 / per_instance_epsilon(params.epsilon(), n);
    let mut state = PSumState::new(n);
    let mut values = Vec::with_capacity(n);
    for (i, c) in hist.counts().iter().enumerate() {
        values.push(state.step(i + 1, *c as f64, scale, source));
    }
    CFCurve::new(hist.keys().to_vec(), values, CurveKind::Noisy)
        .expect("histogram is non-empty and aligned")
}

/// Releases the noisy CFC of `hist` under epsilon-DP with one fresh Laplace
/// draw per key.
pub fn noisy_cfc<R: Rng>(hist: &Histogram, params: &PrivacyParams, rng: &mut R) -> Result<CFCurve> {
    params.validate()?;
    Ok(noisy_cfc_impl(hist, params, &mut LaplaceNoise::new(rng)))
}

/// Same release with a caller-supplied noise source; only available to test
/// builds so the production path always carries Laplace noise.
#[cfg(feature = "test-hooks")]
pub fn noisy_cfc_with_source<S: NoiseSource>(
    hist: &Histogram,
    params: &PrivacyParams,
    source: &mut S,
) -> Result<CFCurve> {
    params.validate()?;
    Ok(noisy_cfc_impl(hist, params, source))
}

/// High-probability per-point bound on |noisy - exact|:
/// (2 ceil(log2 N))^{3/2} sqrt(ln(2/beta)) / epsilon.
pub fn cfc_error_bound(params: &PrivacyParams, n_keys: usize) -> Result<f64> {
    params.validate()?;
    if n_keys < 2 {
        return Err(Error::invalid_parameter(
            "n_keys",
            "the error bound needs at least 2 keys",
        ));
    }
    let levels = tree_levels(n_keys) as f64;
    Ok((2.0 * levels).powf(1.5) * (2.0 / params.beta()).ln().sqrt() / params.epsilon())
}

//! Error-bounded piecewise linear models over postprocessed curves.
//!
//! [`isotonic_regression`] and [`clip_cfc`] rewrite a noisy release into a
//! non-decreasing curve inside [0, |D|]. [`fit_plr`] then covers the curve
//! with the fewest segments a greedy slope cone will allow: a segment stays
//! open while some line through its anchor passes within `tau` of every
//! point seen, and closes at the previous point once the cone empties. Each
//! closed segment keeps its least-squares refit when that still meets the
//! pointwise bound, otherwise the cone-midpoint line through the anchor.
//!
//! Keys are converted to f64 for fitting; domains beyond 2^53 lose
//! precision.

use serde::{Deserialize, Serialize};

use crate::cfc::CFCurve;
use crate::error::{Error, Result};

/// Least-squares optimal non-decreasing fit via pool-adjacent-violators.
pub fn isotonic_regression(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("isotonic regression"));
    }
    // (sum, count) blocks; a block's fitted value is its mean.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s1 / (c1 as f64) < s0 / (c0 as f64) {
                blocks.pop();
                blocks.pop();
                blocks.push((s0 + s1, c0 + c1));
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (sum, count) in blocks {
        let mean = sum / count as f64;
        out.extend(std::iter::repeat_n(mean, count));
    }
    Ok(out)
}

/// Clamps every value into [0, total].
pub fn clip_cfc(values: &[f64], total: u64) -> Vec<f64> {
    values.iter().map(|v| v.clamp(0.0, total as f64)).collect()
}

/// Isotonic regression followed by clipping, producing the postprocessed
/// curve a PLR model is trained on.
pub fn postprocess_curve(curve: &CFCurve, total: u64) -> Result<CFCurve> {
    let monotone = isotonic_regression(curve.values())?;
    let clipped = clip_cfc(&monotone, total);
    CFCurve::new(curve.keys().to_vec(), clipped, crate::cfc::CurveKind::Postprocessed)
}

/// A fitted piecewise linear model: strictly increasing segment start keys,
/// per-segment slope/intercept pairs, and the measured maximum deviation
/// from the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlrModelDoc", into = "PlrModelDoc")]
pub struct PlrModel {
    starts: Vec<i64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    domain_end: i64,
    e_max: f64,
    tau: f64,
    n_keys: usize,
}

/// Wire format: `boundaries` carries the segment starts followed by the
/// inclusive domain end, so it has one more entry than `slopes`.
#[derive(Serialize, Deserialize)]
struct PlrModelDoc {
    boundaries: Vec<i64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    e_max: f64,
    tau: f64,
    n_keys: usize,
}

impl From<PlrModel> for PlrModelDoc {
    fn from(m: PlrModel) -> Self {
        let mut boundaries = m.starts;
        boundaries.push(m.domain_end);
        PlrModelDoc {
            boundaries,
            slopes: m.slopes,
            intercepts: m.intercepts,
            e_max: m.e_max,
            tau: m.tau,
            n_keys: m.n_keys,
        }
    }
}

impl TryFrom<PlrModelDoc> for PlrModel {
    type Error = Error;

    fn try_from(doc: PlrModelDoc) -> Result<Self> {
        if doc.boundaries.len() != doc.slopes.len() + 1 {
            return Err(Error::MalformedFile {
                what: "plr model",
                reason: format!(
                    "{} boundaries for {} segments; expected one extra terminator",
                    doc.boundaries.len(),
                    doc.slopes.len()
                ),
            });
        }
        if doc.slopes.len() != doc.intercepts.len() || doc.slopes.is_empty() {
            return Err(Error::MalformedFile {
                what: "plr model",
                reason: "slopes and intercepts must be non-empty and aligned".to_string(),
            });
        }
        let mut starts = doc.boundaries;
        let domain_end = starts.pop().expect("checked non-empty");
        for w in starts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::MalformedFile {
                    what: "plr model",
                    reason: "segment starts must be strictly increasing".to_string(),
                });
            }
        }
        if domain_end < *starts.last().expect("at least one segment") {
            return Err(Error::MalformedFile {
                what: "plr model",
                reason: "domain end precedes the last segment start".to_string(),
            });
        }
        Ok(PlrModel {
            starts,
            slopes: doc.slopes,
            intercepts: doc.intercepts,
            domain_end,
            e_max: doc.e_max,
            tau: doc.tau,
            n_keys: doc.n_keys,
        })
    }
}

impl PlrModel {
    /// Segment start keys (left endpoints), strictly increasing.
    pub fn boundaries(&self) -> &[i64] {
        &self.starts
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Inclusive right end of the fitted key domain.
    pub fn domain_end(&self) -> i64 {
        self.domain_end
    }

    pub fn n_segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn n_keys(&self) -> usize {
        self.n_keys
    }

    /// Measured max |predict(x_i) - y_i| over the training curve.
    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Evaluates the model at `x`. Segments are half-open on the right;
    /// the last segment also covers the domain end.
    pub fn predict(&self, x: i64) -> Result<f64> {
        if x < self.starts[0] || x > self.domain_end {
            return Err(Error::KeyNotFound(x));
        }
        let seg = self.starts.partition_point(|s| *s <= x) - 1;
        Ok(eval_line(self.slopes[seg], self.intercepts[seg], x as f64))
    }
}

#[inline]
fn eval_line(slope: f64, intercept: f64, x: f64) -> f64 {
    slope * x + intercept
}

fn line_fits(xs: &[f64], ys: &[f64], slope: f64, intercept: f64, tau: f64) -> bool {
    xs.iter()
        .zip(ys)
        .all(|(x, y)| (eval_line(slope, intercept, *x) - y).abs() <= tau)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    if den == 0.0 {
        return (0.0, mean_y);
    }
    let slope = num / den;
    (slope, mean_y - slope * mean_x)
}

/// Slope interval of lines through (xs[0], ys[0]) passing within tau of
/// every point; None when the cone is empty.
fn anchored_cone(xs: &[f64], ys: &[f64], tau: f64) -> Option<(f64, f64)> {
    let (ax, ay) = (xs[0], ys[0]);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (x, y) in xs.iter().zip(ys).skip(1) {
        let dx = x - ax;
        lo = lo.max((y - tau - ay) / dx);
        hi = hi.min((y + tau - ay) / dx);
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// Picks the line for one closed segment, splitting only when rounding dust
/// keeps both candidates from meeting the pointwise bound.
fn fit_segment(xs: &[f64], ys: &[f64], keys: &[i64], tau: f64, out: &mut Vec<(i64, f64, f64)>) {
    debug_assert!(!xs.is_empty());
    if xs.len() == 1 {
        out.push((keys[0], 0.0, ys[0]));
        return;
    }
    let (ls_slope, ls_intercept) = least_squares(xs, ys);
    if line_fits(xs, ys, ls_slope, ls_intercept, tau) {
        out.push((keys[0], ls_slope, ls_intercept));
        return;
    }
    if let Some((lo, hi)) = anchored_cone(xs, ys, tau) {
        let slope = 0.5 * (lo + hi);
        let slope = if slope.is_finite() { slope } else { 0.0 };
        let intercept = ys[0] - slope * xs[0];
        if line_fits(xs, ys, slope, intercept, tau) {
            out.push((keys[0], slope, intercept));
            return;
        }
    }
    let mid = xs.len() / 2;
    fit_segment(&xs[..mid], &ys[..mid], &keys[..mid], tau, out);
    fit_segment(&xs[mid..], &ys[mid..], &keys[mid..], tau, out);
}

/// Fits an error-bounded PLR model to a non-decreasing curve. Every training
/// point is guaranteed within `tau` of the fitted model.
pub fn fit_plr(curve: &CFCurve, tau: f64) -> Result<PlrModel> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid_parameter("tau", "must be non-negative and finite"));
    }
    let ys = curve.values();
    let keys = curve.keys();
    for i in 1..ys.len() {
        if ys[i] < ys[i - 1] {
            return Err(Error::invalid_column(
                i,
                "plr input must be non-decreasing; postprocess the curve first".to_string(),
            ));
        }
    }
    let xs: Vec<f64> = keys.iter().map(|k| *k as f64).collect();

    let mut segments: Vec<(i64, f64, f64)> = Vec::new();
    let mut anchor = 0usize;
    let mut cone = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 1..xs.len() {
        let dx = xs[i] - xs[anchor];
        let lo = (ys[i] - tau - ys[anchor]) / dx;
        let hi = (ys[i] + tau - ys[anchor]) / dx;
        let next = (cone.0.max(lo), cone.1.min(hi));
        if next.0 > next.1 {
            fit_segment(&xs[anchor..i], &ys[anchor..i], &keys[anchor..i], tau, &mut segments);
            anchor = i;
            cone = (f64::NEG_INFINITY, f64::INFINITY);
        } else {
            cone = next;
        }
    }
    fit_segment(&xs[anchor..], &ys[anchor..], &keys[anchor..], tau, &mut segments);

    let starts: Vec<i64> = segments.iter().map(|s| s.0).collect();
    let slopes: Vec<f64> = segments.iter().map(|s| s.1).collect();
    let intercepts: Vec<f64> = segments.iter().map(|s| s.2).collect();
    let model = PlrModel {
        starts,
        slopes,
        intercepts,
        domain_end: *keys.last().expect("curve is non-empty"),
        e_max: 0.0,
        tau,
        n_keys: keys.len(),
    };

    let mut e_max = 0.0f64;
    for (k, y) in keys.iter().zip(ys) {
        let err = (model.predict(*k).expect("training key inside domain") - y).abs();
        e_max = e_max.max(err);
    }
    assert!(
        e_max <= tau,
        "fit violated its error bound: e_max {e_max} > tau {tau}"
    );
    Ok(PlrModel { e_max, ..model })
}

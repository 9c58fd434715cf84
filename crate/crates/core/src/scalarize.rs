//! Reference-point scalarization: range-based weights, the weighted
//! Chebyshev achievement value, cone membership and the progress metric.
//!
//! The achievement of an outcome `x` for reference point `r` and weights `w`
//! is `max_k w_k (g_k(x) - r_k)`. No augmentation term is added; the archive
//! already discards weakly efficient points through dominance filtering.
//! The cone of `r` is the closed orthant of outcomes weakly dominating it, so
//! for positive weights `achievement <= 0` holds exactly on the cone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Outcome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarizationError {
    #[error("cannot derive weights from an empty outcome set")]
    EmptyOutcomes,
    #[error("empty snapshot")]
    EmptySnapshot,
    #[error("weights must be positive and finite, got {0:?}")]
    InvalidWeights([f64; 2]),
    #[error("reference point must be finite, got {0:?}")]
    InvalidReference([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    /// `[inventory, distance]` aspiration levels.
    pub r: [f64; 2],
    #[serde(default)]
    pub label: String,
}

impl ReferencePoint {
    pub fn new(r: [f64; 2], label: impl Into<String>) -> Result<Self, ScalarizationError> {
        if !r.iter().all(|v| v.is_finite()) {
            return Err(ScalarizationError::InvalidReference(r));
        }
        Ok(Self { r, label: label.into() })
    }

    /// The outcome of an existing solution taken as reference point.
    pub fn from_outcome(outcome: &Outcome, label: impl Into<String>) -> Self {
        Self {
            r: outcome.objectives(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: [f64; 2],
}

impl WeightVector {
    pub fn new(w: [f64; 2]) -> Result<Self, ScalarizationError> {
        if !w.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(ScalarizationError::InvalidWeights(w));
        }
        Ok(Self { w })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, ScalarizationError> {
        Self::new([self.w[0] * factor, self.w[1] * factor])
    }
}

/// `w_k = 1 / (max_k - min_k)` over the given outcomes; a flat objective gets
/// weight 1.
pub fn compute_weights(outcomes: &[Outcome]) -> Result<WeightVector, ScalarizationError> {
    let first = outcomes.first().ok_or(ScalarizationError::EmptyOutcomes)?;
    let mut lo = first.objectives();
    let mut hi = lo;
    for outcome in &outcomes[1..] {
        for (k, value) in outcome.objectives().into_iter().enumerate() {
            lo[k] = lo[k].min(value);
            hi[k] = hi[k].max(value);
        }
    }
    let weight = |k: usize| {
        let range = hi[k] - lo[k];
        if range > 0.0 {
            1.0 / range
        } else {
            1.0
        }
    };
    WeightVector::new([weight(0), weight(1)])
}

#[inline]
pub fn achievement(x: &Outcome, r: &ReferencePoint, w: &WeightVector) -> f64 {
    let g = x.objectives();
    let a = w.w[0] * (g[0] - r.r[0]);
    let b = w.w[1] * (g[1] - r.r[1]);
    a.max(b)
}

/// Boundary included.
#[inline]
pub fn in_cone(x: &Outcome, r: &ReferencePoint) -> bool {
    let g = x.objectives();
    g[0] <= r.r[0] && g[1] <= r.r[1]
}

/// Best achievement over `snapshot` minus the achievement of `best_known`.
/// Zero once the best-known alternative is matched, negative once it is
/// surpassed.
pub fn progress_metric(
    snapshot: &[Outcome],
    r: &ReferencePoint,
    w: &WeightVector,
    best_known: &Outcome,
) -> Result<f64, ScalarizationError> {
    let best = snapshot
        .iter()
        .map(|x| achievement(x, r, w))
        .min_by(f64::total_cmp)
        .ok_or(ScalarizationError::EmptySnapshot)?;
    Ok(best - achievement(best_known, r, w))
}

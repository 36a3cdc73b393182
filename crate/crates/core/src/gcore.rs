//! Worst-case expectation over a finite family of volatility scenarios.
//!
//! The driving noise has squared volatility known only up to an interval
//! `[sigma_lo_sq, sigma_hi_sq]`. Expectations are taken scenario by scenario
//! and maximized, which keeps the operator sublinear: subadditive, monotone,
//! constant-preserving and positively homogeneous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-volatility interval. Invariant: `0 < sigma_lo_sq <= sigma_hi_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolBounds {
    pub sigma_lo_sq: f64,
    pub sigma_hi_sq: f64,
}

impl VolBounds {
    pub fn new(sigma_lo_sq: f64, sigma_hi_sq: f64) -> Result<Self> {
        if !(sigma_lo_sq > 0.0 && sigma_lo_sq <= sigma_hi_sq && sigma_hi_sq.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "volatility bounds need 0 < sigma_lo_sq <= sigma_hi_sq, got sigma_lo_sq = {sigma_lo_sq}, sigma_hi_sq = {sigma_hi_sq}"
            )));
        }
        Ok(Self {
            sigma_lo_sq,
            sigma_hi_sq,
        })
    }

    /// True when the interval degenerates to a single classical volatility.
    pub fn is_classical(&self) -> bool {
        self.sigma_lo_sq == self.sigma_hi_sq
    }

    pub fn width(&self) -> f64 {
        self.sigma_hi_sq - self.sigma_lo_sq
    }
}

/// Generator function of the uncertain-volatility noise:
/// half the worst-case squared volatility applied to the signed argument,
/// `0.5 * (sigma_hi_sq * a_plus - sigma_lo_sq * a_minus)`.
pub fn g_function(a: f64, bounds: &VolBounds) -> f64 {
    0.5 * (bounds.sigma_hi_sq * a.max(0.0) - bounds.sigma_lo_sq * (-a).max(0.0))
}

/// Per-scenario sample arrays keyed by scenario id.
///
/// Invariants enforced at construction: ids are unique, every sample array is
/// non-empty, and all arrays have the same length when `paired` reductions are
/// requested by callers.
#[derive(Debug, Clone)]
pub struct ScenarioSamples {
    per_scenario: Vec<(u64, Vec<f64>)>,
}

impl ScenarioSamples {
    pub fn new(per_scenario: Vec<(u64, Vec<f64>)>) -> Result<Self> {
        if per_scenario.is_empty() {
            return Err(Error::NoScenarios);
        }
        for (id, samples) in &per_scenario {
            if samples.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "scenario {id} has an empty sample array"
                )));
            }
        }
        let mut ids: Vec<u64> = per_scenario.iter().map(|(id, _)| *id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != per_scenario.len() {
            return Err(Error::InvalidInput(
                "scenario ids must be unique".to_string(),
            ));
        }
        Ok(Self { per_scenario })
    }

    pub fn scenarios(&self) -> &[(u64, Vec<f64>)] {
        &self.per_scenario
    }

    pub fn len(&self) -> usize {
        self.per_scenario.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_scenario.is_empty()
    }
}

/// Pairwise summation with a fixed reduction tree.
///
/// The tree depends only on the slice length, never on thread count or data,
/// so reductions are reproducible across runs and worker configurations.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean clamped into the observed sample range.
///
/// The clamp is a no-op at the accuracy level of the estimate; it guarantees
/// that constant samples average to exactly that constant.
pub fn mean(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let raw = pairwise_sum(xs) / xs.len() as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    raw.clamp(lo, hi)
}

/// Worst-case expectation: the largest per-scenario sample mean.
pub fn sublinear_expectation(samples: &ScenarioSamples) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for (_, xs) in samples.scenarios() {
        best = best.max(mean(xs));
    }
    Ok(best)
}

/// Worst-case probability of an event given 0/1 indicator samples.
pub fn capacity(samples: &ScenarioSamples) -> Result<f64> {
    for (_, xs) in samples.scenarios() {
        if let Some(&bad) = xs.iter().find(|&&x| x != 0.0 && x != 1.0) {
            return Err(Error::NonIndicator { value: bad });
        }
    }
    sublinear_expectation(samples)
}

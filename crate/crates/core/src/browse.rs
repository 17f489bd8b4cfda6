//! Rank-biased browsing model.
//!
//! A user scans a ranked list top-down and stops after position `k` with
//! probability `P(k) = (1 - γ) γ^(k-1)`. Position `k` is examined with
//! probability `γ^(k-1)`. Finite lists of length `n` capture `1 - γ^n` of the
//! stopping mass; the residual `γ^n` is dropped unless a caller renormalizes.

use crate::error::{Error, Result};

/// Patience used when none is configured.
pub const DEFAULT_PATIENCE: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrowsingModel {
    patience: f64,
}

impl Default for BrowsingModel {
    fn default() -> Self {
        Self {
            patience: DEFAULT_PATIENCE,
        }
    }
}

impl BrowsingModel {
    /// `patience` must lie strictly between 0 and 1.
    pub fn new(patience: f64) -> Result<Self> {
        if !(patience > 0.0 && patience < 1.0) {
            return Err(Error::invalid(format!(
                "patience must be in (0, 1), got {patience}"
            )));
        }
        Ok(Self { patience })
    }

    pub fn patience(&self) -> f64 {
        self.patience
    }

    /// Probability of stopping at rank `k` (1-based).
    pub fn stop_prob(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("rank positions start at 1"));
        }
        Ok(self.stop_at(k))
    }

    #[inline]
    pub(crate) fn stop_at(&self, k: usize) -> f64 {
        (1.0 - self.patience) * self.examine(k)
    }

    /// Probability that rank `k` (1-based) is examined: `γ^(k-1)`.
    #[inline]
    pub fn examine(&self, k: usize) -> f64 {
        self.patience.powi(k as i32 - 1)
    }

    /// Stopping mass on the first `n` ranks, `1 - γ^n`.
    pub fn truncated_mass(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        1.0 - self.residual(n)
    }

    /// Mass beyond rank `n`, `γ^n`.
    #[inline]
    pub fn residual(&self, n: usize) -> f64 {
        self.patience.powi(n as i32)
    }

    /// Stopping probabilities for ranks `1..=n`.
    pub fn stop_probs(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut g = 1.0;
        for _ in 0..n {
            out.push((1.0 - self.patience) * g);
            g *= self.patience;
        }
        out
    }
}

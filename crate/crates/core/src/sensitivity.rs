//! Worst-case L2-sensitivity and Frobenius bound γ for bounded data.
//!
//! Datasets are `M × N` with one record per column and every entry in
//! `[lo, hi]`. Neighbors differ by replacing a single column. Nothing here
//! looks at the actual data.

use crate::error::{MvgError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataBounds {
    num_features: usize,
    num_samples: usize,
    lo: f64,
    hi: f64,
}

impl DataBounds {
    pub fn new(num_features: usize, num_samples: usize, lo: f64, hi: f64) -> Result<Self> {
        if num_features == 0 || num_samples == 0 {
            return Err(MvgError::Shape(format!(
                "bounds need M, N >= 1, got {num_features}x{num_samples}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(MvgError::Domain(format!(
                "bounds need lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            num_features,
            num_samples,
            lo,
            hi,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Largest attainable magnitude, max(|lo|, |hi|).
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn with_samples(&self, num_samples: usize) -> Result<Self> {
        Self::new(self.num_features, num_samples, self.lo, self.hi)
    }
}

/// f(X) = X: one column changes by at most `(hi − lo)` per entry.
pub fn identity_sensitivity(b: &DataBounds) -> f64 {
    (b.hi - b.lo) * (b.num_features as f64).sqrt()
}

/// f(X) = XXᵀ/N: `‖xxᵀ − x'x'ᵀ‖_F / N ≤ 2‖x‖²/N ≤ 2Mc²/N`.
pub fn covariance_sensitivity(b: &DataBounds) -> f64 {
    let c = b.max_abs();
    2.0 * b.num_features as f64 * c * c / b.num_samples as f64
}

/// sup ‖X‖_F over the box.
pub fn gamma_identity(b: &DataBounds) -> f64 {
    b.max_abs() * ((b.num_features * b.num_samples) as f64).sqrt()
}

/// sup ‖XXᵀ/N‖_F over the box, via the rank-one bound `‖xxᵀ‖_F ≤ Mc²`.
pub fn gamma_covariance(b: &DataBounds) -> f64 {
    let c = b.max_abs();
    b.num_features as f64 * c * c
}

/// L1 analogue of [`identity_sensitivity`], for the Laplace baseline.
pub fn identity_l1_sensitivity(b: &DataBounds) -> f64 {
    (b.hi - b.lo) * b.num_features as f64
}

/// L1 analogue of [`covariance_sensitivity`]: `‖xxᵀ‖₁ ≤ (Mc)²`.
pub fn covariance_l1_sensitivity(b: &DataBounds) -> f64 {
    let mc = b.num_features as f64 * b.max_abs();
    2.0 * mc * mc / b.num_samples as f64
}

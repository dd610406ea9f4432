//! (α, β)-accuracy: with probability at least `1 - β` the released value
//! lies within `α` of the noiseless one. Error is measured per coordinate in
//! absolute value.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyBound {
    /// Error radius per coordinate.
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl AccuracyBound {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::NonpositiveAlpha(alpha));
        }
        check_beta(beta)?;
        Ok(AccuracyBound { alpha: vec![alpha], beta })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(())
}

/// Laplace(b) tail: `Pr[|Lap(b)| > α] = exp(-α/b)`, so `α = b·ln(1/β)`.
pub fn laplace_alpha(b: f64, beta: f64) -> Result<f64> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::NonpositiveScale(b));
    }
    check_beta(beta)?;
    Ok(b * (1.0 / beta).ln())
}

/// The `ε` for which Laplace noise calibrated to sensitivity `c` meets
/// `(α, β)`: `ε = c·ln(1/β)/α`. A zero-sensitivity statistic needs no budget.
pub fn epsilon_for_accuracy(sensitivity: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(sensitivity.is_finite() && sensitivity >= 0.0) {
        return Err(Error::InvalidSensitivity(sensitivity));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::NonpositiveAlpha(alpha));
    }
    check_beta(beta)?;
    Ok(sensitivity * (1.0 / beta).ln() / alpha)
}

/// `α` achieved by Laplace noise with sensitivity `c` at budget `ε`.
pub fn alpha_for_epsilon(sensitivity: f64, epsilon: f64, beta: f64) -> Result<f64> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::InvalidSensitivity(sensitivity));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    laplace_alpha(sensitivity / epsilon, beta)
}

/// Union bound over releases: coordinates keep their radii, failure
/// probabilities add (capped at 1).
pub fn compose_accuracy_union(bounds: &[AccuracyBound]) -> AccuracyBound {
    AccuracyBound {
        alpha: bounds.iter().flat_map(|b| b.alpha.iter().copied()).collect(),
        beta: bounds.iter().map(|b| b.beta).sum::<f64>().min(1.0),
    }
}

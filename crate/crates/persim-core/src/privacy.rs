//! Privacy budgets, budget conversion, and the Gaussian mechanism.
//!
//! Budgets come in two forms: a zero-concentrated parameter `rho` (Rényi
//! divergence of order alpha bounded by `rho * alpha` for every alpha > 1)
//! and an approximate-DP pair `(epsilon, delta)`. The forward conversion is
//! the closed form `epsilon = rho + 2*sqrt(rho*ln(1/delta))`; the reverse
//! conversion inverts it numerically instead of importing an unspecified
//! multiplicative constant, so a round trip can never loosen the target
//! `(epsilon, delta)`.
//!
//! All logarithms are natural.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("rho must be finite and nonnegative, got {0}")]
    InvalidRho(f64),
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("delta must lie strictly inside (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("sensitivity must be finite and nonnegative, got {0}")]
    InvalidSensitivity(f64),
    #[error("rho = 0 admits no finite-variance noise scale")]
    ZeroRhoNoise,
    #[error("Renyi order alpha must exceed 1, got {0}")]
    InvalidAlpha(f64),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
}

/// Zero-concentrated privacy budget. `rho = 0` is the perfect-privacy limit;
/// it is a valid budget value but noise-adding mechanisms reject it because
/// their noise scale diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZcdpBudget {
    rho: f64,
}

impl ZcdpBudget {
    pub fn new(rho: f64) -> Result<Self, PrivacyError> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(PrivacyError::InvalidRho(rho));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Approximate-DP budget `(epsilon, delta)`. `epsilon = 0` arises only as
/// the image of the perfect-privacy budget `rho = 0` under conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxDpBudget {
    epsilon: f64,
    delta: f64,
}

impl ApproxDpBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, PrivacyError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(PrivacyError::InvalidEpsilon(epsilon));
        }
        check_delta(delta)?;
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// An l2 sensitivity bound for a vector query under one-person replacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBound {
    delta_two: f64,
}

impl SensitivityBound {
    pub fn new(delta_two: f64) -> Result<Self, PrivacyError> {
        if !delta_two.is_finite() || delta_two < 0.0 {
            return Err(PrivacyError::InvalidSensitivity(delta_two));
        }
        Ok(Self { delta_two })
    }

    pub fn delta_two(&self) -> f64 {
        self.delta_two
    }
}

fn check_delta(delta: f64) -> Result<(), PrivacyError> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(PrivacyError::InvalidDelta(delta));
    }
    Ok(())
}

/// Forward conversion: a `rho`-zCDP mechanism is `(epsilon, delta)`-DP with
/// `epsilon = rho + 2*sqrt(rho*ln(1/delta))` for every `delta` in (0, 1).
pub fn zcdp_to_approx_dp(rho: &ZcdpBudget, delta: f64) -> Result<ApproxDpBudget, PrivacyError> {
    check_delta(delta)?;
    let r = rho.rho();
    let epsilon = r + 2.0 * (r * (1.0 / delta).ln()).sqrt();
    ApproxDpBudget::new(epsilon, delta)
}

/// Reverse conversion by binary search: the largest `rho` whose forward
/// `epsilon` does not exceed the target. The search keeps the invariant
/// forward(lo) <= epsilon, so the round trip never loosens the target; the
/// bracket collapses far below the 1e-9 matching tolerance.
pub fn approx_dp_to_zcdp(epsilon: f64, delta: f64) -> Result<ZcdpBudget, PrivacyError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(PrivacyError::InvalidEpsilon(epsilon));
    }
    check_delta(delta)?;
    let forward = |r: f64| r + 2.0 * (r * (1.0 / delta).ln()).sqrt();
    // forward is strictly increasing with forward(0) = 0 and forward(eps) >= eps.
    let mut lo = 0.0_f64;
    let mut hi = epsilon;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if forward(mid) <= epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!(forward(lo) <= epsilon);
    debug_assert!(epsilon - forward(lo) < 1e-9);
    ZcdpBudget::new(lo)
}

/// Noise standard deviation calibrating a query of sensitivity `delta_two`
/// to `rho`-zCDP: `sigma^2 = delta_two^2 / (2*rho)`.
pub fn gaussian_sigma(
    sensitivity: &SensitivityBound,
    rho: &ZcdpBudget,
) -> Result<f64, PrivacyError> {
    if rho.rho() == 0.0 {
        return Err(PrivacyError::ZeroRhoNoise);
    }
    Ok(sensitivity.delta_two() / (2.0 * rho.rho()).sqrt())
}

/// The Gaussian mechanism: adds i.i.d. `N(0, sigma^2)` noise per coordinate
/// with `sigma^2 = delta_two^2 / (2*rho)`. Satisfies `rho`-zCDP for any query
/// with l2 sensitivity at most `delta_two`. Zero sensitivity yields the value
/// unchanged (and consumes no randomness).
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    value: &[f64],
    sensitivity: &SensitivityBound,
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<Vec<f64>, PrivacyError> {
    let sigma = gaussian_sigma(sensitivity, rho)?;
    if sigma == 0.0 {
        return Ok(value.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    Ok(value.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Closed-form Rényi divergence of order `alpha` between `N(m, sigma^2)` and
/// `N(m + mean_gap, sigma^2)`: `alpha * mean_gap^2 / (2*sigma^2)`. Used as an
/// analytic witness that a calibrated Gaussian mechanism meets its zCDP
/// claim: with `sigma^2 = gap^2/(2*rho)` the divergence is exactly `rho*alpha`.
pub fn gaussian_renyi_divergence(
    mean_gap: f64,
    sigma: f64,
    alpha: f64,
) -> Result<f64, PrivacyError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PrivacyError::InvalidSigma(sigma));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(PrivacyError::InvalidAlpha(alpha));
    }
    Ok(alpha * mean_gap * mean_gap / (2.0 * sigma * sigma))
}

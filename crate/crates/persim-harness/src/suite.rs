//! Self-checking suite for the analytic identities the simulations lean on:
//! the exact fingerprinting battery, budget-conversion round trips, and the
//! Rényi-divergence witness that ties each framework's calibrated noise back
//! to its stated budget.

use persim_core::attacks::{
    fingerprint_battery, AttackError, FingerprintReport, DEFAULT_ALPHAS, DEFAULT_TS,
};
use persim_core::learners::{framework_sensitivity, FrameworkKind, LearnerError};
use persim_core::privacy::{
    approx_dp_to_zcdp, gaussian_renyi_divergence, gaussian_sigma, zcdp_to_approx_dp,
    PrivacyError, SensitivityBound, ZcdpBudget,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Tolerance for the conversion's soundness direction (pure float error).
pub const CONVERSION_SOUND_TOLERANCE: f64 = 1e-9;
/// Tolerance for the conversion's tightness direction (bisection width).
pub const CONVERSION_TIGHT_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for the Rényi-divergence witness.
pub const RENYI_RELATIVE_TOLERANCE: f64 = 1e-12;

/// One inverse-then-forward budget conversion round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionCheck {
    pub epsilon: f64,
    pub delta: f64,
    /// Largest zero-concentrated budget whose conversion stays within
    /// (epsilon, delta), found by bisection.
    pub rho: f64,
    /// The forward conversion of that budget back to an epsilon.
    pub forward_epsilon: f64,
    /// Distance to the closed-form inverse `(sqrt(L + eps) - sqrt(L))^2`,
    /// `L = ln(1/delta)`.
    pub closed_form_abs_error: f64,
    /// forward_epsilon <= epsilon (up to float error): the inverse never
    /// overspends the budget.
    pub sound: bool,
    /// forward_epsilon >= epsilon - tolerance: the inverse leaves no slack.
    pub tight: bool,
}

/// One framework noise calibration checked against its budget: the Rényi
/// divergence of order alpha between the mechanism's output distributions on
/// worst-case neighboring inputs must equal `rho * alpha` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenyiCheck {
    pub framework: FrameworkKind,
    pub d: usize,
    pub t: usize,
    pub rho: f64,
    pub alpha: f64,
    pub sensitivity: f64,
    pub sigma: f64,
    pub divergence: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub ok: bool,
}

/// Results of the full identity suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteReport {
    pub fingerprint_reports: Vec<FingerprintReport>,
    pub conversion_checks: Vec<ConversionCheck>,
    pub renyi_checks: Vec<RenyiCheck>,
    /// Human-readable description of every failed check; empty on success.
    pub violations: Vec<String>,
}

impl LemmaSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs every identity check at its default grid and collects violations.
pub fn run_lemma_suite() -> Result<LemmaSuiteReport, SuiteError> {
    let mut violations = Vec::new();

    let fingerprint_reports = fingerprint_battery(&DEFAULT_ALPHAS, &DEFAULT_TS)?;
    for r in &fingerprint_reports {
        if !r.satisfied {
            violations.push(format!(
                "fingerprint {:?} check failed for {} at t={} alpha={:?}: |{} - {}| = {} > {}",
                r.check, r.function, r.t, r.alpha, r.lhs_value, r.target, r.abs_error, r.tolerance
            ));
        }
    }

    let mut conversion_checks = Vec::new();
    for epsilon in [0.1, 0.5, 1.0, 2.0] {
        for delta in [1e-3, 1e-6] {
            let check = conversion_round_trip(epsilon, delta)?;
            if !check.sound {
                violations.push(format!(
                    "conversion at eps={epsilon} delta={delta} overshoots: forward eps {}",
                    check.forward_epsilon
                ));
            }
            if !check.tight {
                violations.push(format!(
                    "conversion at eps={epsilon} delta={delta} leaves slack: forward eps {}",
                    check.forward_epsilon
                ));
            }
            conversion_checks.push(check);
        }
    }

    let mut renyi_checks = Vec::new();
    for framework in [
        FrameworkKind::OneOutOfT,
        FrameworkKind::Jdp,
        FrameworkKind::Billboard,
    ] {
        for (d, t) in [(10, 5), (100, 2), (1000, 50)] {
            for rho in [0.1, 1.0] {
                for alpha in [1.5, 2.0, 8.0] {
                    let check = renyi_witness(framework, d, t, rho, alpha)?;
                    if !check.ok {
                        violations.push(format!(
                            "Rényi witness off for {framework} d={d} t={t} rho={rho} alpha={alpha}: \
                             divergence {} vs expected {}",
                            check.divergence, check.expected
                        ));
                    }
                    renyi_checks.push(check);
                }
            }
        }
    }

    Ok(LemmaSuiteReport {
        fingerprint_reports,
        conversion_checks,
        renyi_checks,
        violations,
    })
}

/// Inverts (epsilon, delta) to the largest admissible zero-concentrated
/// budget, converts it forward again, and compares both against the
/// closed-form inverse.
pub fn conversion_round_trip(epsilon: f64, delta: f64) -> Result<ConversionCheck, SuiteError> {
    let zcdp = approx_dp_to_zcdp(epsilon, delta)?;
    let forward = zcdp_to_approx_dp(&zcdp, delta)?.epsilon();
    let log_inv_delta = (1.0 / delta).ln();
    let closed_form = ((log_inv_delta + epsilon).sqrt() - log_inv_delta.sqrt()).powi(2);
    Ok(ConversionCheck {
        epsilon,
        delta,
        rho: zcdp.rho(),
        forward_epsilon: forward,
        closed_form_abs_error: (zcdp.rho() - closed_form).abs(),
        sound: forward <= epsilon + CONVERSION_SOUND_TOLERANCE,
        tight: forward >= epsilon - CONVERSION_TIGHT_TOLERANCE,
    })
}

/// Calibrates one framework's mechanism and witnesses its budget: with the
/// released vector shifted by the full sensitivity (the worst neighboring
/// gap), the order-alpha Rényi divergence between the two output Gaussians
/// must come out at `rho * alpha`.
pub fn renyi_witness(
    framework: FrameworkKind,
    d: usize,
    t: usize,
    rho: f64,
    alpha: f64,
) -> Result<RenyiCheck, SuiteError> {
    let budget = ZcdpBudget::new(rho)?;
    let sensitivity = framework_sensitivity(framework, d, t);
    let sigma = gaussian_sigma(&SensitivityBound::new(sensitivity)?, &budget)?;
    let divergence = gaussian_renyi_divergence(sensitivity, sigma, alpha)?;
    let expected = rho * alpha;
    let relative_error = (divergence - expected).abs() / expected;
    Ok(RenyiCheck {
        framework,
        d,
        t,
        rho,
        alpha,
        sensitivity,
        sigma,
        divergence,
        expected,
        relative_error,
        ok: relative_error <= RENYI_RELATIVE_TOLERANCE,
    })
}

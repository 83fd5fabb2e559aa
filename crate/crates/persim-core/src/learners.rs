//! The learner matrix, the billboard→metalearning reduction, the
//! classification↔sign-estimation reductions, and the loss functionals.
//!
//! Four frameworks release mean estimates from one sample per person:
//!
//! - nonprivate: person `i` receives the empirical coordinate mean
//!   `p̄_{j_i}` directly;
//! - 1-out-of-t: each released scalar individually carries Gaussian noise of
//!   variance `2/(rho*t^2)` (one released coordinate moves by at most `2/t`
//!   under one-person replacement, so any *single* other output is
//!   `rho`-zCDP toward that person);
//! - joint DP: noise variance `2*(t-1)/(rho*t^2)` (the whole `(t-1)`-vector
//!   shown to colluders has l2 sensitivity `2*sqrt(t-1)/t`);
//! - billboard: one public vector `p̄ + N(0, 2d/(rho*t^2) I_d)` of l2
//!   sensitivity `2*sqrt(d)/t`; each person personalizes by selecting their
//!   own coordinate, so joint DP follows from post-processing.
//!
//! Sign estimation and classification ride on the mean learners through
//! exact reductions; all three losses live here so experiments and exact
//! expectations share one definition.

use crate::privacy::{gaussian_mechanism, PrivacyError, SensitivityBound, ZcdpBudget};
use crate::tasks::{ClassSample, EstSample, MeanInstance};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("learner requires at least one person's data")]
    EmptyData,
    #[error("samples disagree on dimension or carry out-of-range indices")]
    InconsistentData,
    #[error("framework {0:?} requires a zCDP budget")]
    MissingBudget(FrameworkKind),
    #[error("expected exactly {expected} samples per person, person {person} has {got}")]
    WrongSampleCount {
        person: usize,
        expected: usize,
        got: usize,
    },
    #[error("instance and learner output disagree on person count")]
    OutputShapeMismatch,
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
}

/// The privacy frameworks, ordered from weakest to strongest constraint.
/// `Meta` labels the metalearning reduction, which always runs a billboard
/// base learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameworkKind {
    Nonprivate,
    OneOutOfT,
    Jdp,
    Billboard,
    Meta,
}

impl FrameworkKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrameworkKind::Nonprivate => "nonprivate",
            FrameworkKind::OneOutOfT => "one_out_of_t",
            FrameworkKind::Jdp => "jdp",
            FrameworkKind::Billboard => "billboard",
            FrameworkKind::Meta => "meta",
        }
    }

    pub fn requires_budget(&self) -> bool {
        !matches!(self, FrameworkKind::Nonprivate)
    }
}

impl std::fmt::Display for FrameworkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-person mean estimates; billboard-style learners also expose the
/// public representation, and then `per_person_estimate[i]` equals
/// `billboard[j_i]` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanLearnerOutput {
    pub per_person_estimate: Vec<f64>,
    pub billboard: Option<Vec<f64>>,
}

/// Per-person sign estimates in `{±1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignLearnerOutput {
    pub per_person_sign: Vec<i8>,
}

/// Per-person one-feature classifiers: entry `s_i` is the classifier
/// `f_i(x) = s_i * x_{j_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub per_person_sign: Vec<i8>,
}

/// Validates one-sample-per-person data and returns the shared dimension.
fn check_data(data: &[EstSample]) -> Result<usize, LearnerError> {
    let first = data.first().ok_or(LearnerError::EmptyData)?;
    let d = first.x.len();
    if d == 0 {
        return Err(LearnerError::InconsistentData);
    }
    for s in data {
        if s.x.len() != d || s.j >= d {
            return Err(LearnerError::InconsistentData);
        }
    }
    Ok(d)
}

/// Empirical coordinate means over one sample per person.
fn empirical_mean(data: &[EstSample], d: usize) -> Vec<f64> {
    let mut sums = vec![0i64; d];
    for s in data {
        for (acc, &v) in sums.iter_mut().zip(&s.x) {
            *acc += v as i64;
        }
    }
    let t = data.len() as f64;
    sums.into_iter().map(|s| s as f64 / t).collect()
}

/// l2 sensitivity of the released object under one-person replacement.
pub fn framework_sensitivity(framework: FrameworkKind, d: usize, t: usize) -> f64 {
    let t = t as f64;
    match framework {
        FrameworkKind::Nonprivate => 0.0,
        FrameworkKind::OneOutOfT => 2.0 / t,
        FrameworkKind::Jdp => 2.0 * (t - 1.0).sqrt() / t,
        FrameworkKind::Billboard | FrameworkKind::Meta => 2.0 * (d as f64).sqrt() / t,
    }
}

/// Per-released-coordinate Gaussian noise variance for each framework:
/// 0, `2/(rho t^2)`, `2(t-1)/(rho t^2)`, `2d/(rho t^2)`.
pub fn framework_noise_variance(
    framework: FrameworkKind,
    d: usize,
    t: usize,
    rho: Option<&ZcdpBudget>,
) -> Result<f64, LearnerError> {
    if framework == FrameworkKind::Nonprivate {
        return Ok(0.0);
    }
    let rho = rho.ok_or(LearnerError::MissingBudget(framework))?;
    if rho.rho() == 0.0 {
        return Err(PrivacyError::ZeroRhoNoise.into());
    }
    let sens = framework_sensitivity(framework, d, t);
    Ok(sens * sens / (2.0 * rho.rho()))
}

/// Releases `p̄_{j_i}` to person `i` with no noise.
pub fn nonprivate_mean(data: &[EstSample]) -> Result<MeanLearnerOutput, LearnerError> {
    let d = check_data(data)?;
    let mean = empirical_mean(data, d);
    Ok(MeanLearnerOutput {
        per_person_estimate: data.iter().map(|s| mean[s.j]).collect(),
        billboard: None,
    })
}

fn noisy_selection<R: Rng + ?Sized>(
    data: &[EstSample],
    framework: FrameworkKind,
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<MeanLearnerOutput, LearnerError> {
    let d = check_data(data)?;
    let mean = empirical_mean(data, d);
    let selected: Vec<f64> = data.iter().map(|s| mean[s.j]).collect();
    let sens = SensitivityBound::new(framework_sensitivity(framework, d, data.len()))?;
    let noisy = gaussian_mechanism(&selected, &sens, rho, rng)?;
    Ok(MeanLearnerOutput {
        per_person_estimate: noisy,
        billboard: None,
    })
}

/// 1-out-of-t learner: independent noise per released scalar, calibrated to
/// the single-output sensitivity `2/t`.
pub fn one_out_of_t_mean<R: Rng + ?Sized>(
    data: &[EstSample],
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<MeanLearnerOutput, LearnerError> {
    noisy_selection(data, FrameworkKind::OneOutOfT, rho, rng)
}

/// Joint-DP learner: independent per-person noise calibrated to the
/// colluder-view sensitivity `2*sqrt(t-1)/t`. At `t = 1` the colluder set is
/// empty, the sensitivity degenerates to 0, and the release is nonprivate;
/// bound experiments exclude that case.
pub fn jdp_mean<R: Rng + ?Sized>(
    data: &[EstSample],
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<MeanLearnerOutput, LearnerError> {
    noisy_selection(data, FrameworkKind::Jdp, rho, rng)
}

/// Billboard learner: publishes the full noisy mean vector once; each person
/// personalizes by reading their own coordinate.
pub fn billboard_mean<R: Rng + ?Sized>(
    data: &[EstSample],
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<MeanLearnerOutput, LearnerError> {
    let d = check_data(data)?;
    let mean = empirical_mean(data, d);
    let sens = SensitivityBound::new(framework_sensitivity(
        FrameworkKind::Billboard,
        d,
        data.len(),
    ))?;
    let board = gaussian_mechanism(&mean, &sens, rho, rng)?;
    Ok(MeanLearnerOutput {
        per_person_estimate: data.iter().map(|s| board[s.j]).collect(),
        billboard: Some(board),
    })
}

/// Billboard release with the noise removed: publishes the empirical mean
/// itself. Attack experiments use it as the unprotected baseline; it carries
/// no privacy guarantee.
pub fn billboard_mean_noiseless(data: &[EstSample]) -> Result<MeanLearnerOutput, LearnerError> {
    let d = check_data(data)?;
    let mean = empirical_mean(data, d);
    Ok(MeanLearnerOutput {
        per_person_estimate: data.iter().map(|s| mean[s.j]).collect(),
        billboard: Some(mean),
    })
}

/// Dispatch over the framework matrix. `Meta` runs its billboard base
/// learner; the held-out evaluation lives in [`meta_from_billboard`].
pub fn mean_learner<R: Rng + ?Sized>(
    framework: FrameworkKind,
    data: &[EstSample],
    rho: Option<&ZcdpBudget>,
    rng: &mut R,
) -> Result<MeanLearnerOutput, LearnerError> {
    match framework {
        FrameworkKind::Nonprivate => nonprivate_mean(data),
        fw => {
            let rho = rho.ok_or(LearnerError::MissingBudget(fw))?;
            match fw {
                FrameworkKind::OneOutOfT => one_out_of_t_mean(data, rho, rng),
                FrameworkKind::Jdp => jdp_mean(data, rho, rng),
                FrameworkKind::Billboard | FrameworkKind::Meta => billboard_mean(data, rho, rng),
                FrameworkKind::Nonprivate => unreachable!(),
            }
        }
    }
}

/// Billboard→metalearning reduction: train the billboard on the `t` training
/// tasks only, then personalize the *unseen* test task by coordinate
/// selection. Returns the public representation and the test-task estimate.
pub fn meta_from_billboard<R: Rng + ?Sized>(
    train_data: &[EstSample],
    test_sample: &EstSample,
    rho: &ZcdpBudget,
    rng: &mut R,
) -> Result<(Vec<f64>, f64), LearnerError> {
    let d = check_data(train_data)?;
    if test_sample.j >= d || test_sample.x.len() != d {
        return Err(LearnerError::InconsistentData);
    }
    let out = billboard_mean(train_data, rho, rng)?;
    let board = out.billboard.expect("billboard learner sets the field");
    let estimate = board[test_sample.j];
    Ok((board, estimate))
}

/// Sign of each mean estimate, with `sign(0) = +1` (continuous noise makes a
/// zero estimate a null event; the fixed tie-break keeps the map
/// deterministic).
pub fn sign_from_mean(out: &MeanLearnerOutput) -> SignLearnerOutput {
    SignLearnerOutput {
        per_person_sign: out
            .per_person_estimate
            .iter()
            .map(|&e| if e >= 0.0 { 1 } else { -1 })
            .collect(),
    }
}

/// Reads a sign vector as one-feature classifiers `f_i(x) = s_i * x_{j_i}`.
pub fn classifier_from_sign(signs: &SignLearnerOutput) -> ClassifierOutput {
    ClassifierOutput {
        per_person_sign: signs.per_person_sign.clone(),
    }
}

/// Label-unscrambling transform: `w_j = x_j * y`, identity elsewhere. The
/// result is distributed exactly as a raw product-distribution draw.
pub fn class_to_est_transform(sample: &ClassSample) -> EstSample {
    let mut x = sample.x.clone();
    x[sample.j] *= sample.y;
    EstSample { x, j: sample.j }
}

/// Label-scrambling transform: draws a fresh uniform label and hides it in
/// the target coordinate. Inverse of [`class_to_est_transform`] for the
/// drawn label.
pub fn est_to_class_transform<R: Rng + ?Sized>(sample: &EstSample, rng: &mut R) -> ClassSample {
    let y: i8 = if rng.next_u64() & 1 == 1 { 1 } else { -1 };
    let mut x = sample.x.clone();
    x[sample.j] *= y;
    ClassSample { x, j: sample.j, y }
}

/// Sign estimation from any multitask classification learner using two
/// samples per person: the first (scrambled with a fresh label) trains the
/// classifier, the second recovers the sign by evaluating the learned
/// classifier on its own scrambled target coordinate:
/// `s_i = f_i(x2_{j_i}) * x2_{j_i}`.
pub fn sign_estimator_from_classifier<R, F>(
    classify: F,
    data: &[Vec<EstSample>],
    rng: &mut R,
) -> Result<SignLearnerOutput, LearnerError>
where
    R: Rng + ?Sized,
    F: FnOnce(&[Vec<ClassSample>]) -> Result<ClassifierOutput, LearnerError>,
{
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    for (person, row) in data.iter().enumerate() {
        if row.len() != 2 {
            return Err(LearnerError::WrongSampleCount {
                person,
                expected: 2,
                got: row.len(),
            });
        }
    }
    let train: Vec<Vec<ClassSample>> = data
        .iter()
        .map(|row| vec![est_to_class_transform(&row[0], rng)])
        .collect();
    let classifier = classify(&train)?;
    if classifier.per_person_sign.len() != data.len() {
        return Err(LearnerError::OutputShapeMismatch);
    }
    let per_person_sign = data
        .iter()
        .zip(&classifier.per_person_sign)
        .map(|(row, &s)| {
            let held_out = est_to_class_transform(&row[1], rng);
            let feature = held_out.x[held_out.j];
            // evaluate f_i at the held-out target coordinate, then unscramble
            let predicted = s * feature;
            predicted * feature
        })
        .collect();
    Ok(SignLearnerOutput { per_person_sign })
}

/// Classification learner for the framework matrix: unscrambles the labels,
/// runs the framework's mean learner, and thresholds the estimates into
/// one-feature classifiers.
pub fn class_learner<R: Rng + ?Sized>(
    framework: FrameworkKind,
    data: &[ClassSample],
    rho: Option<&ZcdpBudget>,
    rng: &mut R,
) -> Result<ClassifierOutput, LearnerError> {
    let est: Vec<EstSample> = data.iter().map(class_to_est_transform).collect();
    let mean = mean_learner(framework, &est, rho, rng)?;
    Ok(classifier_from_sign(&sign_from_mean(&mean)))
}

fn check_output_shape(inst: &MeanInstance, len: usize) -> Result<(), LearnerError> {
    if inst.t() != len {
        return Err(LearnerError::OutputShapeMismatch);
    }
    Ok(())
}

/// Mean-estimation loss, averaged over people: `(1/t) Σ (1/4)(p̂ - p_{j_i})^2`.
/// The 1/4 keeps the per-person loss inside [0, 1].
pub fn loss_mean(inst: &MeanInstance, out: &MeanLearnerOutput) -> Result<f64, LearnerError> {
    check_output_shape(inst, out.per_person_estimate.len())?;
    let total: f64 = out
        .per_person_estimate
        .iter()
        .zip(inst.j())
        .map(|(&est, &j)| {
            let e = est - inst.p()[j];
            0.25 * e * e
        })
        .sum();
    Ok(total / inst.t() as f64)
}

fn sign_vector_loss(inst: &MeanInstance, signs: &[i8]) -> Result<f64, LearnerError> {
    check_output_shape(inst, signs.len())?;
    let total: f64 = signs
        .iter()
        .zip(inst.j())
        .map(|(&s, &j)| {
            let p = inst.p()[j];
            // 1{s != sign(p)} |p|, equal to (|p| - s*p)/2 for s in {±1}
            if (s as f64) * p < 0.0 {
                p.abs()
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / inst.t() as f64)
}

/// Sign-estimation loss: `(1/t) Σ 1{s_i != sign(p_{j_i})} |p_{j_i}|`.
pub fn loss_sign(inst: &MeanInstance, out: &SignLearnerOutput) -> Result<f64, LearnerError> {
    sign_vector_loss(inst, &out.per_person_sign)
}

/// Excess misclassification risk of the one-feature classifiers over the
/// per-person Bayes optimum, in closed form. A classifier `s * x_j` errs
/// with probability `(1 - s*p_j)/2` while the optimum achieves
/// `(1 - |p_j|)/2`, so the excess is exactly `1{s != sign(p_j)} |p_j|` —
/// identical in value to [`loss_sign`] on the same sign vector.
pub fn loss_class_analytic(
    inst: &MeanInstance,
    out: &ClassifierOutput,
) -> Result<f64, LearnerError> {
    sign_vector_loss(inst, &out.per_person_sign)
}

/// Misclassification rate of the best single-feature classifier on target
/// coordinate mean `p`: `(1 - |p|)/2`.
pub fn optimal_misclassification_rate(p: f64) -> f64 {
    (1.0 - p.abs()) / 2.0
}

/// Exact expected mean-estimation loss for a fixed instance:
/// `(1/(4t)) Σ_i [(1 - p_{j_i}^2)/t + sigma2_framework]`. The first term is
/// the sampling variance of one empirical-mean coordinate; the second is the
/// framework's noise variance.
pub fn expected_loss_mean_fixed(
    inst: &MeanInstance,
    framework: FrameworkKind,
    rho: Option<&ZcdpBudget>,
) -> Result<f64, LearnerError> {
    let t = inst.t();
    let sigma2 = framework_noise_variance(framework, inst.d(), t, rho)?;
    let total: f64 = inst
        .j()
        .iter()
        .map(|&j| {
            let p = inst.p()[j];
            (1.0 - p * p) / t as f64 + sigma2
        })
        .sum();
    Ok(total / (4.0 * t as f64))
}

/// Exact expected mean-estimation loss under hard instances
/// (`p ~ Uniform[-lambda, lambda]` per coordinate, so `E[1 - p^2] = 1 -
/// lambda^2/3`): `(1/4)[(1 - lambda^2/3)/t + sigma2_framework]`.
pub fn expected_loss_mean_uniform(
    framework: FrameworkKind,
    d: usize,
    t: usize,
    lambda: f64,
    rho: Option<&ZcdpBudget>,
) -> Result<f64, LearnerError> {
    let sigma2 = framework_noise_variance(framework, d, t, rho)?;
    Ok(((1.0 - lambda * lambda / 3.0) / t as f64 + sigma2) / 4.0)
}

/// The frameworks' stated expected-loss upper bounds for mean estimation:
/// `1/(4t) + sigma2_framework/4` (the exact law with the worst-case sampling
/// term `1 - p^2 <= 1`).
pub fn mean_loss_bound(
    framework: FrameworkKind,
    d: usize,
    t: usize,
    rho: Option<&ZcdpBudget>,
) -> Result<f64, LearnerError> {
    let sigma2 = framework_noise_variance(framework, d, t, rho)?;
    Ok(1.0 / (4.0 * t as f64) + sigma2 / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::tasks::sample_est_one;

    fn est(x: Vec<i8>, j: usize) -> EstSample {
        EstSample { x, j }
    }

    #[test]
    fn nonprivate_hand_example() {
        let data = vec![est(vec![1, -1], 0), est(vec![-1, -1], 1)];
        let out = nonprivate_mean(&data).unwrap();
        assert_eq!(out.per_person_estimate, vec![0.0, -1.0]);
        assert!(out.billboard.is_none());
    }

    #[test]
    fn nonprivate_all_ones() {
        let data = vec![est(vec![1, 1], 0), est(vec![1, 1], 1), est(vec![1, 1], 0)];
        let out = nonprivate_mean(&data).unwrap();
        assert_eq!(out.per_person_estimate, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn one_out_of_t_vanishing_noise_limit() {
        let inst = MeanInstance::constant(4, 4, 0.0).unwrap();
        let data = sample_est_one(&inst, &mut stream_rng(1, 0));
        let base = nonprivate_mean(&data).unwrap();
        let rho = ZcdpBudget::new(1e18).unwrap();
        let noisy = one_out_of_t_mean(&data, &rho, &mut stream_rng(1, 1)).unwrap();
        for (a, b) in noisy
            .per_person_estimate
            .iter()
            .zip(&base.per_person_estimate)
        {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn noise_variance_formulas() {
        let rho = ZcdpBudget::new(2.0).unwrap();
        let v = |fw, d, t| framework_noise_variance(fw, d, t, Some(&rho)).unwrap();
        assert_eq!(v(FrameworkKind::Nonprivate, 10, 10), 0.0);
        // 2/(rho t^2) at t=10: 2/200
        assert!((v(FrameworkKind::OneOutOfT, 10, 10) - 0.01).abs() < 1e-15);
        // t=2: 2(t-1)/(rho t^2) = 1/(2 rho)
        assert!((v(FrameworkKind::Jdp, 10, 2) - 0.25).abs() < 1e-15);
        // d=1 billboard coincides with the 1-out-of-t level
        assert_eq!(
            v(FrameworkKind::Billboard, 1, 7),
            v(FrameworkKind::OneOutOfT, 1, 7)
        );
        assert_eq!(
            v(FrameworkKind::Meta, 13, 7),
            v(FrameworkKind::Billboard, 13, 7)
        );
        // jdp at t=1 degenerates to zero noise
        assert_eq!(v(FrameworkKind::Jdp, 10, 1), 0.0);
    }

    #[test]
    fn billboard_consistency_invariant() {
        let inst = MeanInstance::new(vec![0.2; 6], vec![3, 0, 3, 5]).unwrap();
        let data = sample_est_one(&inst, &mut stream_rng(2, 0));
        let rho = ZcdpBudget::new(0.5).unwrap();
        let out = billboard_mean(&data, &rho, &mut stream_rng(2, 1)).unwrap();
        let board = out.billboard.as_ref().unwrap();
        assert_eq!(board.len(), 6);
        for (i, &j) in inst.j().iter().enumerate() {
            assert_eq!(out.per_person_estimate[i], board[j]);
        }
        // equal indices receive identical estimates
        assert_eq!(out.per_person_estimate[0], out.per_person_estimate[2]);
    }

    #[test]
    fn meta_shares_training_coordinates() {
        let inst = MeanInstance::new(vec![0.0; 4], vec![1, 2, 3]).unwrap();
        let data = sample_est_one(&inst, &mut stream_rng(3, 0));
        let rho = ZcdpBudget::new(1.0).unwrap();
        let test = est(vec![1, 1, 1, 1], 2);
        let (board, estimate) = meta_from_billboard(&data, &test, &rho, &mut stream_rng(3, 1)).unwrap();
        assert_eq!(estimate, board[2]);
    }

    #[test]
    fn sign_conventions() {
        let out = MeanLearnerOutput {
            per_person_estimate: vec![0.3, -0.7, 0.0],
            billboard: None,
        };
        let signs = sign_from_mean(&out);
        assert_eq!(signs.per_person_sign, vec![1, -1, 1]);
        // positive scaling leaves signs unchanged
        let scaled = MeanLearnerOutput {
            per_person_estimate: out.per_person_estimate.iter().map(|v| v * 17.5).collect(),
            billboard: None,
        };
        assert_eq!(sign_from_mean(&scaled).per_person_sign, signs.per_person_sign);
    }

    #[test]
    fn transforms_are_mutually_inverse() {
        let class = ClassSample {
            x: vec![1, -1, 1],
            j: 1,
            y: -1,
        };
        let w = class_to_est_transform(&class);
        assert_eq!(w.x, vec![1, 1, 1]);
        assert_eq!(w.j, 1);
        // scrambling then unscrambling recovers the point
        let mut rng = stream_rng(4, 0);
        for _ in 0..32 {
            let scrambled = est_to_class_transform(&w, &mut rng);
            let back = class_to_est_transform(&scrambled);
            assert_eq!(back, w);
        }
    }

    #[test]
    fn losses_on_hand_cases() {
        let inst = MeanInstance::new(vec![0.6, 0.0], vec![0]).unwrap();
        // exact estimate: zero loss
        let exact = MeanLearnerOutput {
            per_person_estimate: vec![0.6],
            billboard: None,
        };
        assert_eq!(loss_mean(&inst, &exact).unwrap(), 0.0);
        // off by 2 with t=1: maximal loss 1
        let off = MeanLearnerOutput {
            per_person_estimate: vec![-1.4],
            billboard: None,
        };
        assert!((loss_mean(&inst, &off).unwrap() - 1.0).abs() < 1e-15);
        // wrong sign pays |p|
        let wrong = SignLearnerOutput {
            per_person_sign: vec![-1],
        };
        assert!((loss_sign(&inst, &wrong).unwrap() - 0.6).abs() < 1e-15);
        let right = SignLearnerOutput {
            per_person_sign: vec![1],
        };
        assert_eq!(loss_sign(&inst, &right).unwrap(), 0.0);
    }

    #[test]
    fn sign_loss_identity() {
        // 1{s != sign(p)}|p| == (|p| - s p)/2 for s in {±1}
        let inst = MeanInstance::new(vec![0.37, -0.82, 0.0], vec![0, 1, 2]).unwrap();
        for s0 in [-1i8, 1] {
            for s1 in [-1i8, 1] {
                for s2 in [-1i8, 1] {
                    let signs = SignLearnerOutput {
                        per_person_sign: vec![s0, s1, s2],
                    };
                    let direct = loss_sign(&inst, &signs).unwrap();
                    let via_identity: f64 = signs
                        .per_person_sign
                        .iter()
                        .zip(inst.j())
                        .map(|(&s, &j)| {
                            let p = inst.p()[j];
                            (p.abs() - s as f64 * p) / 2.0
                        })
                        .sum::<f64>()
                        / 3.0;
                    assert!((direct - via_identity).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn classifier_loss_equals_sign_loss() {
        let inst = MeanInstance::new(vec![0.4, -0.9, 0.05], vec![2, 0, 1, 1]).unwrap();
        let signs = SignLearnerOutput {
            per_person_sign: vec![1, -1, 1, -1],
        };
        let classifier = classifier_from_sign(&signs);
        assert_eq!(
            loss_sign(&inst, &signs).unwrap(),
            loss_class_analytic(&inst, &classifier).unwrap()
        );
    }

    #[test]
    fn optimal_rate() {
        assert_eq!(optimal_misclassification_rate(0.4), 0.3);
        assert_eq!(optimal_misclassification_rate(-0.4), 0.3);
        assert_eq!(optimal_misclassification_rate(0.0), 0.5);
    }

    #[test]
    fn sign_estimator_recovers_perfect_classifier() {
        // a classifier that already knows sign(p) yields s = sign(p)
        let inst = MeanInstance::new(vec![0.8, -0.8], vec![0, 1]).unwrap();
        let mut rng = stream_rng(5, 0);
        let data: Vec<Vec<EstSample>> = crate::tasks::sample_est_data(&inst, 2, &mut rng).unwrap();
        let out = sign_estimator_from_classifier(
            |_train| {
                Ok(ClassifierOutput {
                    per_person_sign: vec![1, -1],
                })
            },
            &data,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.per_person_sign, vec![1, -1]);
    }

    #[test]
    fn sign_estimator_rejects_wrong_sample_count() {
        let inst = MeanInstance::new(vec![0.0], vec![0]).unwrap();
        let mut rng = stream_rng(6, 0);
        let data = crate::tasks::sample_est_data(&inst, 3, &mut rng).unwrap();
        let err = sign_estimator_from_classifier(
            |_| {
                Ok(ClassifierOutput {
                    per_person_sign: vec![1],
                })
            },
            &data,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, LearnerError::WrongSampleCount { .. }));
    }

    #[test]
    fn exact_law_fixed_zero_means() {
        // p = 0, t = 50, rho = 1: nonprivate 0.005, 1oot 0.0052, jdp 0.0148,
        // billboard(d=1000) 0.205
        let rho = ZcdpBudget::new(1.0).unwrap();
        let inst = MeanInstance::constant(1000, 50, 0.0).unwrap();
        let law = |fw| expected_loss_mean_fixed(&inst, fw, Some(&rho)).unwrap();
        assert!((law(FrameworkKind::Nonprivate) - 0.005).abs() < 1e-15);
        assert!((law(FrameworkKind::OneOutOfT) - 0.0052).abs() < 1e-15);
        assert!((law(FrameworkKind::Jdp) - 0.0148).abs() < 1e-15);
        assert!((law(FrameworkKind::Billboard) - 0.205).abs() < 1e-15);
    }

    #[test]
    fn exact_law_uniform_examples() {
        let rho = ZcdpBudget::new(1.0).unwrap();
        // (1/4)((2/3)/50 + 2*2000/2500) = 0.40333...
        let bb =
            expected_loss_mean_uniform(FrameworkKind::Billboard, 2000, 50, 1.0, Some(&rho)).unwrap();
        assert!((bb - 0.403_333_333_333_333_3).abs() < 1e-12);
        // (1/4)((2/3)/50 + 2*49/2500) = 0.013133...
        let jdp =
            expected_loss_mean_uniform(FrameworkKind::Jdp, 2000, 50, 1.0, Some(&rho)).unwrap();
        assert!((jdp - 0.013_133_333_333_333_3).abs() < 1e-12);
        // nonprivate at t=100: (1/4)(2/3)/100
        let non =
            expected_loss_mean_uniform(FrameworkKind::Nonprivate, 2000, 100, 1.0, None).unwrap();
        assert!((non - 0.001_666_666_666_666_666_7).abs() < 1e-15);
    }

    #[test]
    fn stated_bounds_dominate_exact_law() {
        let rho = ZcdpBudget::new(0.3).unwrap();
        let inst = MeanInstance::constant(64, 16, 0.0).unwrap();
        for fw in [
            FrameworkKind::Nonprivate,
            FrameworkKind::OneOutOfT,
            FrameworkKind::Jdp,
            FrameworkKind::Billboard,
        ] {
            let rho_opt = fw.requires_budget().then_some(&rho);
            let law = expected_loss_mean_fixed(&inst, fw, rho_opt).unwrap();
            let bound = mean_loss_bound(fw, 64, 16, rho_opt).unwrap();
            assert!(law <= bound + 1e-15, "{fw}: {law} > {bound}");
        }
    }

    #[test]
    fn learners_validate_input() {
        assert!(nonprivate_mean(&[]).is_err());
        let bad = vec![est(vec![1, 1], 0), est(vec![1], 0)];
        assert!(nonprivate_mean(&bad).is_err());
        let oob = vec![est(vec![1, 1], 2)];
        assert!(nonprivate_mean(&oob).is_err());
        let rho = ZcdpBudget::new(0.0).unwrap();
        let data = vec![est(vec![1, 1], 0)];
        assert!(one_out_of_t_mean(&data, &rho, &mut stream_rng(0, 0)).is_err());
        assert!(mean_learner(
            FrameworkKind::Jdp,
            &data,
            None,
            &mut stream_rng(0, 0)
        )
        .is_err());
    }
}

//! Acceptance suite: one test per stated exit criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture`) before asserting.
//!
//! Run with: `cargo test -p persim-harness --test acceptance -- --nocapture`

use persim_core::attacks::{
    fingerprint_battery, fingerprint_buv_lhs_exact, membership_inference_experiment,
    FingerprintCheck, MembershipConfig, DEFAULT_ALPHAS, DEFAULT_TS,
};
use persim_core::learners::{
    classifier_from_sign, class_to_est_transform, est_to_class_transform, loss_class_analytic,
    loss_sign, FrameworkKind, SignLearnerOutput,
};
use persim_core::privacy::approx_dp_to_zcdp;
use persim_core::rng::stream_rng;
use persim_core::tasks::{draw_hard_mean_instance, sample_class_one, sample_est_one};
use persim_harness::config::{ExperimentConfig, InstanceMode, ProblemKind, ResolvedConfig};
use persim_harness::runner::{run_experiment, run_separation_sweep};
use persim_harness::suite::run_lemma_suite;
use rand::Rng;
use std::process::Command;

fn verdict(criterion: usize, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn resolved(
    problem: ProblemKind,
    framework: FrameworkKind,
    d: usize,
    t: usize,
    rho: Option<f64>,
    instance: InstanceMode,
    trials: usize,
    seed: u64,
) -> ResolvedConfig {
    ExperimentConfig {
        problem,
        framework,
        d,
        t,
        n: 1,
        rho,
        epsilon: None,
        delta: None,
        instance,
        trials,
        seed,
        sweep_d: None,
        sweep_t: None,
    }
    .resolve()
    .unwrap()
}

/// Mean-estimation losses match the exact per-framework law at p = 0,
/// t = 50, rho = 1 over 100k trials, within three standard errors:
/// nonprivate 0.005, 1-out-of-t 0.0052, joint 0.0148, billboard (d = 1000)
/// 0.205.
#[test]
fn criterion_1_mean_losses_match_framework_laws() {
    let cases: [(FrameworkKind, usize, Option<f64>, f64); 4] = [
        (FrameworkKind::Nonprivate, 50, None, 0.005),
        (FrameworkKind::OneOutOfT, 50, Some(1.0), 0.0052),
        (FrameworkKind::Jdp, 50, Some(1.0), 0.0148),
        (FrameworkKind::Billboard, 1000, Some(1.0), 0.205),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (framework, d, rho, law) in cases {
        let cfg = resolved(
            ProblemKind::Mean,
            framework,
            d,
            50,
            rho,
            InstanceMode::FixedP { value: 0.0 },
            100_000,
            4201,
        );
        let report = run_experiment(&cfg).unwrap().report;
        let exact = report.exact_expected_loss.unwrap();
        let case_ok = (exact - law).abs() < 1e-12
            && (report.mean_loss - law).abs() <= 3.0 * report.standard_error
            && report.bound_satisfied;
        ok &= case_ok;
        details.push(format!(
            "{framework}: mean {:.6} vs law {law} (3se {:.2e})",
            report.mean_loss,
            3.0 * report.standard_error
        ));
    }
    verdict(1, ok, &details.join("; "));
}

/// Sweeping d in {500, 1000, 2000} at t = 50, rho = 1 (5000 trials per
/// point): the billboard loss grows linearly in d with slope within 10% of
/// the law's 1/(2 rho t^2); the joint and 1-out-of-t slopes are zero within
/// three standard errors; and the framework ordering holds at every point.
#[test]
fn criterion_2_separation_sweep_slopes_and_ordering() {
    let base = resolved(
        ProblemKind::Mean,
        FrameworkKind::Billboard,
        500,
        50,
        Some(1.0),
        InstanceMode::FixedP { value: 0.0 },
        5000,
        77,
    );
    let report = run_separation_sweep(&base, &[500, 1000, 2000], &[50]).unwrap();
    let fit = |fw: FrameworkKind| {
        report
            .slopes
            .iter()
            .find(|f| f.framework == fw)
            .expect("framework fitted")
    };
    let law_slope = 1.0 / (2.0 * 1.0 * 2500.0);
    let billboard = fit(FrameworkKind::Billboard);
    let billboard_ok = (billboard.expected_slope - law_slope).abs() < 1e-15
        && (billboard.slope - law_slope).abs() <= 0.10 * law_slope;
    let flat_ok = [FrameworkKind::OneOutOfT, FrameworkKind::Jdp]
        .into_iter()
        .all(|fw| {
            let f = fit(fw);
            f.expected_slope.abs() < 1e-15 && f.slope.abs() <= 3.0 * f.slope_se
        });
    let ordering_ok = report.ordering_violations.is_empty();
    verdict(
        2,
        billboard_ok && flat_ok && ordering_ok,
        &format!(
            "billboard slope {:.6e} vs law {law_slope:.6e} (10% = {:.1e}); 1oot slope {:.2e} (3se {:.2e}); jdp slope {:.2e} (3se {:.2e}); ordering violations: {}",
            billboard.slope,
            0.10 * law_slope,
            fit(FrameworkKind::OneOutOfT).slope,
            3.0 * fit(FrameworkKind::OneOutOfT).slope_se,
            fit(FrameworkKind::Jdp).slope,
            3.0 * fit(FrameworkKind::Jdp).slope_se,
            report.ordering_violations.len()
        ),
    );
}

/// The metalearning reduction's held-out loss obeys the group-privacy
/// transfer: at the budget whose conversion hits epsilon = 1 (delta = 1e-6),
/// mean held-out loss <= e^eps * (multitask billboard mean loss) + delta,
/// with three standard errors of slack, on hard instances (d = 500, t = 50,
/// 10k trials).
#[test]
fn criterion_3_meta_loss_within_group_privacy_transfer() {
    let rho = approx_dp_to_zcdp(1.0, 1e-6).unwrap().rho();
    let instance = InstanceMode::UniformHard { lambda: 1.0 };
    let meta_cfg = resolved(
        ProblemKind::MetaMean,
        FrameworkKind::Billboard,
        500,
        50,
        Some(rho),
        instance,
        10_000,
        4203,
    );
    let multi_cfg = resolved(
        ProblemKind::Mean,
        FrameworkKind::Billboard,
        500,
        50,
        Some(rho),
        instance,
        10_000,
        4204,
    );
    let eps = meta_cfg.budget.unwrap().epsilon;
    assert!(
        (0.999998..=1.0 + 1e-9).contains(&eps),
        "resolved epsilon {eps}"
    );
    let meta = run_experiment(&meta_cfg).unwrap().report;
    let multi = run_experiment(&multi_cfg).unwrap().report;
    let ceiling = eps.exp() * multi.mean_loss + 1e-6;
    let slack = 3.0 * meta.standard_error.hypot(eps.exp() * multi.standard_error);
    let ok = meta.mean_loss <= ceiling + slack;
    verdict(
        3,
        ok,
        &format!(
            "held-out mean {:.4} vs ceiling e^{eps:.6} * {:.4} + 1e-6 = {:.4} (slack {:.4})",
            meta.mean_loss, multi.mean_loss, ceiling, slack
        ),
    );
}

/// The fingerprinting identity holds to 1e-7 for every battery function at
/// every alpha in {0.1, 0.5, 1.0} and t in {1, 2, 3, 5}, and the
/// expectation lower bound stays above 1/3 - 1e-8 everywhere, achieving
/// 1/3 to 1e-10 at its tight case (the zero function at t = 1).
#[test]
fn criterion_4_fingerprint_identities_and_lower_bound() {
    let reports = fingerprint_battery(&DEFAULT_ALPHAS, &DEFAULT_TS).unwrap();
    let identities_ok = reports
        .iter()
        .filter(|r| r.check == FingerprintCheck::Identity)
        .all(|r| r.satisfied && r.abs_error <= 1e-7);
    let bound_ok = reports
        .iter()
        .filter(|r| r.check == FingerprintCheck::LowerBound)
        .all(|r| r.satisfied && r.lhs_value >= 1.0 / 3.0 - 1e-8);
    let tight = fingerprint_buv_lhs_exact(|_| 0.0, 1).unwrap();
    let tight_ok = (tight - 1.0 / 3.0).abs() <= 1e-10;
    let identity_count = reports
        .iter()
        .filter(|r| r.check == FingerprintCheck::Identity)
        .count();
    verdict(
        4,
        identities_ok && bound_ok && tight_ok && identity_count == 60,
        &format!(
            "{identity_count} identities and {} lower bounds checked; tight case |{tight:.12} - 1/3| = {:.2e}",
            reports.len() - identity_count,
            (tight - 1.0 / 3.0).abs()
        ),
    );
}

/// Every framework's calibrated mechanism witnesses its budget: the
/// order-alpha Rényi divergence on worst-case neighbors equals rho * alpha
/// to 1e-12 relative error across the (framework, d, t, rho, alpha) grid,
/// and the budget conversion round trip never exceeds the requested epsilon
/// while staying tight.
#[test]
fn criterion_5_noise_calibration_witnesses_budgets() {
    let suite = run_lemma_suite().unwrap();
    let renyi_ok = !suite.renyi_checks.is_empty()
        && suite
            .renyi_checks
            .iter()
            .all(|c| c.ok && c.relative_error <= 1e-12);
    let conversion_ok = !suite.conversion_checks.is_empty()
        && suite.conversion_checks.iter().all(|c| c.sound && c.tight);
    verdict(
        5,
        renyi_ok && conversion_ok && suite.all_passed(),
        &format!(
            "{} calibration witnesses, {} conversion round trips, {} violations",
            suite.renyi_checks.len(),
            suite.conversion_checks.len(),
            suite.violations.len()
        ),
    );
}

/// Membership inference at d = 10000, t = 20 over 1000 trials: against the
/// noiseless billboard the tracing statistic identifies the target with
/// true-positive rate at least 0.5 at false-positive rate 0.05, while
/// against the calibrated billboard at the epsilon = 1 budget the
/// true-positive rate stays under the privacy ceiling e^eps * fpr + delta.
#[test]
fn criterion_6_membership_attack_and_privacy_ceiling() {
    let noiseless = MembershipConfig {
        framework: FrameworkKind::Billboard,
        d: 10_000,
        t: 20,
        rho: None,
        delta: 1e-6,
        lambda: 1.0,
        trials: 1000,
        fpr: 0.05,
        coupled: true,
        seed: 606,
    };
    let exposed = membership_inference_experiment(&noiseless).unwrap();
    let attack_ok = exposed.true_positive_rate >= 0.5;

    let rho = approx_dp_to_zcdp(1.0, 1e-6).unwrap().rho();
    let private = MembershipConfig {
        rho: Some(rho),
        seed: 607,
        ..noiseless.clone()
    };
    let defended = membership_inference_experiment(&private).unwrap();
    let ceiling = defended.tpr_dp_bound.unwrap();
    let defended_ok =
        defended.true_positive_rate <= ceiling + 3.0 * defended.tpr_standard_error;
    verdict(
        6,
        attack_ok && defended_ok,
        &format!(
            "noiseless TPR {:.3} (need >= 0.5); private TPR {:.3} vs ceiling {:.3} at FPR {:.3}",
            exposed.true_positive_rate,
            defended.true_positive_rate,
            ceiling,
            defended.false_positive_rate
        ),
    );
}

/// The classification/sign-estimation reductions are exact: the one-feature
/// classifier loss equals the sign loss identically on 10k random sign
/// vectors; the label transforms invert each other on 10k samples; and the
/// measured classification loss at t = 50 is dominated by twice the square
/// root of the measured estimation loss.
#[test]
fn criterion_7_reduction_identities_and_domination() {
    let mut rng = stream_rng(707, 0);
    let mut identity_ok = true;
    for _ in 0..10_000 {
        let inst = draw_hard_mean_instance(6, 5, 1.0, &mut rng).unwrap();
        let signs = SignLearnerOutput {
            per_person_sign: (0..5).map(|_| if rng.random() { 1 } else { -1 }).collect(),
        };
        let sign_loss = loss_sign(&inst, &signs).unwrap();
        let class_loss = loss_class_analytic(&inst, &classifier_from_sign(&signs)).unwrap();
        identity_ok &= sign_loss == class_loss;
    }

    let mut inverse_ok = true;
    for _ in 0..2_000 {
        let inst = draw_hard_mean_instance(5, 5, 0.9, &mut rng).unwrap();
        // scrambling then unscrambling restores the raw sample exactly
        for est in sample_est_one(&inst, &mut rng) {
            let scrambled = est_to_class_transform(&est, &mut rng);
            inverse_ok &= class_to_est_transform(&scrambled) == est;
        }
        // unscrambling then rescrambling with the same label restores the
        // labeled sample exactly
        for class in sample_class_one(&inst, &mut rng) {
            let raw = class_to_est_transform(&class);
            let mut back = raw.x.clone();
            back[raw.j] *= class.y;
            inverse_ok &= back == class.x && raw.j == class.j;
        }
    }

    let instance = InstanceMode::UniformHard { lambda: 1.0 };
    let mean_cfg = resolved(
        ProblemKind::Mean,
        FrameworkKind::Jdp,
        100,
        50,
        Some(0.5),
        instance,
        10_000,
        7007,
    );
    let class_cfg = ResolvedConfig {
        problem: ProblemKind::Class,
        ..mean_cfg.clone()
    };
    let mean_report = run_experiment(&mean_cfg).unwrap().report;
    let class_report = run_experiment(&class_cfg).unwrap().report;
    let domination_ok = class_report.mean_loss - 3.0 * class_report.standard_error
        <= 2.0 * (mean_report.mean_loss + 3.0 * mean_report.standard_error).sqrt();
    verdict(
        7,
        identity_ok && inverse_ok && domination_ok,
        &format!(
            "loss identity on 10k sign vectors: {identity_ok}; transform inverses on 20k samples: {inverse_ok}; class mean {:.4} <= 2 sqrt(est mean {:.4}) = {:.4}",
            class_report.mean_loss,
            mean_report.mean_loss,
            2.0 * mean_report.mean_loss.sqrt()
        ),
    );
}

/// Running the CLI twice on the same configuration produces byte-identical
/// record files, in both output formats.
#[test]
fn criterion_8_cli_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    std::fs::write(
        &config_path,
        r#"{
            "problem": "mean", "framework": "jdp",
            "d": 16, "t": 8, "rho": 0.3,
            "instance": {"kind": "uniform_hard", "lambda": 0.9},
            "trials": 500, "seed": 99
        }"#,
    )
    .unwrap();
    let mut ok = true;
    let mut sizes = Vec::new();
    for format in ["csv", "json"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        for out in [&a, &b] {
            let status = Command::new(env!("CARGO_BIN_EXE_persim"))
                .args(["run", "--config"])
                .arg(&config_path)
                .args(["--format", format, "--out"])
                .arg(out)
                .status()
                .unwrap();
            ok &= status.success();
        }
        let bytes_a = std::fs::read(&a).unwrap();
        let bytes_b = std::fs::read(&b).unwrap();
        ok &= !bytes_a.is_empty() && bytes_a == bytes_b;
        sizes.push(format!("{format}: {} bytes", bytes_a.len()));
    }
    verdict(
        8,
        ok,
        &format!("identical reruns ({})", sizes.join(", ")),
    );
}

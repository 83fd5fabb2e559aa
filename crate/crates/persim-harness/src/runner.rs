//! Trial execution and aggregation: one seeded record per trial, parallel
//! execution, Monte Carlo error bars, exact expected losses where a closed
//! form exists, the frameworks' stated upper bounds, and the separation
//! sweep that fits loss-versus-dimension slopes per framework.

use crate::config::{InstanceMode, ProblemKind, ResolvedConfig};
use persim_core::learners::{
    class_learner, class_to_est_transform, expected_loss_mean_fixed, expected_loss_mean_uniform,
    framework_noise_variance, loss_class_analytic, loss_mean, loss_sign, mean_learner,
    mean_loss_bound, meta_from_billboard, sign_from_mean, FrameworkKind, LearnerError,
};
use persim_core::privacy::ZcdpBudget;
use persim_core::rng::{Channel, TrialRng};
use persim_core::tasks::{
    draw_hard_mean_instance, draw_meta_instance, sample_class_data, sample_est_data, sample_x,
    EstSample, MeanInstance, MetaInstance, TaskError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("separation sweeps need a privacy budget for their private frameworks")]
    SweepNeedsBudget,
}

/// The frameworks a separation sweep compares, ordered by the loss law
/// (for t >= 2 and any fixed budget, each one's exact expected loss is no
/// smaller than the previous one's).
pub const SWEEP_FRAMEWORKS: [FrameworkKind; 4] = [
    FrameworkKind::Nonprivate,
    FrameworkKind::OneOutOfT,
    FrameworkKind::Jdp,
    FrameworkKind::Billboard,
];

/// One simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub loss: f64,
}

/// Monte Carlo aggregate over all trials of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trials: usize,
    pub mean_loss: f64,
    pub standard_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Framework noise variance per released coordinate.
    pub noise_variance: f64,
    /// The framework's stated expected-loss upper bound for this problem.
    pub theoretical_bound: f64,
    /// Whether `mean_loss <= theoretical_bound + 3 * standard_error`.
    pub bound_satisfied: bool,
    /// Exact expected loss when a closed form exists (the mean-style
    /// problems); `None` for the sign and classification losses.
    pub exact_expected_loss: Option<f64>,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ResolvedConfig,
    pub records: Vec<TrialRecord>,
    pub report: AggregateReport,
}

/// Runs every trial of the configuration in parallel and aggregates.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunnerError> {
    let records = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| replay_trial(cfg, trial))
        .collect::<Result<Vec<_>, _>>()?;
    let report = aggregate(cfg, &records)?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        records,
        report,
    })
}

/// Runs a single trial and returns its record. Replaying any trial of a
/// finished experiment reproduces its record bit for bit: every random draw
/// comes from a fixed channel of the trial's own seeded stream family, so
/// trials are independent of each other and of execution order.
pub fn replay_trial(cfg: &ResolvedConfig, trial: u64) -> Result<TrialRecord, RunnerError> {
    let rng = TrialRng::new(cfg.seed, trial);
    let zcdp = cfg.budget.map(|b| b.zcdp());
    let rho = zcdp.as_ref();
    let loss = match cfg.problem {
        ProblemKind::Mean => {
            let inst = mean_instance_for_trial(cfg, &rng)?;
            let data = first_est_samples(&inst, cfg.n, &rng)?;
            let out = mean_learner(cfg.framework, &data, rho, &mut rng.channel(Channel::Noise))?;
            loss_mean(&inst, &out)?
        }
        ProblemKind::Sign => {
            let inst = mean_instance_for_trial(cfg, &rng)?;
            let data = first_est_samples(&inst, cfg.n, &rng)?;
            let out = mean_learner(cfg.framework, &data, rho, &mut rng.channel(Channel::Noise))?;
            loss_sign(&inst, &sign_from_mean(&out))?
        }
        ProblemKind::Class => {
            let inst = mean_instance_for_trial(cfg, &rng)?;
            let data = sample_class_data(&inst, cfg.n, &mut rng.channel(Channel::Data))?;
            let first: Vec<_> = data.iter().map(|row| row[0].clone()).collect();
            let out = class_learner(cfg.framework, &first, rho, &mut rng.channel(Channel::Noise))?;
            loss_class_analytic(&inst, &out)?
        }
        ProblemKind::MetaMean | ProblemKind::MetaClass => {
            let inst = meta_instance_for_trial(cfg, &rng)?;
            let estimate = meta_estimate(cfg, &inst, &rng, rho)?;
            let p_test = inst.p()[inst.test_index()];
            if cfg.problem == ProblemKind::MetaMean {
                let e = estimate - p_test;
                0.25 * e * e
            } else {
                // the test-task classifier is sign(estimate) * x_j; its
                // excess misclassification risk over the per-task optimum is
                // |p_test| exactly when the sign is wrong, else 0
                let sign = if estimate >= 0.0 { 1.0 } else { -1.0 };
                if sign * p_test < 0.0 {
                    p_test.abs()
                } else {
                    0.0
                }
            }
        }
    };
    Ok(TrialRecord { trial, loss })
}

fn mean_instance_for_trial(
    cfg: &ResolvedConfig,
    rng: &TrialRng,
) -> Result<MeanInstance, TaskError> {
    match cfg.instance {
        InstanceMode::FixedP { value } => MeanInstance::constant(cfg.d, cfg.t, value),
        InstanceMode::UniformHard { lambda } => {
            draw_hard_mean_instance(cfg.d, cfg.t, lambda, &mut rng.channel(Channel::Instance))
        }
    }
}

fn meta_instance_for_trial(
    cfg: &ResolvedConfig,
    rng: &TrialRng,
) -> Result<MetaInstance, TaskError> {
    match cfg.instance {
        InstanceMode::FixedP { value } => {
            let j = (0..=cfg.t).map(|i| i % cfg.d).collect();
            MetaInstance::new(vec![value; cfg.d], j, 1.0)
        }
        InstanceMode::UniformHard { lambda } => {
            draw_meta_instance(cfg.d, cfg.t, lambda, &mut rng.channel(Channel::Instance))
        }
    }
}

/// Draws `n` samples per person from the data channel and keeps each
/// person's first; the learners consume one sample per person.
fn first_est_samples(
    inst: &MeanInstance,
    n: usize,
    rng: &TrialRng,
) -> Result<Vec<EstSample>, TaskError> {
    let data = sample_est_data(inst, n, &mut rng.channel(Channel::Data))?;
    Ok(data.into_iter().map(|mut row| row.swap_remove(0)).collect())
}

/// Trains the billboard on the training tasks only and personalizes the
/// held-out test task. Metalearning classification trains from
/// label-scrambled samples and unscrambles them first, which reproduces the
/// raw product draws exactly.
fn meta_estimate(
    cfg: &ResolvedConfig,
    inst: &MetaInstance,
    rng: &TrialRng,
    rho: Option<&ZcdpBudget>,
) -> Result<f64, RunnerError> {
    let budget = rho.ok_or(LearnerError::MissingBudget(FrameworkKind::Meta))?;
    let train_inst = inst.train_instance();
    let train: Vec<EstSample> = if cfg.problem == ProblemKind::MetaClass {
        let class = sample_class_data(&train_inst, cfg.n, &mut rng.channel(Channel::Data))?;
        class
            .iter()
            .map(|row| class_to_est_transform(&row[0]))
            .collect()
    } else {
        first_est_samples(&train_inst, cfg.n, rng)?
    };
    let test = EstSample {
        x: sample_x(inst.p(), &mut rng.channel(Channel::TestTask)),
        j: inst.test_index(),
    };
    let (_board, estimate) =
        meta_from_billboard(&train, &test, budget, &mut rng.channel(Channel::Noise))?;
    Ok(estimate)
}

fn aggregate(cfg: &ResolvedConfig, records: &[TrialRecord]) -> Result<AggregateReport, RunnerError> {
    let n = records.len();
    let nf = n as f64;
    let mean = records.iter().map(|r| r.loss).sum::<f64>() / nf;
    let variance = if n > 1 {
        records
            .iter()
            .map(|r| {
                let e = r.loss - mean;
                e * e
            })
            .sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };
    let se = (variance / nf).sqrt();
    let zcdp = cfg.budget.map(|b| b.zcdp());
    let noise_variance = framework_noise_variance(cfg.framework, cfg.d, cfg.t, zcdp.as_ref())?;
    let bound = theoretical_bound(cfg)?;
    Ok(AggregateReport {
        trials: n,
        mean_loss: mean,
        standard_error: se,
        ci95_low: mean - 1.96 * se,
        ci95_high: mean + 1.96 * se,
        noise_variance,
        theoretical_bound: bound,
        bound_satisfied: mean <= bound + 3.0 * se,
        exact_expected_loss: exact_expected_loss(cfg)?,
    })
}

/// The framework's expected-loss upper bound for the configured problem:
///
/// - mean estimation: `1/(4t) + noise_variance/4`;
/// - sign estimation and classification: `2 sqrt(mean bound)`, via the
///   estimation-to-sign reduction (a wrong sign at coordinate mean p forces
///   an estimation error of at least |p|);
/// - metalearning mean: `e^epsilon * (mean bound) + delta` — the privacy
///   guarantee itself transfers the in-sample guarantee to the unseen task;
/// - metalearning classification: the sign reduction applied on top.
pub fn theoretical_bound(cfg: &ResolvedConfig) -> Result<f64, RunnerError> {
    let zcdp = cfg.budget.map(|b| b.zcdp());
    let mean_bound = mean_loss_bound(cfg.framework, cfg.d, cfg.t, zcdp.as_ref())?;
    Ok(match cfg.problem {
        ProblemKind::Mean => mean_bound,
        ProblemKind::Sign | ProblemKind::Class => 2.0 * mean_bound.sqrt(),
        ProblemKind::MetaMean | ProblemKind::MetaClass => {
            let budget = cfg
                .budget
                .ok_or(LearnerError::MissingBudget(FrameworkKind::Meta))?;
            let meta_bound = budget.epsilon.exp() * mean_bound + budget.delta;
            if cfg.problem == ProblemKind::MetaMean {
                meta_bound
            } else {
                2.0 * meta_bound.sqrt()
            }
        }
    })
}

/// Closed-form expected loss where one exists.
///
/// Mean estimation follows `(1/(4t)) sum_i [(1 - p_{j_i}^2)/t +
/// noise_variance]`. The metalearning mean obeys the same law for its
/// held-out coordinate: under the product distribution every coordinate of
/// every training sample is an independent ±1 variable with that
/// coordinate's mean, so the billboard entry at the unseen index carries the
/// same sampling variance `(1 - p^2)/t` plus noise as a seen one.
pub fn exact_expected_loss(cfg: &ResolvedConfig) -> Result<Option<f64>, RunnerError> {
    let zcdp = cfg.budget.map(|b| b.zcdp());
    let rho = zcdp.as_ref();
    Ok(match (cfg.problem, cfg.instance) {
        (ProblemKind::Mean | ProblemKind::MetaMean, InstanceMode::FixedP { value }) => {
            let inst = MeanInstance::constant(cfg.d, cfg.t, value)?;
            Some(expected_loss_mean_fixed(&inst, cfg.framework, rho)?)
        }
        (ProblemKind::Mean | ProblemKind::MetaMean, InstanceMode::UniformHard { lambda }) => Some(
            expected_loss_mean_uniform(cfg.framework, cfg.d, cfg.t, lambda, rho)?,
        ),
        _ => None,
    })
}

/// One grid point of a separation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub d: usize,
    pub t: usize,
    pub framework: FrameworkKind,
    pub mean_loss: f64,
    pub standard_error: f64,
    pub exact_expected_loss: f64,
    pub theoretical_bound: f64,
}

/// Least-squares fit of one framework's loss against the dimension axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub framework: FrameworkKind,
    pub t: usize,
    /// OLS slope of the measured mean loss against d.
    pub slope: f64,
    /// Standard error propagated from the independent per-point errors.
    pub slope_se: f64,
    /// OLS slope of the exact expected loss against d. The law is affine in
    /// d, so this equals its d-coefficient: `1/(2 rho t^2)` for the
    /// billboard framework and exactly zero for the other three.
    pub expected_slope: f64,
}

/// A full separation sweep: per-point results, per-framework slope fits,
/// and any violations of the law's framework ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base_fingerprint: String,
    pub points: Vec<SweepPoint>,
    pub slopes: Vec<SlopeFit>,
    /// Whenever the exact law says one framework loses no more than the
    /// next at a grid point, the measured means must agree within three
    /// joint standard errors; each failure is described here.
    pub ordering_violations: Vec<String>,
}

impl SweepReport {
    /// Slope fits whose measured slope sits more than `k` standard errors
    /// from the law's d-coefficient.
    pub fn slope_violations(&self, k: f64) -> Vec<String> {
        self.slopes
            .iter()
            .filter(|fit| (fit.slope - fit.expected_slope).abs() > k * fit.slope_se)
            .map(|fit| {
                format!(
                    "{} at t={}: slope {:.6e} sits {:.1} standard errors from the law's {:.6e}",
                    fit.framework,
                    fit.t,
                    fit.slope,
                    ((fit.slope - fit.expected_slope) / fit.slope_se).abs(),
                    fit.expected_slope
                )
            })
            .collect()
    }
}

/// Measures the mean-estimation loss of all four frameworks over a (d, t)
/// grid, fits each framework's loss-versus-d slope, and checks the loss
/// law's framework ordering at every grid point. The sweep always measures
/// mean estimation — the problem whose law separates the frameworks — and
/// reuses the base config's instance mode, trial count, sample count, and
/// budget. Every grid point gets its own derived seed so points are
/// statistically independent.
pub fn run_separation_sweep(
    base: &ResolvedConfig,
    d_axis: &[usize],
    t_axis: &[usize],
) -> Result<SweepReport, RunnerError> {
    let mut points = Vec::new();
    let mut slopes = Vec::new();
    let mut violations = Vec::new();
    for &t in t_axis {
        let mut by_framework: Vec<Vec<SweepPoint>> = Vec::new();
        for fw in SWEEP_FRAMEWORKS {
            let mut profile = Vec::new();
            for &d in d_axis {
                let cfg = point_config(base, d, t, fw)?;
                let out = run_experiment(&cfg)?;
                let exact = exact_expected_loss(&cfg)?.expect("mean problems have a closed form");
                profile.push(SweepPoint {
                    d,
                    t,
                    framework: fw,
                    mean_loss: out.report.mean_loss,
                    standard_error: out.report.standard_error,
                    exact_expected_loss: exact,
                    theoretical_bound: out.report.theoretical_bound,
                });
            }
            if axis_spread(d_axis) {
                slopes.push(fit_slope(&profile));
            }
            by_framework.push(profile);
        }
        for di in 0..d_axis.len() {
            for pair in by_framework.windows(2) {
                let (a, b) = (&pair[0][di], &pair[1][di]);
                // guard on the law: at t = 1 the colluder-view noise
                // degenerates to zero and the middle links reverse, so only
                // law-backed inequalities are enforced
                if a.exact_expected_loss <= b.exact_expected_loss + 1e-12 {
                    let slack = 3.0 * a.standard_error.hypot(b.standard_error);
                    if a.mean_loss > b.mean_loss + slack {
                        violations.push(format!(
                            "at d={}, t={}: {} mean loss {:.6} exceeds {} mean loss {:.6} by more than the slack {:.6}",
                            a.d, a.t, a.framework, a.mean_loss, b.framework, b.mean_loss, slack
                        ));
                    }
                }
            }
        }
        points.extend(by_framework.into_iter().flatten());
    }
    Ok(SweepReport {
        base_fingerprint: base.fingerprint(),
        points,
        slopes,
        ordering_violations: violations,
    })
}

fn point_config(
    base: &ResolvedConfig,
    d: usize,
    t: usize,
    framework: FrameworkKind,
) -> Result<ResolvedConfig, RunnerError> {
    let budget = if framework.requires_budget() {
        Some(base.budget.ok_or(RunnerError::SweepNeedsBudget)?)
    } else {
        None
    };
    Ok(ResolvedConfig {
        problem: ProblemKind::Mean,
        framework,
        d,
        t,
        n: base.n,
        budget,
        instance: base.instance,
        trials: base.trials,
        seed: point_seed(base.seed, d, t, framework),
    })
}

/// Deterministic per-point seed: a digest of the base seed and the grid
/// coordinates, so distinct points draw independent randomness while the
/// whole sweep stays reproducible.
fn point_seed(base_seed: u64, d: usize, t: usize, framework: FrameworkKind) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update((d as u64).to_le_bytes());
    hasher.update((t as u64).to_le_bytes());
    hasher.update(framework.name().as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// True when the axis has at least two distinct values (a slope is defined).
fn axis_spread(axis: &[usize]) -> bool {
    axis.len() >= 2 && axis.iter().any(|&d| d != axis[0])
}

/// Ordinary least squares of loss against d. The slope is `sum_i w_i y_i`
/// with `w_i = (d_i - mean_d)/Sxx`, so independent per-point errors
/// propagate to `se^2 = sum_i w_i^2 se_i^2`. Applying the same weights to
/// the exact expected losses recovers the law's d-coefficient exactly.
fn fit_slope(profile: &[SweepPoint]) -> SlopeFit {
    let n = profile.len() as f64;
    let dbar = profile.iter().map(|p| p.d as f64).sum::<f64>() / n;
    let sxx: f64 = profile.iter().map(|p| (p.d as f64 - dbar).powi(2)).sum();
    let mut slope = 0.0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    for p in profile {
        let w = (p.d as f64 - dbar) / sxx;
        slope += w * p.mean_loss;
        expected += w * p.exact_expected_loss;
        variance += w * w * p.standard_error * p.standard_error;
    }
    SlopeFit {
        framework: profile[0].framework,
        t: profile[0].t,
        slope,
        slope_se: variance.sqrt(),
        expected_slope: expected,
    }
}

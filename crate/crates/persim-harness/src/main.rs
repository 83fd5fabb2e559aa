//! Command-line harness: run experiments, sweep the framework separations,
//! check the analytic identities, mount the membership-inference attack, and
//! convert between privacy-budget forms.
//!
//! Exit codes: 0 success; 1 configuration or usage error; 2 a measured
//! quantity violated a stated bound or identity; 3 output I/O failure.

use clap::{Parser, Subcommand};
use persim_core::attacks::{
    membership_inference_experiment, AttackError, MembershipConfig, MembershipReport,
    TrialStatistic,
};
use persim_core::privacy::{approx_dp_to_zcdp, zcdp_to_approx_dp, PrivacyError, ZcdpBudget};
use persim_harness::config::{ConfigError, ExperimentConfig};
use persim_harness::emit::{self, EmitError, OutputFormat};
use persim_harness::runner::{run_experiment, run_separation_sweep, RunnerError};
use persim_harness::suite::{run_lemma_suite, SuiteError};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "persim", version, about = "Simulation harness for private personalized learning")]
struct Cli {
    /// Cap the worker thread pool (defaults to all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and emit per-trial records.
    Run {
        /// Path to a .json or .toml experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Record output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Also write the aggregate report as JSON to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare all four frameworks over the config's d axis (and optional
    /// t axis), fit loss-versus-d slopes, and check the loss-law ordering.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the per-point trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Sweep report file (JSON); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the analytic identities (fingerprinting battery, budget
    /// conversions, noise-calibration witnesses) and report violations.
    Lemmas {
        /// Suite report file (JSON); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a membership-inference experiment from a config file.
    Attack {
        /// Path to a .json or .toml membership config.
        #[arg(long)]
        config: PathBuf,
        /// Report file (JSON); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-trial statistics as CSV to this path.
        #[arg(long)]
        trial_stats: Option<PathBuf>,
    },
    /// Convert a privacy budget between its two forms and print both.
    Convert {
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Emit(_) => ExitCode::from(3),
            _ => ExitCode::from(1),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.parallelism {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            format,
            report,
        } => cmd_run(&config, seed, trials, out.as_deref(), format, report.as_deref()),
        Command::Sweep {
            config,
            seed,
            trials,
            out,
        } => cmd_sweep(&config, seed, trials, out.as_deref()),
        Command::Lemmas { out } => cmd_lemmas(out.as_deref()),
        Command::Attack {
            config,
            out,
            trial_stats,
        } => cmd_attack(&config, out.as_deref(), trial_stats.as_deref()),
        Command::Convert {
            rho,
            epsilon,
            delta,
        } => cmd_convert(rho, epsilon, delta),
    }
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<&Path>,
    format: OutputFormat,
    report_path: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = trials {
        cfg.trials = n;
    }
    let resolved = cfg.resolve()?;
    eprintln!(
        "run {}: {}",
        resolved.fingerprint(),
        serde_json::to_string(&resolved).map_err(EmitError::from)?
    );
    let output = run_experiment(&resolved)?;
    let flat = emit::flatten(&output);
    match out {
        Some(path) => emit::write_records_to_path(path, format, &flat)?,
        None => {
            let stdout = std::io::stdout();
            match format {
                OutputFormat::Csv => emit::write_csv(stdout.lock(), &flat)?,
                OutputFormat::Json => emit::write_json(stdout.lock(), &flat)?,
            }
        }
    }
    if let Some(path) = report_path {
        emit::write_json_report(path, &output.report)?;
    }
    let r = &output.report;
    let law = r
        .exact_expected_loss
        .map(|v| format!(", exact law {v:.6}"))
        .unwrap_or_default();
    eprintln!(
        "mean loss {:.6} +/- {:.6} over {} trials (bound {:.6}{law})",
        r.mean_loss, r.standard_error, r.trials, r.theoretical_bound
    );
    if !r.bound_satisfied {
        eprintln!(
            "violation: mean loss {} exceeds the stated bound {} beyond three standard errors",
            r.mean_loss, r.theoretical_bound
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    config_path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = trials {
        cfg.trials = n;
    }
    let d_axis = cfg.sweep_d_axis()?;
    let t_axis = cfg.sweep_t_axis();
    let resolved = cfg.resolve()?;
    eprintln!(
        "sweep {} over d={d_axis:?}, t={t_axis:?}, {} trials per point",
        resolved.fingerprint(),
        resolved.trials
    );
    let report = run_separation_sweep(&resolved, &d_axis, &t_axis)?;
    write_json_value(out, &report)?;
    for fit in &report.slopes {
        eprintln!(
            "{} at t={}: slope {:.3e} +/- {:.3e} (law {:.3e})",
            fit.framework, fit.t, fit.slope, fit.slope_se, fit.expected_slope
        );
    }
    let mut violations = report.ordering_violations.clone();
    violations.extend(report.slope_violations(4.0));
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_lemmas(out: Option<&Path>) -> Result<ExitCode, CliError> {
    let report = run_lemma_suite()?;
    write_json_value(out, &report)?;
    eprintln!(
        "checked {} fingerprint identities/bounds, {} conversions, {} calibration witnesses",
        report.fingerprint_reports.len(),
        report.conversion_checks.len(),
        report.renyi_checks.len()
    );
    if !report.all_passed() {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        return Ok(ExitCode::from(2));
    }
    eprintln!("all identities hold");
    Ok(ExitCode::SUCCESS)
}

fn cmd_attack(
    config_path: &Path,
    out: Option<&Path>,
    trial_stats: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|source| ConfigError::Read {
        path: config_path.display().to_string(),
        source,
    })?;
    let cfg = parse_membership(&text, config_path.extension().and_then(|e| e.to_str()))?;
    eprintln!(
        "attack on {} (d={}, t={}, rho={:?}, {} trials)",
        cfg.framework, cfg.d, cfg.t, cfg.rho, cfg.trials
    );
    let report = membership_inference_experiment(&cfg)?;
    write_json_value(out, &report)?;
    if let Some(path) = trial_stats {
        write_trial_stats(path, &report.trial_statistics)?;
    }
    describe_attack(&report);
    if let Some(bound) = report.tpr_dp_bound {
        if report.true_positive_rate > bound + 3.0 * report.tpr_standard_error {
            eprintln!(
                "violation: true-positive rate {} exceeds the privacy ceiling {} beyond three standard errors",
                report.true_positive_rate, bound
            );
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn describe_attack(report: &MembershipReport) {
    eprintln!(
        "TPR {:.4} +/- {:.4} at realized FPR {:.4} (threshold {:.4})",
        report.true_positive_rate,
        report.tpr_standard_error,
        report.false_positive_rate,
        report.threshold
    );
    if let Some(bound) = report.tpr_dp_bound {
        eprintln!("privacy ceiling on TPR: {bound:.4}");
    }
    if let Some(eps) = report.implied_epsilon {
        eprintln!("implied epsilon from the (TPR, FPR) pair: {eps:.4}");
    }
}

fn cmd_convert(
    rho: Option<f64>,
    epsilon: Option<f64>,
    delta: f64,
) -> Result<ExitCode, CliError> {
    #[derive(Serialize)]
    struct BothForms {
        rho: f64,
        epsilon: f64,
        delta: f64,
    }
    let both = match (rho, epsilon) {
        (Some(r), None) => {
            let zcdp = ZcdpBudget::new(r)?;
            let approx = zcdp_to_approx_dp(&zcdp, delta)?;
            BothForms {
                rho: r,
                epsilon: approx.epsilon(),
                delta,
            }
        }
        (None, Some(e)) => {
            let zcdp = approx_dp_to_zcdp(e, delta)?;
            BothForms {
                rho: zcdp.rho(),
                epsilon: e,
                delta,
            }
        }
        _ => {
            return Err(CliError::Usage(
                "set exactly one of --rho or --epsilon".into(),
            ))
        }
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&both).map_err(EmitError::from)?
    );
    Ok(ExitCode::SUCCESS)
}

/// Writes a JSON report to the path, or pretty-prints it on stdout.
fn write_json_value<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(path) => emit::write_json_report(path, value)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value).map_err(EmitError::from)?;
            writeln!(lock).map_err(|source| EmitError::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    Ok(())
}

fn parse_membership(text: &str, extension: Option<&str>) -> Result<MembershipConfig, CliError> {
    let parse_err = |e: String| CliError::Config(ConfigError::Parse(e));
    match extension {
        Some("json") => serde_json::from_str(text).map_err(|e| parse_err(e.to_string())),
        Some("toml") => toml::from_str(text).map_err(|e| parse_err(e.to_string())),
        _ => serde_json::from_str(text)
            .map_err(|e| e.to_string())
            .or_else(|json_err| {
                toml::from_str(text).map_err(|toml_err| format!("{json_err}; {toml_err}"))
            })
            .map_err(parse_err),
    }
}

fn write_trial_stats(path: &Path, stats: &[TrialStatistic]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(std::io::BufWriter::new(file));
    let as_emit = |e: csv::Error| CliError::Emit(EmitError::Csv(e));
    w.write_record(["trial", "in_sample", "resampled"])
        .map_err(as_emit)?;
    for s in stats {
        w.serialize(s).map_err(as_emit)?;
    }
    w.flush()
        .map_err(csv::Error::from)
        .map_err(as_emit)?;
    Ok(())
}

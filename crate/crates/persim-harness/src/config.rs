//! Experiment configuration: ingestion (JSON or TOML), validation, budget
//! resolution, and the canonical fingerprint that ties records back to the
//! exact configuration that produced them.

use persim_core::learners::FrameworkKind;
use persim_core::privacy::{approx_dp_to_zcdp, zcdp_to_approx_dp, PrivacyError, ZcdpBudget};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config as JSON or TOML: {0}")]
    Parse(String),
    #[error("d, t, n, and trials must all be at least 1")]
    ZeroSize,
    #[error("framework {0} needs a privacy budget: set exactly one of rho or epsilon")]
    MissingBudget(FrameworkKind),
    #[error("set exactly one of rho or epsilon, not both")]
    AmbiguousBudget,
    #[error("the nonprivate framework takes no budget fields")]
    UnexpectedBudget,
    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("fixed coordinate mean must lie in [-1, 1], got {0}")]
    FixedMeanOutOfRange(f64),
    #[error("lambda must lie in (0, 1], got {0}")]
    LambdaOutOfRange(f64),
    #[error("problem {problem} is incompatible with framework {framework}")]
    ProblemFrameworkMismatch {
        problem: ProblemKind,
        framework: FrameworkKind,
    },
    #[error("a fixed-mean metalearning instance needs |value| <= lambda = 1")]
    FixedMeanBeyondLambda,
    #[error("sweep axis needs at least 3 points for a regression, got {0}")]
    SweepAxisTooShort(usize),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
}

/// Which loss the experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Mean estimation, squared-error loss.
    Mean,
    /// Sign estimation, |p|-weighted misprediction loss.
    Sign,
    /// Classification, excess misclassification risk in closed form.
    Class,
    /// Metalearning mean estimation: billboard trained without the test task.
    MetaMean,
    /// Metalearning classification on the held-out test task.
    MetaClass,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Mean => "mean",
            ProblemKind::Sign => "sign",
            ProblemKind::Class => "class",
            ProblemKind::MetaMean => "meta_mean",
            ProblemKind::MetaClass => "meta_class",
        }
    }

    pub fn is_meta(&self) -> bool {
        matches!(self, ProblemKind::MetaMean | ProblemKind::MetaClass)
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How each trial obtains its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceMode {
    /// Every coordinate mean equals `value`; person `i` targets coordinate
    /// `i mod d`. Deterministic, so the exact loss law applies verbatim.
    FixedP { value: f64 },
    /// Fresh instance per trial: means uniform on [-lambda, lambda], indices
    /// uniform — the distribution the attack analyses assume.
    UniformHard { lambda: f64 },
}

fn default_n() -> usize {
    1
}
fn default_trials() -> usize {
    10_000
}

/// An experiment as written by the user; `resolve` validates it and derives
/// the missing budget form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub framework: FrameworkKind,
    pub d: usize,
    pub t: usize,
    /// Samples drawn per person; the learners consume only the first.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Used whenever converting between budget forms; defaults to 1e-6.
    #[serde(default)]
    pub delta: Option<f64>,
    pub instance: InstanceMode,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional sweep axis over d (the `sweep` subcommand requires it).
    #[serde(default)]
    pub sweep_d: Option<Vec<usize>>,
    /// Optional sweep axis over t; defaults to the single configured t.
    #[serde(default)]
    pub sweep_t: Option<Vec<usize>>,
}

/// Both budget forms, recorded together after resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBudget {
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl ResolvedBudget {
    pub fn zcdp(&self) -> ZcdpBudget {
        ZcdpBudget::new(self.rho).expect("validated at resolution")
    }
}

/// A validated configuration with the derived budget form filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub problem: ProblemKind,
    pub framework: FrameworkKind,
    pub d: usize,
    pub t: usize,
    pub n: usize,
    /// `None` exactly for the nonprivate framework.
    pub budget: Option<ResolvedBudget>,
    pub instance: InstanceMode,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Reads a config from a `.json` or `.toml` file (tries both syntaxes if
    /// the extension is ambiguous).
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_auto(&text, path.extension().and_then(|e| e.to_str()))
    }

    fn from_str_auto(text: &str, extension: Option<&str>) -> Result<Self, ConfigError> {
        match extension {
            Some("json") => serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string())),
            Some("toml") => toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string())),
            _ => serde_json::from_str(text)
                .map_err(|e| e.to_string())
                .or_else(|json_err| {
                    toml::from_str(text)
                        .map_err(|toml_err| format!("{json_err}; {toml_err}"))
                })
                .map_err(ConfigError::Parse),
        }
    }

    /// Validates sizes, the budget XOR rule, instance parameters, and
    /// problem/framework compatibility; converts the supplied budget form to
    /// the other one so both are recorded.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        if self.d == 0 || self.t == 0 || self.n == 0 || self.trials == 0 {
            return Err(ConfigError::ZeroSize);
        }
        let framework = match (self.problem.is_meta(), self.framework) {
            // metalearning always runs the billboard base learner
            (true, FrameworkKind::Billboard | FrameworkKind::Meta) => FrameworkKind::Meta,
            (true, other) => {
                return Err(ConfigError::ProblemFrameworkMismatch {
                    problem: self.problem,
                    framework: other,
                })
            }
            (false, FrameworkKind::Meta) => {
                return Err(ConfigError::ProblemFrameworkMismatch {
                    problem: self.problem,
                    framework: FrameworkKind::Meta,
                })
            }
            (false, other) => other,
        };
        match self.instance {
            InstanceMode::FixedP { value } => {
                if !value.is_finite() || value.abs() > 1.0 {
                    return Err(ConfigError::FixedMeanOutOfRange(value));
                }
            }
            InstanceMode::UniformHard { lambda } => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return Err(ConfigError::LambdaOutOfRange(lambda));
                }
            }
        }
        let delta = self.delta.unwrap_or(1e-6);
        let budget = if framework.requires_budget() {
            match (self.rho, self.epsilon) {
                (Some(_), Some(_)) => return Err(ConfigError::AmbiguousBudget),
                (None, None) => return Err(ConfigError::MissingBudget(framework)),
                (Some(rho), None) => {
                    if !(rho > 0.0) {
                        return Err(ConfigError::NonPositiveRho(rho));
                    }
                    let zcdp = ZcdpBudget::new(rho)?;
                    let eps = zcdp_to_approx_dp(&zcdp, delta)?.epsilon();
                    Some(ResolvedBudget {
                        rho,
                        epsilon: eps,
                        delta,
                    })
                }
                (None, Some(epsilon)) => {
                    let zcdp = approx_dp_to_zcdp(epsilon, delta)?;
                    Some(ResolvedBudget {
                        rho: zcdp.rho(),
                        epsilon,
                        delta,
                    })
                }
            }
        } else {
            if self.rho.is_some() || self.epsilon.is_some() {
                return Err(ConfigError::UnexpectedBudget);
            }
            None
        };
        Ok(ResolvedConfig {
            problem: self.problem,
            framework,
            d: self.d,
            t: self.t,
            n: self.n,
            budget,
            instance: self.instance,
            trials: self.trials,
            seed: self.seed,
        })
    }

    /// The d-axis for a separation sweep (validated length >= 3).
    pub fn sweep_d_axis(&self) -> Result<Vec<usize>, ConfigError> {
        let axis = self.sweep_d.clone().unwrap_or_default();
        if axis.len() < 3 {
            return Err(ConfigError::SweepAxisTooShort(axis.len()));
        }
        Ok(axis)
    }

    /// The t-axis for a sweep; defaults to the configured t.
    pub fn sweep_t_axis(&self) -> Vec<usize> {
        match &self.sweep_t {
            Some(axis) if !axis.is_empty() => axis.clone(),
            _ => vec![self.t],
        }
    }
}

impl ResolvedConfig {
    /// Canonical fingerprint: SHA-256 of the canonical JSON encoding,
    /// truncated to 16 hex digits. Identical configs fingerprint identically
    /// across runs and platforms because the encoding is deterministic.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

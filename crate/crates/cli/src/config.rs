//! Experiment configuration: a TOML document covering the dataset source,
//! bundle and fairness parameters, solver choice, and session shape. Unknown
//! keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use fairbundle_core::fairness::{AdaptiveWeight, FairnessSpec, ToleranceSchedule};
use fairbundle_core::model::BundleSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AppError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub bundle: BundleConfig,
    pub fairness: FairnessConfig,
    pub solver: SolverConfig,
    pub session: SessionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic(SyntheticDataset),
    Files(FileDataset),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    pub group_sizes: Vec<usize>,
    #[serde(default)]
    pub type_count: usize,
    #[serde(default)]
    pub types_per_item: usize,
    #[serde(default)]
    pub catalog_seed: u64,
    /// Size of the synthetic user pool.
    pub users: u64,
    /// Per-group additive score bias (the skew the fairness methods fight).
    pub relevance_bias: Vec<f64>,
    /// `[low, high]` base score range before the bias is added.
    #[serde(default = "default_base_range")]
    pub relevance_base: [f64; 2],
    #[serde(default)]
    pub relevance_seed: u64,
}

fn default_base_range() -> [f64; 2] {
    [0.2, 0.6]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDataset {
    pub catalog: PathBuf,
    pub model: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub size: u32,
    pub gamma: f64,
    #[serde(default)]
    pub type_caps: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessConfig {
    pub rho: Vec<f64>,
    pub epsilon: f64,
    /// Positive exponent for the decaying tolerance, or `"fixed"`.
    #[serde(default)]
    pub alpha: AlphaConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaConfig {
    Keyword(String),
    Power(f64),
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig::Keyword("fixed".to_owned())
    }
}

impl AlphaConfig {
    pub fn schedule(&self) -> Result<ToleranceSchedule, AppError> {
        match self {
            AlphaConfig::Keyword(word) if word == "fixed" => Ok(ToleranceSchedule::Fixed),
            AlphaConfig::Keyword(word) => {
                Err(AppError::Config(format!("alpha must be a positive number or \"fixed\", got {word:?}")))
            }
            AlphaConfig::Power(alpha) => Ok(ToleranceSchedule::Power(*alpha)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    F3r,
    Fairwg,
    Adafairwg,
    Random,
    ExactNofair,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Exact => "exact",
            Method::F3r => "f3r",
            Method::Fairwg => "fairwg",
            Method::Adafairwg => "adafairwg",
            Method::Random => "random",
            Method::ExactNofair => "exact-nofair",
        };
        write!(f, "{name}")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Candidate pool size per user.
    pub top_m: usize,
    /// Fairness weight for the weighted greedy.
    #[serde(default)]
    pub lambda: f64,
    /// Exploration probability for the fairness-first greedy; defaults to the
    /// fairness tolerance when absent.
    #[serde(default)]
    pub explore: Option<f64>,
    #[serde(default)]
    pub node_budget: Option<u64>,
    /// Adaptive-weight controller settings.
    #[serde(default = "default_lambda_init")]
    pub lambda_init: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
}

fn default_lambda_init() -> f64 {
    1.0
}

fn default_lambda_min() -> f64 {
    1.0 / 1024.0
}

fn default_lambda_max() -> f64 {
    1024.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalConfig {
    /// Seeded shuffle of the user pool, re-shuffled block by block when the
    /// session outlasts the pool.
    Shuffle,
    /// Users in pool order, cycled.
    Sequential,
    /// Explicit arrival list, cycled when shorter than the session.
    Explicit(Vec<u64>),
}

impl Default for ArrivalConfig {
    fn default() -> Self {
        ArrivalConfig::Shuffle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Record the infeasible step and serve nothing.
    Report,
    /// Re-solve the step with the tolerance fully relaxed and flag it.
    Relax,
}

impl Default for FallbackPolicy {
    fn default() -> Self {
        FallbackPolicy::Report
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Exposure horizon; counters reset after this many users.
    pub horizon: u32,
    /// Users to serve in total (default: one horizon).
    #[serde(default)]
    pub total_users: Option<u32>,
    #[serde(default)]
    pub arrival: ArrivalConfig,
    pub seed: u64,
    /// Seeded session replications for `run` and `sweep`.
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub fallback: FallbackPolicy,
    /// Also solve each step without the exposure constraint to report
    /// relative quality.
    #[serde(default)]
    pub compute_baseline: bool,
    /// Record per-step wall times to the latency sidecar.
    #[serde(default = "default_true")]
    pub record_latency: bool,
}

fn default_repeats() -> u32 {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_out_dir(), prefix: default_prefix() }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "run".to_owned()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(AppError::config)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            AppError::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml(&text)
    }

    /// Domain checks beyond what deserialization can express. The core spec
    /// constructors re-validate; this surfaces violations as config errors.
    pub fn validate(&self) -> Result<(), AppError> {
        self.bundle_spec()?;
        self.fairness_spec()?;
        self.adaptive_weight()?;
        if let Some(e) = self.solver.explore {
            if !(0.0..=1.0).contains(&e) {
                return Err(AppError::Config(format!("explore {e} outside [0, 1]")));
            }
        }
        if self.solver.lambda < 0.0 || !self.solver.lambda.is_finite() {
            return Err(AppError::Config(format!("lambda {} must be >= 0", self.solver.lambda)));
        }
        if self.solver.top_m < self.bundle.size as usize {
            return Err(AppError::Config(format!(
                "top_m {} smaller than bundle size {}",
                self.solver.top_m, self.bundle.size
            )));
        }
        if self.session.horizon == 0 {
            return Err(AppError::Config("horizon must be positive".into()));
        }
        if self.session.repeats == 0 {
            return Err(AppError::Config("repeats must be positive".into()));
        }
        if let Some(total) = self.session.total_users {
            if total == 0 {
                return Err(AppError::Config("total_users must be positive".into()));
            }
        }
        if let DatasetConfig::Synthetic(s) = &self.dataset {
            if s.group_sizes.len() != self.fairness.rho.len() {
                return Err(AppError::Config(format!(
                    "dataset has {} groups but rho has {}",
                    s.group_sizes.len(),
                    self.fairness.rho.len()
                )));
            }
            if s.relevance_bias.len() != s.group_sizes.len() {
                return Err(AppError::Config("relevance_bias length != group count".into()));
            }
            if s.users == 0 {
                return Err(AppError::Config("synthetic user pool is empty".into()));
            }
            let total: usize = s.group_sizes.iter().sum();
            if self.solver.top_m > total {
                return Err(AppError::Config(format!(
                    "top_m {} exceeds catalog size {total}",
                    self.solver.top_m
                )));
            }
        }
        Ok(())
    }

    pub fn bundle_spec(&self) -> Result<BundleSpec, AppError> {
        BundleSpec::new(self.bundle.size, self.bundle.type_caps.clone(), self.bundle.gamma)
            .map_err(AppError::config)
    }

    pub fn fairness_spec(&self) -> Result<FairnessSpec, AppError> {
        FairnessSpec::new(
            self.fairness.rho.clone(),
            self.fairness.epsilon,
            self.fairness.alpha.schedule()?,
        )
        .map_err(AppError::config)
    }

    pub fn adaptive_weight(&self) -> Result<AdaptiveWeight, AppError> {
        AdaptiveWeight::new(
            self.solver.lambda_init,
            self.solver.lambda_min,
            self.solver.lambda_max,
        )
        .map_err(AppError::config)
    }

    /// Exploration probability, defaulting to the fairness tolerance (the two
    /// are distinct knobs that happen to share a default).
    pub fn explore(&self) -> f64 {
        self.solver.explore.unwrap_or(self.fairness.epsilon)
    }

    pub fn total_users(&self) -> u32 {
        self.session.total_users.unwrap_or(self.session.horizon)
    }

    /// Hash of the full configuration, stamped into every trace.
    pub fn hash(&self) -> String {
        hash_of(self)
    }

    /// Hash with the seed zeroed: identifies a family of seeded replications.
    pub fn family_hash(&self) -> String {
        let mut family = self.clone();
        family.session.seed = 0;
        hash_of(&family)
    }
}

fn hash_of(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

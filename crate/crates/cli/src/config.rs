//! Experiment configuration files.

use std::path::PathBuf;

use cas_srfe::cas::validate_schedule;
use cas_srfe::{
    CasConfig, HtpParams, Law, Measure, MhSettings, SolverKind, TargetFunction, TargetKind, Truncation,
};
use serde::{Deserialize, Serialize};

/// A configuration problem, reported with the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// `{start, step, stop}` (inclusive) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Range { start: usize, step: usize, stop: usize },
    List(Vec<usize>),
}

impl ScheduleSpec {
    pub fn expand(&self) -> Result<Vec<usize>, ConfigError> {
        match *self {
            ScheduleSpec::List(ref v) => Ok(v.clone()),
            ScheduleSpec::Range { start, step, stop } => {
                if step == 0 {
                    return Err(ConfigError::new("schedule.step", "must be positive"));
                }
                if stop < start {
                    return Err(ConfigError::new("schedule", "stop is below start"));
                }
                Ok((start..=stop).step_by(step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaW {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// `true`/`false` or `"on"`/`"off"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Switch {
    Bool(bool),
    Word(OnOff),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnOff {
    On,
    Off,
}

impl Switch {
    pub fn enabled(self) -> bool {
        match self {
            Switch::Bool(b) => b,
            Switch::Word(w) => w == OnOff::On,
        }
    }
}

fn default_trials() -> usize {
    30
}
fn default_boosting() -> usize {
    5
}
fn default_eig_tol() -> f64 {
    1e-10
}
fn default_n_test() -> usize {
    10_000
}
fn default_divisor() -> usize {
    4
}
fn default_reweight() -> Switch {
    Switch::Bool(true)
}
fn default_schedule() -> ScheduleSpec {
    ScheduleSpec::Range {
        start: 100,
        step: 100,
        stop: 1000,
    }
}
fn default_solver() -> SolverKind {
    SolverKind::Htp
}

/// Contents of a `run` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: String,
    #[serde(default)]
    pub target_dim: Option<usize>,
    #[serde(default)]
    pub f3_truncate: bool,
    /// Input measure; the target's own when unset.
    #[serde(default)]
    pub measure: Option<Vec<Law>>,
    #[serde(default)]
    pub n_features: Option<usize>,
    #[serde(default)]
    pub sigma_w: Option<SigmaW>,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default)]
    pub htp: HtpParams,
    #[serde(default = "default_boosting")]
    pub boosting: usize,
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default)]
    pub eig_tol_relative: bool,
    #[serde(default = "default_reweight")]
    pub reweight: Switch,
    #[serde(default = "default_divisor")]
    pub sparsity_divisor: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub mh: MhSettings,
    #[serde(default)]
    pub flat_christoffel: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub raw: ExperimentConfig,
    pub target: TargetFunction,
    pub measure: Measure,
    pub n_features: usize,
    pub sigma_w: Vec<f64>,
    pub schedule: Vec<usize>,
    pub cas: CasConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let kind = TargetKind::from_name(&self.target).map_err(|e| ConfigError::new("target", e.to_string()))?;
        let dim = self.target_dim.unwrap_or(kind.default_dim());
        let mut target =
            TargetFunction::with_dim(kind, dim).map_err(|e| ConfigError::new("target_dim", e.to_string()))?;
        target.f3_truncate = self.f3_truncate;

        let measure = match &self.measure {
            Some(laws) => Measure::new(laws.clone()).map_err(|e| ConfigError::new("measure", e.to_string()))?,
            None => target.measure().clone(),
        };
        if measure.dim() != dim {
            return Err(ConfigError::new(
                "measure",
                format!("has {} coordinates, target needs {dim}", measure.dim()),
            ));
        }

        let sigma_w = match &self.sigma_w {
            None => target.default_sigma_w(),
            Some(SigmaW::Scalar(s)) => vec![*s; dim],
            Some(SigmaW::Vector(v)) => v.clone(),
        };
        if sigma_w.len() != dim {
            return Err(ConfigError::new("sigma_w", format!("needs {dim} entries, got {}", sigma_w.len())));
        }
        if sigma_w.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(ConfigError::new("sigma_w", "entries must be positive"));
        }

        let n_features = self.n_features.unwrap_or(target.default_n_features());
        if n_features == 0 {
            return Err(ConfigError::new("n_features", "must be positive"));
        }
        let schedule = self.schedule.expand()?;
        validate_schedule(&schedule, self.sparsity_divisor, n_features)
            .map_err(|e| ConfigError::new("schedule", e.to_string()))?;
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be >= 1"));
        }
        if self.boosting == 0 {
            return Err(ConfigError::new("boosting", "must be >= 1"));
        }
        if !(self.eig_tol > 0.0 && self.eig_tol.is_finite()) {
            return Err(ConfigError::new("eig_tol", "must be positive"));
        }
        if self.n_test == 0 {
            return Err(ConfigError::new("n_test", "must be >= 1"));
        }
        if self.htp.tol.is_nan() || self.htp.tol < 0.0 || self.htp.max_iter == 0 {
            return Err(ConfigError::new("htp", "max_iter must be >= 1 and tol >= 0"));
        }
        if !(self.mh.sigma1_init > 0.0 && self.mh.sigma1_init.is_finite()) {
            return Err(ConfigError::new("mh.sigma1_init", "must be positive"));
        }
        if self.mh.thinning == 0 {
            return Err(ConfigError::new("mh.thinning", "must be >= 1"));
        }
        if let Some(x0) = &self.mh.x0 {
            if x0.len() != dim {
                return Err(ConfigError::new("mh.x0", format!("needs {dim} entries, got {}", x0.len())));
            }
        }
        let mut mh = self.mh.clone();
        if mh.x0.is_none() {
            mh.x0 = Some(target.default_x0());
        }
        let x0 = cas_srfe::cas::chain_start(&measure, mh.x0.as_deref())
            .map_err(|e| ConfigError::new("mh.x0", e.to_string()))?;
        if measure.density(&x0).map_or(true, |h| h <= 0.0) {
            return Err(ConfigError::new("mh.x0", "lies outside the support of the measure"));
        }
        mh.x0 = Some(x0);

        let truncation = if self.eig_tol_relative {
            Truncation::Relative(self.eig_tol)
        } else {
            Truncation::Absolute(self.eig_tol)
        };
        let cas = CasConfig {
            schedule: schedule.clone(),
            boosting: self.boosting,
            solver: self.solver,
            htp: self.htp,
            truncation,
            reweight: self.reweight.enabled(),
            sparsity_divisor: self.sparsity_divisor,
            mh,
            flat_christoffel: self.flat_christoffel,
        };
        Ok(ResolvedConfig {
            raw: self.clone(),
            target,
            measure,
            n_features,
            sigma_w,
            schedule,
            cas,
        })
    }
}

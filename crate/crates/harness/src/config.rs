//! Experiment configuration document.

use std::path::{Path, PathBuf};

use advisor_core::domains::DomainConfig;
use advisor_core::suggest::{LambdaSchedule, SuggesterSpec};
use advisor_core::SolveParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Which agent plays, and which policy it acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    /// Base-model policy, ignores suggestions.
    Normal,
    /// Acts greedily on the fully observable MDP at the true state.
    Perfect,
    /// Follows a present suggestion with probability `nu`, else acts as Normal.
    Naive { nu: f64 },
    /// Augmented policy assuming one known coefficient.
    NoisyFixed { lambda: f64 },
    /// Augmented policy over a set of suggester types.
    MultiType { spec: SuggesterSpec },
}

impl AgentSpec {
    /// Suggester hypothesis of agents that plan with an augmented model.
    pub fn suggester_spec(&self) -> Option<SuggesterSpec> {
        match self {
            AgentSpec::NoisyFixed { lambda } => Some(SuggesterSpec::fixed(*lambda)),
            AgentSpec::MultiType { spec } => Some(spec.clone()),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AgentSpec::Normal => "normal".into(),
            AgentSpec::Perfect => "perfect".into(),
            AgentSpec::Naive { nu } => format!("naive(nu={nu})"),
            AgentSpec::NoisyFixed { lambda } => format!("noisy(lambda={lambda})"),
            AgentSpec::MultiType { spec } => format!("mt(t_p={})", spec.t_p),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            AgentSpec::Naive { nu } if !(0.0..=1.0).contains(nu) => {
                Err(format!("nu = {nu} outside [0, 1]"))
            }
            AgentSpec::NoisyFixed { lambda } if !(*lambda >= 0.0) => {
                Err(format!("lambda = {lambda} is negative"))
            }
            AgentSpec::MultiType { spec } => spec.validate().map_err(|e| e.to_string()),
            _ => Ok(()),
        }
    }
}

/// Source of suggestions in batch runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuggesterConfig {
    #[default]
    None,
    NoisyRational {
        schedule: LambdaSchedule,
    },
    /// Tag wall-band sensor.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AskLimit {
    /// Counter refilled at every trial reset.
    #[default]
    PerTrial,
    /// One budget for the whole simulation.
    PerSimulation,
}

fn default_c_ask() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskConfig {
    /// When true suggestions arrive only in response to the ask action;
    /// otherwise the suggester speaks at every step.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_c_ask")]
    pub c_ask: f64,
    /// `None` for unlimited asks.
    #[serde(default)]
    pub n_ask: Option<usize>,
    #[serde(default)]
    pub limit: AskLimit,
}

impl Default for AskConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            c_ask: default_c_ask(),
            n_ask: None,
            limit: AskLimit::PerTrial,
        }
    }
}

fn default_precision() -> f64 {
    1e-2
}

fn default_time() -> f64 {
    300.0
}

/// Where the solved artifacts live and how to produce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub dir: PathBuf,
    #[serde(default = "default_precision")]
    pub precision: f64,
    /// Solve budget in seconds for the base model.
    #[serde(default = "default_time")]
    pub time: f64,
    /// Solve budget for the augmented model; defaults to `time`.
    #[serde(default)]
    pub augmented_time: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl PolicyConfig {
    pub fn base_params(&self) -> SolveParams {
        SolveParams {
            rng_seed: self.rng_seed,
            ..SolveParams::with_budget(self.precision, self.time)
        }
    }

    pub fn augmented_params(&self) -> SolveParams {
        SolveParams {
            rng_seed: self.rng_seed,
            ..SolveParams::with_budget(self.precision, self.augmented_time.unwrap_or(self.time))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub agent: AgentSpec,
    #[serde(default)]
    pub suggester: SuggesterConfig,
    #[serde(default)]
    pub ask: AskConfig,
    pub n_simulations: usize,
    pub trials_per_simulation: usize,
    /// Defaults to 200 for Tag and 100 for RockSample.
    #[serde(default)]
    pub max_steps_per_trial: Option<usize>,
    pub seed: u64,
    /// Directory for records and summary.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub policies: PolicyConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config {
            path: origin.into(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| HarnessError::Config {
            path: origin.into(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.n_simulations == 0 || self.trials_per_simulation == 0 {
            return Err("n_simulations and trials_per_simulation must be >= 1".into());
        }
        if self.max_steps_per_trial == Some(0) {
            return Err("max_steps_per_trial must be >= 1".into());
        }
        if self.ask.c_ask > 0.0 {
            return Err(format!("ask.c_ask = {} must be <= 0", self.ask.c_ask));
        }
        if let SuggesterConfig::NoisyRational { schedule } = &self.suggester {
            schedule
                .validate()
                .map_err(|e| format!("suggester.schedule: {e}"))?;
        }
        if self.suggester == SuggesterConfig::Heuristic
            && !matches!(self.domain, DomainConfig::Tag(_))
        {
            return Err("the heuristic suggester is defined for tag only".into());
        }
        if !(self.policies.precision > 0.0 && self.policies.time > 0.0) {
            return Err("policies.precision and policies.time must be > 0".into());
        }
        self.agent.validate().map_err(|e| format!("agent: {e}"))
    }
}

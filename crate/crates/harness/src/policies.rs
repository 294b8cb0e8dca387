//! Solved artifacts an experiment acts on.

use std::path::Path;
use std::sync::Arc;

use advisor_core::augment::{AskDynamics, AugmentedModel};
use advisor_core::domains::Domain;
use advisor_core::pipeline::{self, PipelineParams, BASE_POLICY, BASE_Q};
use advisor_core::solver::mdp_action_values;
use advisor_core::{AlphaPolicy, QTable};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// An augmented model with the policy solved on it.
#[derive(Debug, Clone)]
pub struct AugmentedPolicy {
    pub model: AugmentedModel,
    pub policy: AlphaPolicy,
}

/// Everything a simulation reads. Shared read-only across workers.
#[derive(Debug, Clone)]
pub struct Policies {
    pub domain: Arc<Domain>,
    pub base_policy: Arc<AlphaPolicy>,
    /// Suggester model values, extracted from the base policy.
    pub base_q: Arc<QTable>,
    /// Fully observable action values, `(x * Y + y) * A + a`.
    pub mdp_q: Arc<Vec<f64>>,
    pub ask_dynamics: Arc<AskDynamics>,
    pub augmented: Option<Arc<AugmentedPolicy>>,
}

impl Policies {
    pub fn from_parts(
        domain: Arc<Domain>,
        base_policy: Arc<AlphaPolicy>,
        base_q: Arc<QTable>,
        augmented: Option<Arc<AugmentedPolicy>>,
    ) -> Self {
        let mdp_q = Arc::new(mdp_action_values(domain.model()));
        let ask_dynamics = Arc::new(domain.ask_dynamics());
        Self {
            ask_dynamics,
            domain,
            base_policy,
            base_q,
            mdp_q,
            augmented,
        }
    }

    /// Solves whatever is missing under `cfg.policies.dir` and loads the rest.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        let domain = Domain::build(&cfg.domain)?;
        let dir = &cfg.policies.dir;
        let params = PipelineParams {
            base: cfg.policies.base_params(),
            augmented: cfg.policies.augmented_params(),
        };
        let (base_policy, base_q) = pipeline::stage_one(domain.model(), &params.base, dir)?;
        let augmented = match cfg.agent.suggester_spec() {
            None => None,
            Some(spec) => match load_augmented(cfg, dir) {
                Ok(found) => Some(found),
                Err(_) => {
                    let (model, policy) = if cfg.ask.enabled {
                        pipeline::bootstrap_pipeline(
                            domain.model(),
                            &spec,
                            cfg.ask.c_ask,
                            cfg.ask.n_ask,
                            &domain.ask_dynamics(),
                            &params,
                            dir,
                        )?
                    } else {
                        pipeline::bootstrap_typed(domain.model(), &spec, &params, dir)?
                    };
                    Some(AugmentedPolicy { model, policy })
                }
            },
        };
        Ok(Self::from_parts(
            Arc::new(domain),
            Arc::new(base_policy),
            Arc::new(base_q),
            augmented.map(Arc::new),
        ))
    }

    /// Loads previously solved artifacts; fails with `PolicyNotFound` when any
    /// is missing or was solved for a different configuration.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let domain = Domain::build(&cfg.domain)?;
        let dir = &cfg.policies.dir;
        let base_policy = load_file(&dir.join(BASE_POLICY), AlphaPolicy::load)?;
        let base_q = load_file(&dir.join(BASE_Q), QTable::load)?;
        let m = domain.model();
        if base_policy.x_count != m.x_count
            || base_policy.y_count != m.y_count
            || base_q.rows != m.flat_count()
        {
            return Err(HarnessError::PolicyNotFound(format!(
                "{} was solved for a different domain",
                dir.join(BASE_POLICY).display()
            )));
        }
        let augmented = match cfg.agent.suggester_spec() {
            None => None,
            Some(_) => Some(load_augmented(cfg, dir)?),
        };
        Ok(Self::from_parts(
            Arc::new(domain),
            Arc::new(base_policy),
            Arc::new(base_q),
            augmented.map(Arc::new),
        ))
    }
}

pub fn stage_two_stem(cfg: &ExperimentConfig) -> &'static str {
    if cfg.ask.enabled {
        "ask"
    } else {
        "typed"
    }
}

fn load_file<T>(path: &Path, f: impl Fn(&Path) -> advisor_core::Result<T>) -> Result<T> {
    if !path.exists() {
        return Err(HarnessError::PolicyNotFound(path.display().to_string()));
    }
    Ok(f(path)?)
}

fn load_augmented(cfg: &ExperimentConfig, dir: &Path) -> Result<AugmentedPolicy> {
    let stem = stage_two_stem(cfg);
    let policy_path = dir.join(format!("{stem}.policy.json"));
    let policy = load_file(&policy_path, AlphaPolicy::load)?;
    if !dir.join(format!("{stem}.meta.json")).exists() {
        return Err(HarnessError::PolicyNotFound(format!(
            "{stem}.meta.json in {}",
            dir.display()
        )));
    }
    let model = AugmentedModel::load(dir, stem)?;
    let spec = cfg.agent.suggester_spec();
    let ask_matches = match &model.meta.ask {
        None => !cfg.ask.enabled,
        Some(a) => cfg.ask.enabled && a.c_ask == cfg.ask.c_ask && a.n_ask == cfg.ask.n_ask,
    };
    if spec.as_ref() != Some(&model.meta.spec)
        || !ask_matches
        || policy.y_count != model.model.y_count
    {
        return Err(HarnessError::PolicyNotFound(format!(
            "{} was solved for a different agent or ask setting",
            policy_path.display()
        )));
    }
    Ok(AugmentedPolicy { model, policy })
}

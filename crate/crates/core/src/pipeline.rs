//! Two-stage bootstrapping: solve the base model, extract Q values, build
//! the suggestion-augmented model from them and solve that.
//!
//! Every artifact lands in a run directory. Stage one is skipped when its
//! outputs already exist there.

use std::path::Path;

use crate::augment::{
    augment_ask, augment_types, AskDynamics, AskModel, AugmentedModel, TypedModel,
};
use crate::error::{CoreError, Result};
use crate::model::MomdpModel;
use crate::policy::AlphaPolicy;
use crate::qtable::{extract_q, QTable};
use crate::solver::{solve, SolveParams};
use crate::suggest::SuggesterSpec;

pub const BASE_MODEL: &str = "base.model.json";
pub const BASE_POLICY: &str = "base.policy.json";
pub const BASE_Q: &str = "base.q.json";

#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub base: SolveParams,
    pub augmented: SolveParams,
}

impl PipelineParams {
    pub fn uniform(params: SolveParams) -> Self {
        Self {
            base: params.clone(),
            augmented: params,
        }
    }
}

/// Stage one. Loads `base.policy.json` and `base.q.json` from `run_dir` when
/// both exist and match the model, otherwise solves and writes them.
pub fn stage_one(
    base: &MomdpModel,
    params: &SolveParams,
    run_dir: &Path,
) -> Result<(AlphaPolicy, QTable)> {
    create_dir(run_dir)?;
    base.save(&run_dir.join(BASE_MODEL))?;
    let (policy_path, q_path) = (run_dir.join(BASE_POLICY), run_dir.join(BASE_Q));
    if policy_path.exists() && q_path.exists() {
        let policy = AlphaPolicy::load(&policy_path)?;
        let q = QTable::load(&q_path)?;
        if policy.x_count == base.x_count
            && policy.y_count == base.y_count
            && q.rows == base.flat_count()
        {
            return Ok((policy, q));
        }
    }
    let policy = solve(base, params)?;
    let q = extract_q(base, &policy)?;
    policy.save(&policy_path)?;
    q.save(&q_path)?;
    Ok((policy, q))
}

/// Per-step suggestion pipeline: writes `typed.model.json`,
/// `typed.meta.json` and `typed.policy.json`.
pub fn bootstrap_typed(
    base: &MomdpModel,
    spec: &SuggesterSpec,
    params: &PipelineParams,
    run_dir: &Path,
) -> Result<(TypedModel, AlphaPolicy)> {
    let (_, q) = stage_one(base, &params.base, run_dir)?;
    let typed = augment_types(base, spec, &q)?;
    let policy = solve(&typed.model, &params.augmented)?;
    typed.save(run_dir, "typed")?;
    policy.save(&run_dir.join("typed.policy.json"))?;
    Ok((typed, policy))
}

/// Ask pipeline: writes `ask.model.json`, `ask.meta.json` and
/// `ask.policy.json` next to the stage-one artifacts.
pub fn bootstrap_pipeline(
    base: &MomdpModel,
    spec: &SuggesterSpec,
    c_ask: f64,
    n_ask: Option<usize>,
    dynamics: &AskDynamics,
    params: &PipelineParams,
    run_dir: &Path,
) -> Result<(AskModel, AlphaPolicy)> {
    if !(c_ask <= 0.0) {
        return Err(CoreError::InvalidCost(c_ask));
    }
    let (_, q) = stage_one(base, &params.base, run_dir)?;
    let typed = augment_types(base, spec, &q)?;
    let ask = augment_ask(&typed, dynamics, c_ask, n_ask)?;
    let policy = solve(&ask.model, &params.augmented)?;
    ask.save(run_dir, "ask")?;
    policy.save(&run_dir.join("ask.policy.json"))?;
    Ok((ask, policy))
}

/// Loads a stage-two model and policy previously written under `stem`.
pub fn load_stage_two(run_dir: &Path, stem: &str) -> Result<(AugmentedModel, AlphaPolicy)> {
    let model = AugmentedModel::load(run_dir, stem)?;
    let policy = AlphaPolicy::load(&run_dir.join(format!("{stem}.policy.json")))?;
    Ok((model, policy))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CoreError::Io {
        path: dir.display().to_string(),
        source,
    })
}

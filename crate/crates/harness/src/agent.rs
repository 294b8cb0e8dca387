//! Action selection for each agent kind.

use advisor_core::suggest::Suggestion;
use advisor_core::{greedy_action, FactoredBelief};
use rand::Rng;

use crate::config::AgentSpec;
use crate::error::{HarnessError, Result};
use crate::policies::Policies;

/// What an agent may condition on when choosing.
#[derive(Debug, Clone, Copy)]
pub struct Observed<'a> {
    /// Belief in base coordinates (Normal, Naive) or augmented coordinates
    /// (NoisyFixed, MultiType); ignored by Perfect.
    pub belief: &'a FactoredBelief,
    /// True base state; read by Perfect only.
    pub state: (usize, usize),
    /// Most recent suggestion about the current state.
    pub suggestion: Suggestion,
}

/// Picks the next action. Typed agents expect `belief` to already include
/// the latest suggestion.
pub fn agent_act<R: Rng + ?Sized>(
    agent: &AgentSpec,
    pol: &Policies,
    seen: Observed<'_>,
    rng: &mut R,
) -> Result<usize> {
    match agent {
        AgentSpec::Normal => Ok(greedy_action(&pol.base_policy, seen.belief)?),
        AgentSpec::Perfect => Ok(perfect_action(pol, seen.state.0, seen.state.1)),
        AgentSpec::Naive { nu } => {
            let base = pol.domain.model();
            if let Suggestion::Action(s) = seen.suggestion {
                if rng.gen::<f64>() < *nu
                    && s < base.action_count()
                    && base.is_feasible(seen.belief.x, s)
                {
                    return Ok(s);
                }
            }
            Ok(greedy_action(&pol.base_policy, seen.belief)?)
        }
        AgentSpec::NoisyFixed { .. } | AgentSpec::MultiType { .. } => {
            let aug = pol
                .augmented
                .as_ref()
                .ok_or_else(|| HarnessError::PolicyNotFound("augmented policy".into()))?;
            let a = greedy_action(&aug.policy, seen.belief)?;
            if !aug.model.model.is_feasible(seen.belief.x, a) {
                return Err(HarnessError::InfeasibleAction {
                    action: a,
                    x: seen.belief.x,
                });
            }
            Ok(a)
        }
    }
}

/// Greedy action of the fully observable MDP at `(x, y)`, lowest index on ties.
pub fn perfect_action(pol: &Policies, x: usize, y: usize) -> usize {
    let m = pol.domain.model();
    let na = m.action_count();
    let row = &pol.mdp_q[(x * m.y_count + y) * na..(x * m.y_count + y + 1) * na];
    let mut best = 0;
    for a in 1..na {
        if row[a] > row[best] {
            best = a;
        }
    }
    best
}

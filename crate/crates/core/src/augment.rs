//! Model transforms that put the suggester into the planning problem.
//!
//! Type augmentation extends the hidden space to `(y, k)` pairs, with `k`
//! indexing the hypothesized rationality coefficient, and multiplies a
//! suggestion channel into the observation function. Ask augmentation adds a
//! costed action that elicits a suggestion and a visible ask counter.
//!
//! Index layout:
//! * hidden `y * T + k` (type fastest),
//! * visible `x * L + c`, `c` the remaining asks (`L = 1` for unlimited asks),
//! * observation `o * (A + 1) + j`, where `j < A` is a suggested base action
//!   and `j = A` is "no suggestion".

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{belief_update, belief_update_with, normalize, predict, FactoredBelief};
use crate::error::{CoreError, Result};
use crate::model::{read_text, write_text, MomdpModel, SparseRow};
use crate::qtable::QTable;
use crate::suggest::{suggestion_distribution, type_transition_matrix, SuggesterSpec, Suggestion};

/// Effect of the ask action on the base environment, supplied by the domain.
/// Every table is indexed by the base flat state `x * Y + y`.
#[derive(Debug, Clone)]
pub struct AskDynamics {
    /// Successors `(x', y', p)`; `x'` must equal `x`.
    pub transition: Vec<Vec<(usize, usize, f64)>>,
    /// Base observation distribution at the successor state.
    pub obs: Vec<SparseRow>,
    pub reward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskSettings {
    pub c_ask: f64,
    /// `None` for unlimited asks.
    pub n_ask: Option<usize>,
    /// Index of the ask action.
    pub action: usize,
}

/// Everything needed to interpret an augmented model's indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentMeta {
    pub spec: SuggesterSpec,
    pub base_x_count: usize,
    pub base_y_count: usize,
    pub base_action_count: usize,
    pub base_obs_count: usize,
    pub counter_levels: usize,
    pub ask: Option<AskSettings>,
    /// `p(σ | s, λ̂_k)` at `((s * T + k) * A + σ)` for base flat state `s`.
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AugmentedModel {
    pub model: MomdpModel,
    pub meta: AugmentMeta,
}

/// Hidden space extended with suggester types; suggestion at every step.
pub type TypedModel = AugmentedModel;
/// Typed model plus ask action and counter.
pub type AskModel = AugmentedModel;

impl AugmentedModel {
    pub fn type_count(&self) -> usize {
        self.meta.spec.types.len()
    }

    pub fn slots(&self) -> usize {
        self.meta.base_action_count + 1
    }

    pub fn hidden(&self, y: usize, k: usize) -> usize {
        y * self.type_count() + k
    }

    pub fn split_hidden(&self, yt: usize) -> (usize, usize) {
        (yt / self.type_count(), yt % self.type_count())
    }

    pub fn visible(&self, x: usize, counter: usize) -> usize {
        x * self.meta.counter_levels + counter
    }

    pub fn split_visible(&self, xv: usize) -> (usize, usize) {
        (xv / self.meta.counter_levels, xv % self.meta.counter_levels)
    }

    pub fn obs_index(&self, o: usize, sigma: Suggestion) -> usize {
        o * self.slots() + sigma.action().unwrap_or(self.meta.base_action_count)
    }

    pub fn split_obs(&self, idx: usize) -> (usize, Suggestion) {
        let (o, j) = (idx / self.slots(), idx % self.slots());
        let sigma = if j == self.meta.base_action_count {
            Suggestion::Absent
        } else {
            Suggestion::Action(j)
        };
        (o, sigma)
    }

    pub fn ask_action(&self) -> Option<usize> {
        self.meta.ask.as_ref().map(|s| s.action)
    }

    /// Counter level at the start of a trial.
    pub fn initial_counter(&self) -> usize {
        self.meta.ask.as_ref().and_then(|s| s.n_ask).unwrap_or(0)
    }

    /// Asks are limited and `c` is the remaining budget.
    pub fn counter_limited(&self) -> bool {
        matches!(self.meta.ask, Some(AskSettings { n_ask: Some(_), .. }))
    }

    /// `p(σ | x, y, λ̂_k)` in base coordinates.
    pub fn sigma_prob(&self, x: usize, y: usize, k: usize, sigma: usize) -> f64 {
        let s = x * self.meta.base_y_count + y;
        let na = self.meta.base_action_count;
        self.meta.sigma[(s * self.type_count() + k) * na + sigma]
    }

    pub fn type_marginal(&self, b: &FactoredBelief) -> Vec<f64> {
        let nt = self.type_count();
        let mut out = vec![0.0; nt];
        for (yt, p) in b.b_y.iter().enumerate() {
            out[yt % nt] += p;
        }
        out
    }

    /// Belief at the start of a trial: the model's initial environment
    /// distribution at base cell `x` combined with a carried-over type marginal,
    /// placed at ask counter `counter`.
    pub fn trial_belief(&self, x: usize, counter: usize, types: &[f64]) -> Result<FactoredBelief> {
        let xv = self.visible(x, counter);
        let x_init = self.visible(x, self.initial_counter());
        let (mass, env) = self.model.initial_given_x(x_init);
        if mass <= 0.0 {
            return Err(CoreError::OutOfRange(format!(
                "visible state {x_init} has no initial mass"
            )));
        }
        let nt = self.type_count();
        let mut base = vec![0.0; self.meta.base_y_count];
        for (yt, p) in env.iter().enumerate() {
            base[yt / nt] += p;
        }
        let mut b_y = vec![0.0; self.model.y_count];
        for (y, pb) in base.iter().enumerate() {
            for (k, pk) in types.iter().enumerate() {
                b_y[y * nt + k] = pb * pk;
            }
        }
        Ok(FactoredBelief::new(xv, b_y))
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.model.save(&dir.join(format!("{stem}.model.json")))?;
        write_text(
            &dir.join(format!("{stem}.meta.json")),
            &serde_json::to_string(&self.meta).expect("meta serializes"),
        )
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let model = MomdpModel::load(&dir.join(format!("{stem}.model.json")))?;
        let path = dir.join(format!("{stem}.meta.json"));
        let meta: AugmentMeta =
            serde_json::from_str(&read_text(&path)?).map_err(|source| CoreError::Json {
                path: path.display().to_string(),
                source,
            })?;
        if model.y_count != meta.base_y_count * meta.spec.types.len()
            || model.x_count != meta.base_x_count * meta.counter_levels
        {
            return Err(CoreError::DimensionMismatch(format!(
                "{stem}: model dimensions disagree with its metadata"
            )));
        }
        Ok(Self { model, meta })
    }
}

/// Expands the hidden space to `𝒴 × 𝒯`. Environment and type transitions are
/// independent; types are frozen in terminal states. Each step emits the
/// base observation together with a suggestion drawn from `p(σ | s', λ̂')`.
pub fn augment_types(base: &MomdpModel, spec: &SuggesterSpec, q: &QTable) -> Result<TypedModel> {
    spec.validate()?;
    if q.rows != base.flat_count() || q.cols != base.action_count() {
        return Err(CoreError::DimensionMismatch(format!(
            "q table is {}x{}, base model has {} states and {} actions",
            q.rows,
            q.cols,
            base.flat_count(),
            base.action_count()
        )));
    }
    let nt = spec.types.len();
    let na = base.action_count();
    let slots = na + 1;
    let switch = type_transition_matrix(spec)?;

    let mut sigma = Vec::with_capacity(base.flat_count() * nt * na);
    for s in 0..base.flat_count() {
        for &lambda in &spec.types {
            sigma.extend(suggestion_distribution(q, s, lambda, None));
        }
    }

    let mut observations = Vec::with_capacity(base.obs_count() * slots);
    for o in &base.observations {
        for a in &base.actions {
            observations.push(format!("{o}+{a}"));
        }
        observations.push(format!("{o}+none"));
    }
    let mut m = MomdpModel::new(
        base.x_count,
        base.y_count * nt,
        base.actions.clone(),
        observations,
        base.discount,
    );
    m.feasible = base.feasible.clone();

    let mut joint = Vec::new();
    for x in 0..base.x_count {
        for y in 0..base.y_count {
            let s = base.flat(x, y);
            for k in 0..nt {
                let yt = y * nt + k;
                let st = m.flat(x, yt);
                m.terminal[st] = base.terminal[s];
                m.initial[st] = base.initial[s] * spec.prior[k];
                for a in 0..na {
                    joint.clear();
                    for (xn, yn, p) in base.successors(x, y, a) {
                        if base.terminal[s] {
                            joint.push((xn, yn * nt + k, p));
                            continue;
                        }
                        for (k2, &pk) in switch[k].iter().enumerate() {
                            if pk > 0.0 {
                                joint.push((xn, yn * nt + k2, p * pk));
                            }
                        }
                    }
                    m.set_transition(x, yt, a, &joint);
                    m.set_reward(x, yt, a, base.reward(x, y, a));
                }
            }
        }
    }
    for a in 0..na {
        for xn in 0..base.x_count {
            for yn in 0..base.y_count {
                let s = base.flat(xn, yn);
                for k in 0..nt {
                    let table = &sigma[(s * nt + k) * na..(s * nt + k + 1) * na];
                    let row = SparseRow::from_pairs(base.obs_row(a, xn, yn).iter().flat_map(
                        |(o, po)| {
                            table
                                .iter()
                                .enumerate()
                                .filter(|(_, ps)| **ps > 0.0)
                                .map(move |(j, ps)| (o * slots + j, po * ps))
                        },
                    ));
                    m.set_obs(a, xn, yn * nt + k, row);
                }
            }
        }
    }
    Ok(AugmentedModel {
        model: m,
        meta: AugmentMeta {
            spec: spec.clone(),
            base_x_count: base.x_count,
            base_y_count: base.y_count,
            base_action_count: na,
            base_obs_count: base.obs_count(),
            counter_levels: 1,
            ask: None,
            sigma,
        },
    })
}

fn check_suggestion(tm: &AugmentedModel, sigma: Suggestion) -> Result<()> {
    match sigma {
        Suggestion::Action(s) if s >= tm.meta.base_action_count => {
            Err(CoreError::OutOfRange(format!("suggested action {s}")))
        }
        _ => Ok(()),
    }
}

/// Joint posterior over environment and suggester type after acting `a`,
/// arriving at visible `x_next`, observing `o` and receiving `sigma`.
/// `Absent` contributes no evidence.
pub fn joint_update(
    tm: &AugmentedModel,
    b: &FactoredBelief,
    a: usize,
    x_next: usize,
    o: usize,
    sigma: Suggestion,
) -> Result<FactoredBelief> {
    check_suggestion(tm, sigma)?;
    if o >= tm.meta.base_obs_count {
        return Err(CoreError::OutOfRange(format!("observation {o}")));
    }
    match sigma {
        Suggestion::Action(_) => belief_update(&tm.model, b, a, x_next, tm.obs_index(o, sigma)),
        Suggestion::Absent => {
            if a >= tm.model.action_count()
                || x_next >= tm.model.x_count
                || b.b_y.len() != tm.model.y_count
            {
                return Err(CoreError::OutOfRange(format!(
                    "action {a} or visible state {x_next}"
                )));
            }
            let slots = tm.slots();
            let lo = o * slots;
            belief_update_with(&tm.model, b, a, x_next, |yn| {
                tm.model
                    .obs_row(a, x_next, yn)
                    .iter()
                    .filter(|(idx, _)| (lo..lo + slots).contains(idx))
                    .map(|(_, p)| p)
                    .sum()
            })
        }
    }
}

/// Conditions on a suggestion about the current state, without a transition.
pub fn condition_on_suggestion(
    tm: &AugmentedModel,
    b: &FactoredBelief,
    sigma: Suggestion,
) -> Result<FactoredBelief> {
    check_suggestion(tm, sigma)?;
    let Suggestion::Action(s) = sigma else {
        return Ok(b.clone());
    };
    let (x, _) = tm.split_visible(b.x);
    let post = b
        .b_y
        .iter()
        .enumerate()
        .map(|(yt, p)| {
            if *p == 0.0 {
                return 0.0;
            }
            let (y, k) = tm.split_hidden(yt);
            p * tm.sigma_prob(x, y, k, s)
        })
        .collect();
    normalize(b.x, post)
}

/// Transition-predicted prior at `x_next`, normalized; the fallback when an
/// observation is impossible under the current belief.
pub fn predict_only(
    model: &MomdpModel,
    b: &FactoredBelief,
    a: usize,
    x_next: usize,
) -> Result<FactoredBelief> {
    normalize(x_next, predict(model, b, a, x_next))
}

/// `Σ_k λ̂_k P(k)` under the type marginal of `b`.
pub fn expected_type(tm: &AugmentedModel, b: &FactoredBelief) -> f64 {
    tm.meta.spec.expectation(&tm.type_marginal(b))
}

/// Adds the ask action (last action index) and the ask counter. Non-ask
/// actions emit "no suggestion"; the ask action moves the environment by
/// `dynamics`, costs `c_ask` on top of the dynamics reward, decrements a
/// limited counter and emits a suggestion about the successor state.
pub fn augment_ask(
    typed: &TypedModel,
    dynamics: &AskDynamics,
    c_ask: f64,
    n_ask: Option<usize>,
) -> Result<AskModel> {
    if typed.meta.ask.is_some() {
        return Err(CoreError::InvalidSpec(
            "model already has an ask action".into(),
        ));
    }
    if !(c_ask <= 0.0) {
        return Err(CoreError::InvalidCost(c_ask));
    }
    let meta = &typed.meta;
    let base_flat = meta.base_x_count * meta.base_y_count;
    if dynamics.transition.len() != base_flat
        || dynamics.obs.len() != base_flat
        || dynamics.reward.len() != base_flat
    {
        return Err(CoreError::DimensionMismatch(
            "ask dynamics tables do not match the base model".into(),
        ));
    }
    for (s, row) in dynamics.transition.iter().enumerate() {
        let x = s / meta.base_y_count;
        if row.iter().any(|&(xn, _, _)| xn != x) {
            return Err(CoreError::InvalidSpec(format!(
                "ask dynamics move the agent out of visible state {x}"
            )));
        }
    }

    let levels = n_ask.map_or(1, |n| n + 1);
    let start = n_ask.unwrap_or(0);
    let nt = typed.type_count();
    let nb = meta.base_action_count;
    let ask = nb;
    let na = nb + 1;
    let slots = typed.slots();
    let switch = type_transition_matrix(&meta.spec)?;
    let tm = &typed.model;

    let mut actions = tm.actions.clone();
    actions.push("ask".into());
    let mut m = MomdpModel::new(
        tm.x_count * levels,
        tm.y_count,
        actions,
        tm.observations.clone(),
        tm.discount,
    );
    let mut joint = Vec::new();
    for x in 0..tm.x_count {
        for c in 0..levels {
            let xv = x * levels + c;
            for a in 0..nb {
                m.feasible[xv * na + a] = tm.is_feasible(x, a);
            }
            let can_ask = n_ask.is_none() || c > 0;
            m.feasible[xv * na + ask] = can_ask;
            for yt in 0..tm.y_count {
                let st = tm.flat(x, yt);
                let sv = m.flat(xv, yt);
                let terminal = tm.terminal[st];
                m.terminal[sv] = terminal;
                if c == start {
                    m.initial[sv] = tm.initial[st];
                }
                for a in 0..nb {
                    joint.clear();
                    joint.extend(
                        tm.successors(x, yt, a)
                            .into_iter()
                            .map(|(xn, yn, p)| (xn * levels + c, yn, p)),
                    );
                    m.set_transition(xv, yt, a, &joint);
                    m.set_reward(xv, yt, a, tm.reward(x, yt, a));
                }
                if terminal || !can_ask {
                    m.set_transition(xv, yt, ask, &[(xv, yt, 1.0)]);
                    continue;
                }
                let (y, k) = typed.split_hidden(yt);
                let s = x * meta.base_y_count + y;
                let cn = if n_ask.is_some() { c - 1 } else { c };
                joint.clear();
                for &(xn, yn, p) in &dynamics.transition[s] {
                    for (k2, &pk) in switch[k].iter().enumerate() {
                        if pk > 0.0 {
                            joint.push((xn * levels + cn, yn * nt + k2, p * pk));
                        }
                    }
                }
                m.set_transition(xv, yt, ask, &joint);
                m.set_reward(xv, yt, ask, dynamics.reward[s] + c_ask);
            }
        }
    }
    for x in 0..tm.x_count {
        for c in 0..levels {
            let xv = x * levels + c;
            for yt in 0..tm.y_count {
                for a in 0..nb {
                    let row = SparseRow::from_pairs(
                        tm.obs_row(a, x, yt)
                            .iter()
                            .map(|(idx, p)| ((idx / slots) * slots + nb, p)),
                    );
                    m.set_obs(a, xv, yt, row);
                }
                let (y, k) = typed.split_hidden(yt);
                let s = x * meta.base_y_count + y;
                let row = SparseRow::from_pairs(dynamics.obs[s].iter().flat_map(|(o, po)| {
                    (0..nb).filter_map(move |j| {
                        let ps = typed.sigma_prob(x, y, k, j);
                        (ps > 0.0).then_some((o * slots + j, po * ps))
                    })
                }));
                m.set_obs(ask, xv, yt, row);
            }
        }
    }
    let mut meta = meta.clone();
    meta.counter_levels = levels;
    meta.ask = Some(AskSettings {
        c_ask,
        n_ask,
        action: ask,
    });
    Ok(AugmentedModel { model: m, meta })
}

//! Step-driven repeated-reset simulation.
//!
//! One [`Simulation`] runs `trials_per_simulation` trials. Suggestions come
//! from a [`SuggestionProvider`], so batch runs and interactive sessions share
//! this code path. Each simulation draws from three independent ChaCha8
//! streams derived from `(seed, simulation)`: environment, suggester, agent.

use advisor_core::augment::{condition_on_suggestion, joint_update, predict_only, AugmentedModel};
use advisor_core::domains::Domain;
use advisor_core::evaluate::{sample_row, sample_transition};
use advisor_core::suggest::{heuristic_suggest, lambda_at, sample_suggestion, Suggestion};
use advisor_core::{belief_update, CoreError, FactoredBelief};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{agent_act, Observed};
use crate::config::{AgentSpec, AskLimit, ExperimentConfig, SuggesterConfig};
use crate::error::{HarnessError, Result};
use crate::policies::{AugmentedPolicy, Policies};
use crate::records::TrialRecord;

pub const STREAM_ENV: u64 = 0;
pub const STREAM_SUGGESTER: u64 = 1;
pub const STREAM_AGENT: u64 = 2;

/// Independent stream `k` of simulation `sim`.
pub fn stream(seed: u64, sim: usize, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sim as u64 * 4 + k);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestReason {
    /// The suggester speaks at every step.
    PerStep,
    /// The agent executed the ask action.
    Ask,
}

/// What a provider is asked about. `state` is the true base state; providers
/// decide how much of it their suggester may see.
#[derive(Debug, Clone, Copy)]
pub struct SuggestContext<'a> {
    pub simulation: usize,
    pub trial: usize,
    pub step: usize,
    pub state: (usize, usize),
    pub lambda_star: Option<f64>,
    pub reason: SuggestReason,
    pub domain: &'a Domain,
}

/// Emitted after every agent step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub simulation: usize,
    pub trial: usize,
    /// Steps taken so far in this trial.
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    pub state: (usize, usize),
    pub suggestion: Suggestion,
    /// Remaining asks when the agent plans with an ask counter.
    pub counter: Option<usize>,
    pub type_marginal: Option<Vec<f64>>,
    pub done: bool,
}

pub trait SuggestionProvider {
    fn suggest(&mut self, ctx: &SuggestContext<'_>) -> Result<Suggestion>;

    fn on_step(&mut self, _event: &StepEvent) -> Result<()> {
        Ok(())
    }

    fn on_trial_end(&mut self, _record: &TrialRecord) -> Result<()> {
        Ok(())
    }
}

/// Suggesters of batch runs, drawing from the suggester stream.
pub struct BatchSuggester {
    config: SuggesterConfig,
    rng: ChaCha8Rng,
}

impl BatchSuggester {
    pub fn new(cfg: &ExperimentConfig, simulation: usize) -> Self {
        Self {
            config: cfg.suggester.clone(),
            rng: stream(cfg.seed, simulation, STREAM_SUGGESTER),
        }
    }
}

/// Shared with the interactive bridge so batch and replayed runs agree.
pub fn batch_suggestion(
    config: &SuggesterConfig,
    pol: &Policies,
    ctx: &SuggestContext<'_>,
    rng: &mut ChaCha8Rng,
) -> Suggestion {
    let (x, y) = ctx.state;
    match config {
        SuggesterConfig::None => Suggestion::Absent,
        SuggesterConfig::NoisyRational { .. } => {
            let s = pol.domain.model().flat(x, y);
            sample_suggestion(&pol.base_q, s, ctx.lambda_star.unwrap_or(0.0), rng)
        }
        SuggesterConfig::Heuristic => match ctx.domain {
            Domain::Tag(tag) => {
                let opponent = (y < tag.grid.cell_count()).then_some(y);
                heuristic_suggest(&tag.grid, x, opponent)
            }
            Domain::RockSample(_) => Suggestion::Absent,
        },
    }
}

/// Provider used by [`crate::experiment::run_experiment`].
pub struct BatchProvider<'p> {
    pub suggester: BatchSuggester,
    pub policies: &'p Policies,
}

impl SuggestionProvider for BatchProvider<'_> {
    fn suggest(&mut self, ctx: &SuggestContext<'_>) -> Result<Suggestion> {
        Ok(batch_suggestion(
            &self.suggester.config,
            self.policies,
            ctx,
            &mut self.suggester.rng,
        ))
    }
}

/// Records every suggestion it forwards; used to build replay traces.
pub struct Recording<P> {
    pub inner: P,
    pub trace: Vec<Suggestion>,
}

impl<P: SuggestionProvider> SuggestionProvider for Recording<P> {
    fn suggest(&mut self, ctx: &SuggestContext<'_>) -> Result<Suggestion> {
        let s = self.inner.suggest(ctx)?;
        self.trace.push(s);
        Ok(s)
    }
}

/// Replays a fixed suggestion sequence, then Absent.
pub struct Replay {
    pub trace: std::vec::IntoIter<Suggestion>,
}

impl SuggestionProvider for Replay {
    fn suggest(&mut self, _ctx: &SuggestContext<'_>) -> Result<Suggestion> {
        Ok(self.trace.next().unwrap_or(Suggestion::Absent))
    }
}

#[derive(Debug, Clone)]
struct TrialState {
    step: usize,
    discounted: f64,
    undiscounted: f64,
    discount_factor: f64,
    asks: usize,
    lambda_star: Option<f64>,
}

/// One simulation's live state, advanced one agent step at a time.
pub struct Simulation<'a> {
    cfg: &'a ExperimentConfig,
    pol: &'a Policies,
    index: usize,
    env_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    max_steps: usize,
    trial: usize,
    state: (usize, usize),
    belief: FactoredBelief,
    counter: usize,
    types: Option<Vec<f64>>,
    suggestion: Suggestion,
    live: Option<TrialState>,
    fallbacks: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a ExperimentConfig, pol: &'a Policies, index: usize) -> Result<Self> {
        let augmented = cfg.agent.suggester_spec().is_some();
        if augmented && pol.augmented.is_none() {
            return Err(HarnessError::PolicyNotFound(format!(
                "{} needs an augmented policy",
                cfg.agent.label()
            )));
        }
        let types = pol
            .augmented
            .as_ref()
            .filter(|_| augmented)
            .map(|a| a.model.meta.spec.prior.clone());
        Ok(Self {
            cfg,
            pol,
            index,
            env_rng: stream(cfg.seed, index, STREAM_ENV),
            agent_rng: stream(cfg.seed, index, STREAM_AGENT),
            max_steps: cfg
                .max_steps_per_trial
                .unwrap_or_else(|| pol.domain.default_max_steps()),
            trial: 0,
            state: (0, 0),
            belief: FactoredBelief::new(0, Vec::new()),
            counter: 0,
            types,
            suggestion: Suggestion::Absent,
            live: None,
            fallbacks: 0,
        })
    }

    fn aug(&self) -> Option<&'a AugmentedPolicy> {
        if self.cfg.agent.suggester_spec().is_some() {
            self.pol.augmented.as_deref()
        } else {
            None
        }
    }

    fn per_step(&self) -> bool {
        !self.cfg.ask.enabled && self.cfg.suggester != SuggesterConfig::None
    }

    pub fn finished(&self) -> bool {
        self.trial >= self.cfg.trials_per_simulation
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn trial(&self) -> usize {
        self.trial
    }

    pub fn state(&self) -> (usize, usize) {
        self.state
    }

    pub fn belief(&self) -> &FactoredBelief {
        &self.belief
    }

    /// Steps taken in the current trial.
    pub fn step_in_trial(&self) -> usize {
        self.live.as_ref().map_or(0, |t| t.step)
    }

    /// Remaining asks, for agents planning with an ask counter.
    pub fn counter(&self) -> Option<usize> {
        self.aug()
            .filter(|a| a.model.ask_action().is_some())
            .map(|_| self.counter)
    }

    pub fn type_marginal(&self) -> Option<Vec<f64>> {
        self.aug().map(|a| a.model.type_marginal(&self.belief))
    }

    /// Number of zero-likelihood observations replaced by the predicted prior.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn lambda_star(&self) -> Option<f64> {
        match &self.cfg.suggester {
            SuggesterConfig::NoisyRational { schedule } => Some(lambda_at(schedule, self.trial)),
            _ => None,
        }
    }

    fn ctx(&self, state: (usize, usize), step: usize, reason: SuggestReason) -> SuggestContext<'a> {
        SuggestContext {
            simulation: self.index,
            trial: self.trial,
            step,
            state,
            lambda_star: self.lambda_star(),
            reason,
            domain: &self.pol.domain,
        }
    }

    fn begin_trial(&mut self, p: &mut dyn SuggestionProvider) -> Result<()> {
        let (x, y) = self.pol.domain.reset_trial(&mut self.env_rng);
        self.state = (x, y);
        if let Some(aug) = self.aug() {
            if self.trial == 0 || self.cfg.ask.limit == AskLimit::PerTrial {
                self.counter = aug.model.initial_counter();
            }
            let types = self
                .types
                .clone()
                .expect("typed agents carry a type marginal");
            self.belief = aug.model.trial_belief(x, self.counter, &types)?;
        } else {
            self.belief = FactoredBelief::initial(self.pol.domain.model(), x);
        }
        self.live = Some(TrialState {
            step: 0,
            discounted: 0.0,
            undiscounted: 0.0,
            discount_factor: 1.0,
            asks: 0,
            lambda_star: self.lambda_star(),
        });
        self.suggestion = Suggestion::Absent;
        if self.per_step() {
            let sigma = p.suggest(&self.ctx((x, y), 0, SuggestReason::PerStep))?;
            self.suggestion = sigma;
            if let Some(aug) = self.aug() {
                match condition_on_suggestion(&aug.model, &self.belief, sigma) {
                    Ok(b) => self.belief = b,
                    Err(CoreError::ZeroLikelihood { .. }) => self.fallbacks += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }

    /// Advances one agent step, starting a trial first when none is live.
    /// Returns the trial's record when the step ended it.
    pub fn step(&mut self, p: &mut dyn SuggestionProvider) -> Result<Option<TrialRecord>> {
        if self.finished() {
            return Ok(None);
        }
        if self.live.is_none() {
            self.begin_trial(p)?;
        }
        let base = self.pol.domain.model();
        let (x, y) = self.state;
        let seen = Observed {
            belief: &self.belief,
            state: self.state,
            suggestion: self.suggestion,
        };
        let a = agent_act(&self.cfg.agent, self.pol, seen, &mut self.agent_rng)?;
        let aug = self.aug();
        let ask_action = aug.and_then(|g| g.model.ask_action());
        let is_ask = Some(a) == ask_action;

        let (xn, yn, reward, o) = if is_ask {
            let aug = aug.expect("ask action implies an augmented model");
            let c_ask = aug.model.meta.ask.as_ref().map_or(0.0, |s| s.c_ask);
            let s = base.flat(x, y);
            let succ = &self.pol.ask_dynamics.transition[s];
            let pick = advisor_core::evaluate::sample_pairs(
                succ.iter().enumerate().map(|(i, e)| (i, e.2)),
                &mut self.env_rng,
            );
            let (xn, yn, _) = succ[pick];
            let o = sample_row(
                &self.pol.ask_dynamics.obs[base.flat(xn, yn)],
                &mut self.env_rng,
            );
            (xn, yn, self.pol.ask_dynamics.reward[s] + c_ask, o)
        } else {
            let (xn, yn) = sample_transition(base, x, y, a, &mut self.env_rng);
            let o = sample_row(base.obs_row(a, xn, yn), &mut self.env_rng);
            (xn, yn, base.reward(x, y, a), o)
        };
        if is_ask && aug.is_some_and(|g| g.model.counter_limited()) {
            self.counter -= 1;
        }
        let terminal = base.is_terminal(xn, yn);

        let trial = self.live.as_mut().expect("trial is live");
        trial.discounted += trial.discount_factor * reward;
        trial.undiscounted += reward;
        trial.discount_factor *= base.discount;
        trial.step += 1;
        trial.asks += usize::from(is_ask);
        let step = trial.step;

        let sigma = if is_ask {
            p.suggest(&self.ctx((xn, yn), step, SuggestReason::Ask))?
        } else if self.per_step() && !terminal {
            p.suggest(&self.ctx((xn, yn), step, SuggestReason::PerStep))?
        } else {
            Suggestion::Absent
        };

        let updated = match (&self.cfg.agent, aug) {
            (AgentSpec::Perfect, _) => Ok(self.belief.clone()),
            (_, Some(g)) => {
                let xv = g.model.visible(xn, self.counter);
                joint_update(&g.model, &self.belief, a, xv, o, sigma).or_else(|e| match e {
                    CoreError::ZeroLikelihood { .. } => {
                        self.fallbacks += 1;
                        predict_only(&g.model.model, &self.belief, a, xv)
                    }
                    e => Err(e),
                })
            }
            (_, None) => belief_update(base, &self.belief, a, xn, o).or_else(|e| match e {
                CoreError::ZeroLikelihood { .. } => {
                    self.fallbacks += 1;
                    predict_only(base, &self.belief, a, xn)
                }
                e => Err(e),
            }),
        };
        self.belief = updated?;
        self.state = (xn, yn);
        self.suggestion = sigma;

        let done = terminal || step >= self.max_steps;
        let marginal = aug.map(|g| g.model.type_marginal(&self.belief));
        p.on_step(&StepEvent {
            simulation: self.index,
            trial: self.trial,
            step,
            action: a,
            reward,
            state: self.state,
            suggestion: sigma,
            counter: self.counter(),
            type_marginal: marginal.clone(),
            done,
        })?;
        if !done {
            return Ok(None);
        }
        let trial = self.live.take().expect("trial is live");
        let expected_type = aug.map(|g| expected(&g.model, marginal.as_deref().unwrap_or(&[])));
        let record = TrialRecord {
            simulation: self.index,
            trial: self.trial,
            discounted_reward: trial.discounted,
            undiscounted_reward: trial.undiscounted,
            steps: trial.step,
            asks: trial.asks,
            expected_type,
            type_marginal: marginal.clone(),
            lambda_star: trial.lambda_star,
            seed: self.cfg.seed,
            truncated: !terminal,
        };
        if marginal.is_some() {
            self.types = marginal;
        }
        self.trial += 1;
        p.on_trial_end(&record)?;
        Ok(Some(record))
    }

    /// Runs every remaining trial.
    pub fn run(&mut self, p: &mut dyn SuggestionProvider) -> Result<Vec<TrialRecord>> {
        let mut out = Vec::with_capacity(self.cfg.trials_per_simulation);
        while !self.finished() {
            if let Some(r) = self.step(p)? {
                out.push(r);
            }
        }
        Ok(out)
    }
}

fn expected(model: &AugmentedModel, marginal: &[f64]) -> f64 {
    model.meta.spec.expectation(marginal)
}

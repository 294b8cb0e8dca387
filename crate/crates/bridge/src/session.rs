//! One client session: a sequential state machine driving simulations one
//! agent step at a time and pausing whenever a suggestion is needed.

use std::io::Write;
use std::path::Path;
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use advisor_core::domains::Domain;
use advisor_core::suggest::Suggestion;
use advisor_harness::error::HarnessError;
use advisor_harness::records::TrialRecord;
use advisor_harness::sim::{
    Simulation, StepEvent, SuggestContext, SuggestReason, SuggestionProvider,
};
use advisor_harness::{ExperimentConfig, Policies};

use crate::error::{BridgeError, Result};
use crate::view;
use crate::wire::{
    encode, ActionInfo, AskReason, DecodeError, ErrorCode, Observability, Phase, StateView,
    TypeBelief, WireMessage, SCHEMA_VERSION,
};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy)]
pub struct SessionOptions {
    /// Time a client has to answer an `ask_request` before Absent is used.
    pub deadline: Duration,
    pub observability: Observability,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            deadline: DEFAULT_DEADLINE,
            observability: Observability::Full,
        }
    }
}

/// What the connection reader hands to the session.
#[derive(Debug)]
pub enum Incoming {
    Message(WireMessage),
    Malformed(DecodeError),
}

/// Append-only record sink shared by all sessions.
#[derive(Default)]
pub struct RecordSink {
    file: Mutex<Option<std::io::BufWriter<std::fs::File>>>,
    records: Mutex<Vec<TrialRecord>>,
}

impl RecordSink {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Appends JSON lines to `path`, creating it if needed.
    pub fn to_file(path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| BridgeError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            file: Mutex::new(Some(std::io::BufWriter::new(file))),
            records: Mutex::default(),
        })
    }

    pub fn append(&self, record: &TrialRecord) -> Result<()> {
        if let Some(w) = self.file.lock().expect("sink lock").as_mut() {
            let line = serde_json::to_string(record).expect("record serializes");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|source| BridgeError::Io {
                    path: "records".into(),
                    source,
                })?;
        }
        self.records.lock().expect("sink lock").push(record.clone());
        Ok(())
    }

    pub fn records(&self) -> Vec<TrialRecord> {
        self.records.lock().expect("sink lock").clone()
    }
}

/// Why a session stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionEnd {
    /// Every configured simulation ran to completion.
    Completed,
    /// The client went away; finished trials were already flushed.
    Disconnected,
    /// The client asked for an unsupported protocol version.
    Rejected,
}

enum Interrupt {
    Reset,
    Disconnected,
}

struct Link<'a, W: Write> {
    id: u64,
    pol: &'a Policies,
    opts: SessionOptions,
    rx: &'a Receiver<Incoming>,
    out: W,
    sink: &'a RecordSink,
    next_request: u64,
    simulation: usize,
    type_belief: Option<Vec<f64>>,
    counter: Option<usize>,
    last_action: Option<usize>,
    last_reward: Option<f64>,
    interrupt: Option<Interrupt>,
}

impl<W: Write> Link<'_, W> {
    fn send(&mut self, msg: &WireMessage) -> std::result::Result<(), Interrupt> {
        let line = encode(msg);
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|_| Interrupt::Disconnected)
    }

    fn error(&mut self, code: ErrorCode, message: String) -> std::result::Result<(), Interrupt> {
        self.send(&WireMessage::Error { code, message })
    }

    fn view(&self, phase: Phase, trial: usize, step: usize, state: (usize, usize)) -> StateView {
        let domain: &Domain = &self.pol.domain;
        let base = domain.model();
        StateView {
            schema_version: SCHEMA_VERSION,
            session: self.id,
            phase,
            simulation: self.simulation,
            trial,
            step,
            grid: view::layout(domain),
            agent: view::agent_cell(domain, state.0),
            facts: view::facts(domain, state, self.opts.observability),
            type_belief: self.type_belief.as_ref().map(|m| {
                let spec = &self
                    .pol
                    .augmented
                    .as_ref()
                    .expect("typed agent")
                    .model
                    .meta
                    .spec;
                TypeBelief {
                    types: spec.types.clone(),
                    marginal: m.clone(),
                    expected: spec.expectation(m),
                }
            }),
            asks_left: self.counter,
            last_action: self.last_action.map(|a| ActionInfo {
                index: a,
                name: action_name(base, a),
            }),
            last_reward: self.last_reward,
        }
    }

    /// Handles frames that arrive while no suggestion is outstanding.
    fn drain(&mut self) -> std::result::Result<(), Interrupt> {
        loop {
            match self.rx.try_recv() {
                Ok(Incoming::Message(WireMessage::Reset)) => return Err(Interrupt::Reset),
                Ok(Incoming::Message(WireMessage::Suggest { .. })) => {
                    self.error(ErrorCode::BadSuggestion, "no ask_request is pending".into())?
                }
                Ok(Incoming::Message(m)) => self.unexpected(&m)?,
                Ok(Incoming::Malformed(e)) => self.malformed(e)?,
                Err(TryRecvError::Empty) => return Ok(()),
                Err(TryRecvError::Disconnected) => return Err(Interrupt::Disconnected),
            }
        }
    }

    fn unexpected(&mut self, m: &WireMessage) -> std::result::Result<(), Interrupt> {
        let what = encode(m);
        self.error(
            ErrorCode::UnexpectedMessage,
            format!("no reply expected for {what}"),
        )
    }

    fn malformed(&mut self, e: DecodeError) -> std::result::Result<(), Interrupt> {
        let code = if e.frame_type.as_deref() == Some("suggest") {
            ErrorCode::BadSuggestion
        } else {
            ErrorCode::BadMessage
        };
        self.error(code, e.to_string())
    }

    fn ask(&mut self, ctx: &SuggestContext<'_>) -> std::result::Result<Suggestion, Interrupt> {
        self.drain()?;
        let base = self.pol.domain.model();
        let x = ctx.state.0;
        let feasible: Vec<ActionInfo> = (0..base.action_count())
            .filter(|&a| base.is_feasible(x, a))
            .map(|a| ActionInfo {
                index: a,
                name: action_name(base, a),
            })
            .collect();
        let view = self.view(Phase::AwaitingSuggestion, ctx.trial, ctx.step, ctx.state);
        self.send(&WireMessage::StateView(view))?;
        let request = self.next_request;
        self.next_request += 1;
        self.send(&WireMessage::AskRequest {
            request,
            reason: match ctx.reason {
                SuggestReason::Ask => AskReason::Ask,
                SuggestReason::PerStep => AskReason::PerStep,
            },
            feasible: feasible.clone(),
            deadline_secs: self.opts.deadline.as_secs_f64(),
        })?;
        let deadline = Instant::now() + self.opts.deadline;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(Incoming::Message(WireMessage::Suggest {
                    request: Some(r), ..
                })) if r != request => self.error(
                    ErrorCode::BadSuggestion,
                    format!("request {r} has expired; request {request} is pending"),
                )?,
                Ok(Incoming::Message(WireMessage::Suggest { action, .. })) => match action {
                    Suggestion::Absent => return Ok(action),
                    Suggestion::Action(a) if feasible.iter().any(|f| f.index == a) => {
                        return Ok(action)
                    }
                    Suggestion::Action(a) => self.error(
                        ErrorCode::BadSuggestion,
                        format!(
                            "action {a} is not among the feasible actions of request {request}"
                        ),
                    )?,
                },
                Ok(Incoming::Message(WireMessage::Reset)) => return Err(Interrupt::Reset),
                Ok(Incoming::Message(m)) => self.unexpected(&m)?,
                Ok(Incoming::Malformed(e)) => self.malformed(e)?,
                Err(RecvTimeoutError::Timeout) => return Ok(Suggestion::Absent),
                Err(RecvTimeoutError::Disconnected) => return Err(Interrupt::Disconnected),
            }
        }
    }
}

fn action_name(base: &advisor_core::MomdpModel, a: usize) -> String {
    base.actions
        .get(a)
        .cloned()
        .unwrap_or_else(|| format!("action {a}"))
}

fn interrupted(i: Interrupt, link: &mut Option<Interrupt>) -> HarnessError {
    let why = match i {
        Interrupt::Reset => "reset requested",
        Interrupt::Disconnected => "client disconnected",
    };
    *link = Some(i);
    HarnessError::Suggester(why.into())
}

impl<W: Write> SuggestionProvider for Link<'_, W> {
    fn suggest(&mut self, ctx: &SuggestContext<'_>) -> advisor_harness::Result<Suggestion> {
        self.ask(ctx)
            .map_err(|i| interrupted(i, &mut self.interrupt))
    }

    fn on_step(&mut self, e: &StepEvent) -> advisor_harness::Result<()> {
        self.type_belief = e.type_marginal.clone();
        self.counter = e.counter;
        self.last_action = Some(e.action);
        self.last_reward = Some(e.reward);
        let phase = if e.done {
            Phase::TrialEnded
        } else {
            Phase::AwaitingAgent
        };
        let view = self.view(phase, e.trial, e.step, e.state);
        self.send(&WireMessage::StateView(view))
            .and_then(|_| self.drain())
            .map_err(|i| interrupted(i, &mut self.interrupt))
    }

    fn on_trial_end(&mut self, r: &TrialRecord) -> advisor_harness::Result<()> {
        self.sink
            .append(r)
            .map_err(|e| HarnessError::Suggester(e.to_string()))?;
        self.send(&WireMessage::TrialSummary { record: r.clone() })
            .map_err(|i| interrupted(i, &mut self.interrupt))
    }
}

/// Runs a session to completion over an already-connected client.
///
/// `rx` yields decoded client frames; its disconnection means the client left.
/// Server frames are written to `out`, one per line.
pub fn run_session<W: Write>(
    id: u64,
    cfg: &ExperimentConfig,
    pol: &Policies,
    opts: SessionOptions,
    rx: &Receiver<Incoming>,
    out: W,
    sink: &RecordSink,
) -> Result<SessionEnd> {
    let mut link = Link {
        id,
        pol,
        opts,
        rx,
        out,
        sink,
        next_request: 0,
        simulation: 0,
        type_belief: None,
        counter: None,
        last_action: None,
        last_reward: None,
        interrupt: None,
    };

    // handshake
    loop {
        match rx.recv() {
            Ok(Incoming::Message(WireMessage::Start { schema_version }))
                if schema_version == SCHEMA_VERSION =>
            {
                break
            }
            Ok(Incoming::Message(WireMessage::Start { schema_version })) => {
                let _ = link.error(
                    ErrorCode::UnsupportedVersion,
                    format!(
                        "schema version {schema_version} requested, server speaks {SCHEMA_VERSION}"
                    ),
                );
                return Ok(SessionEnd::Rejected);
            }
            Ok(Incoming::Message(m)) => {
                if link.unexpected(&m).is_err() {
                    return Ok(SessionEnd::Disconnected);
                }
            }
            Ok(Incoming::Malformed(e)) => {
                if link.malformed(e).is_err() {
                    return Ok(SessionEnd::Disconnected);
                }
            }
            Err(_) => return Ok(SessionEnd::Disconnected),
        }
    }

    for index in 0..cfg.n_simulations {
        let mut sim = Simulation::new(cfg, pol, index)?;
        link.simulation = index;
        link.type_belief = pol
            .augmented
            .as_ref()
            .filter(|_| cfg.agent.suggester_spec().is_some())
            .map(|a| a.model.meta.spec.prior.clone());
        link.counter = None;
        link.last_action = None;
        link.last_reward = None;
        while !sim.finished() {
            match sim.step(&mut link) {
                Ok(_) => {}
                Err(e) => match link.interrupt.take() {
                    Some(Interrupt::Reset) => break,
                    Some(Interrupt::Disconnected) => return Ok(SessionEnd::Disconnected),
                    None => {
                        let _ = link.error(ErrorCode::Internal, e.to_string());
                        return Err(e.into());
                    }
                },
            }
        }
    }
    let state = (0, 0);
    let mut last = link.view(Phase::Closed, cfg.trials_per_simulation, 0, state);
    last.agent = None;
    last.facts = view::hidden_facts(&pol.domain);
    let _ = link.send(&WireMessage::StateView(last));
    Ok(SessionEnd::Completed)
}

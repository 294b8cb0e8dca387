//! Newline-delimited JSON frames exchanged with a suggester client.

use advisor_core::suggest::Suggestion;
use advisor_harness::records::TrialRecord;
use serde::{Deserialize, Serialize};

/// Protocol revision announced in `start` and echoed in every `state_view`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    AwaitingAgent,
    AwaitingSuggestion,
    TrialEnded,
    Closed,
}

/// What the human suggester is allowed to see of the hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Observability {
    /// The true state, as a noisy-rational suggester sees it.
    #[default]
    Full,
    /// Only which wall band holds the opponent (Tag); nothing hidden elsewhere.
    WallBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub col: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    /// Traversable cells in index order.
    pub cells: Vec<Cell>,
}

/// Domain facts the client may display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase", deny_unknown_fields)]
pub enum Facts {
    Tag {
        /// Present under full observability while the opponent is on the grid.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        opponent: Option<Cell>,
        /// Wall band holding the opponent, under wall-band observability.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<String>,
    },
    Rocksample {
        rocks: Vec<Cell>,
        /// Present under full observability.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        good: Option<Vec<bool>>,
        exited: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionInfo {
    pub index: usize,
    pub name: String,
}

/// Agent's belief over suggester types, for typed agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeBelief {
    pub types: Vec<f64>,
    pub marginal: Vec<f64>,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateView {
    pub schema_version: u32,
    pub session: u64,
    pub phase: Phase,
    pub simulation: usize,
    pub trial: usize,
    pub step: usize,
    pub grid: GridLayout,
    /// `None` once the agent has left the grid.
    pub agent: Option<Cell>,
    pub facts: Facts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_belief: Option<TypeBelief>,
    /// Remaining asks when the agent plans with a limited ask counter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asks_left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_action: Option<ActionInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_reward: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AskReason {
    /// The agent executed its ask action.
    Ask,
    /// Suggestions are taken at every step.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadSuggestion,
    BadMessage,
    UnexpectedMessage,
    UnsupportedVersion,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    // server to client
    StateView(StateView),
    AskRequest {
        request: u64,
        reason: AskReason,
        feasible: Vec<ActionInfo>,
        deadline_secs: f64,
    },
    TrialSummary {
        record: TrialRecord,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    // client to server
    Start {
        schema_version: u32,
    },
    /// An action index, or `"none"` for no suggestion. `request` names the
    /// ask it answers; answers naming an expired request are refused.
    Suggest {
        action: Suggestion,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request: Option<u64>,
    },
    /// Abandon the current simulation and continue with the next one.
    Reset,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot decode frame at byte {offset}: {message}")]
pub struct DecodeError {
    /// Byte offset into the frame where decoding failed. Syntax errors are
    /// located exactly; a well-formed frame with wrong content reports 0.
    pub offset: usize,
    pub message: String,
    /// The frame parsed as a JSON object whose `type` was this.
    pub frame_type: Option<String>,
}

/// One frame, without the trailing newline.
pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages serialize")
}

pub fn decode(frame: &str) -> Result<WireMessage, DecodeError> {
    serde_json::from_str(frame).map_err(|e| {
        let frame_type = serde_json::from_str::<serde_json::Value>(frame)
            .ok()
            .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_owned));
        DecodeError {
            offset: if e.is_eof() {
                frame.len()
            } else {
                byte_offset(frame, e.line(), e.column())
            },
            message: e.to_string(),
            frame_type,
        }
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

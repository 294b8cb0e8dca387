//! Agents, repeated-reset simulations, and experiment summaries.

pub mod agent;
pub mod config;
pub mod error;
pub mod experiment;
pub mod policies;
pub mod records;
pub mod sim;
pub mod summary;

pub use agent::{agent_act, perfect_action, Observed};
pub use config::{AgentSpec, AskConfig, AskLimit, ExperimentConfig, PolicyConfig, SuggesterConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_and_write, run_batch_simulation, run_experiment, run_simulation};
pub use policies::{AugmentedPolicy, Policies};
pub use records::{read_jsonl, write_jsonl, TrialRecord};
pub use sim::{Simulation, StepEvent, SuggestContext, SuggestReason, SuggestionProvider};
pub use summary::{summarize, Stat, Summary, SummaryRow};

//! Planning with external action suggestions of unknown reliability.
//!
//! The crate covers the tabular mixed-observability model, an anytime
//! point-based solver, noisy-rational and heuristic suggester models, the
//! model transforms that put suggester type and an ask action into the state,
//! and the Tag and RockSample benchmark generators.

pub mod augment;
pub mod belief;
pub mod domains;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod qtable;
pub mod solver;
pub mod suggest;

pub use belief::{belief_update, FactoredBelief};
pub use error::{CoreError, Result};
pub use model::{validate_model, FlatPomdpView, MomdpModel, SparseRow, Violation};
pub use policy::{belief_value, greedy_action, AlphaPolicy, AlphaVector};
pub use qtable::{extract_q, QTable};
pub use solver::{solve, SolveParams};

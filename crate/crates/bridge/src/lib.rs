//! Live simulations over newline-delimited JSON so a person can play the
//! suggester.

pub mod error;
pub mod server;
pub mod session;
pub mod view;
pub mod wire;

pub use error::{BridgeError, Result};
pub use server::Server;
pub use session::{
    run_session, Incoming, RecordSink, SessionEnd, SessionOptions, DEFAULT_DEADLINE,
};
pub use wire::{decode, encode, DecodeError, Observability, WireMessage, SCHEMA_VERSION};

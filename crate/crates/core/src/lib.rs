//! Core of miniredis: a wire-compatible subset of the Redis data-structure
//! server.
//!
//! - [`resp`]: RESP2 encoding and incremental decoding.
//! - [`inline`]: tokenizer for telnet-style command lines.
//! - [`request`]: framing of client input into requests.
//! - [`store`]: the typed keyspace (strings, hashes, sets, lists, sorted sets).
//! - [`pubsub`]: channel subscriptions and fan-out.
//! - [`command`]: command registry and the single-writer [`Engine`].
//!
//! Nothing here performs I/O; the server and client crates wrap it.

pub mod command;
pub mod inline;
pub mod pubsub;
pub mod request;
pub mod resp;
pub mod store;

pub use command::{CommandRequest, Delivery, Engine, Outcome};
pub use pubsub::{PubSubMessage, SessionId};
pub use resp::{DecodeError, DecodeLimits, Decoder, Value};

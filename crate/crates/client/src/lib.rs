//! Client side of miniredis: a blocking RESP connection, `redis-cli` style
//! reply printing, and two helper conventions built on ordinary commands.
//!
//! - [`matrix`]: numeric matrices stored as sorted sets keyed by their first
//!   column.
//! - [`blob`]: arbitrary binary payloads stored in hash fields.

pub mod blob;
pub mod cli;
pub mod connection;
pub mod format;
pub mod matrix;

pub use connection::{ClientError, Connection};
pub use format::OutputFormat;
pub use matrix::MatrixRow;

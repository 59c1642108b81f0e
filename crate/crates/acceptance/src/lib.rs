//! Support code for the acceptance suite.
//!
//! [`oracle`] is a deliberately naive model of the keyspace built from
//! standard collections, used to check the real engine command by command.

pub mod oracle;

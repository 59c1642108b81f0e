//! Opaque binary payloads stored as hash fields.

use miniredis_core::Value;

use crate::connection::{check, ClientError, Connection, Result};

/// Stores `payload` unchanged. Returns 1 if the field is new, 0 if replaced.
pub fn hset_blob(conn: &mut Connection, key: &[u8], field: &[u8], payload: &[u8]) -> Result<i64> {
    match check(conn.command(&[b"HSET".as_slice(), key, field, payload])?)? {
        Value::Integer(n) => Ok(n),
        other => Err(ClientError::Unexpected(other)),
    }
}

/// Fetches a payload stored by [`hset_blob`]; `None` if the field is absent.
pub fn hget_blob(conn: &mut Connection, key: &[u8], field: &[u8]) -> Result<Option<Vec<u8>>> {
    match check(conn.command(&[b"HGET".as_slice(), key, field])?)? {
        Value::Bulk(payload) => Ok(payload),
        other => Err(ClientError::Unexpected(other)),
    }
}

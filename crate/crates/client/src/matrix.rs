//! Numeric matrices stored as sorted sets, one member per row.
//!
//! The first column is the row's score. Each member encodes the whole row,
//! score included, as a big-endian `u32` column count followed by every
//! column as big-endian IEEE-754 `f64` bits. The encoding is exact and
//! deterministic, so re-adding an identical row adds nothing.

use miniredis_core::Value;
use thiserror::Error;

use crate::connection::{check, ClientError, Connection, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub score: f64,
    /// The columns after the score.
    pub values: Vec<f64>,
}

impl MatrixRow {
    /// Builds a row from all its columns; `None` if there are none.
    pub fn from_columns(columns: &[f64]) -> Option<Self> {
        let (&score, rest) = columns.split_first()?;
        Some(Self {
            score,
            values: rest.to_vec(),
        })
    }

    pub fn columns(&self) -> Vec<f64> {
        std::iter::once(self.score)
            .chain(self.values.iter().copied())
            .collect()
    }

    pub fn width(&self) -> usize {
        self.values.len() + 1
    }

    pub fn encode(&self) -> Vec<u8> {
        let width = u32::try_from(self.width()).expect("row narrower than 2^32 columns");
        let mut out = Vec::with_capacity(4 + 8 * self.width());
        out.extend_from_slice(&width.to_be_bytes());
        for c in self.columns() {
            out.extend_from_slice(&c.to_bits().to_be_bytes());
        }
        out
    }

    pub fn decode(member: &[u8]) -> std::result::Result<Self, MatrixError> {
        let bad = || MatrixError::BadMember(member.to_vec());
        if member.len() < 4 {
            return Err(bad());
        }
        let (head, body) = member.split_at(4);
        let width = u32::from_be_bytes(head.try_into().expect("4-byte header")) as usize;
        if width == 0 || body.len() != width.checked_mul(8).ok_or_else(bad)? {
            return Err(bad());
        }
        let columns: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_be_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        Ok(Self::from_columns(&columns).expect("width is at least 1"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix has no columns")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("member {} is not an encoded matrix row", crate::format::quote(.0))]
    BadMember(Vec<u8>),
}

/// Checks that every row has the same width, at least one column.
pub fn check_shape(rows: &[MatrixRow]) -> std::result::Result<(), MatrixError> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let expected = first.width();
    for (row, r) in rows.iter().enumerate() {
        if r.width() != expected {
            return Err(MatrixError::Ragged {
                row,
                expected,
                found: r.width(),
            });
        }
    }
    Ok(())
}

/// Adds each row under its first column. Returns how many rows were new.
/// Ragged input is rejected before anything is sent.
pub fn zadd_matrix(conn: &mut Connection, key: &[u8], rows: &[MatrixRow]) -> Result<i64> {
    check_shape(rows)?;
    for row in rows {
        let score = row.score.to_string();
        conn.send(&[b"ZADD".as_slice(), key, score.as_bytes(), &row.encode()])?;
    }
    let mut added = 0;
    let mut failure = None;
    for _ in rows {
        match check(conn.read_reply()?) {
            Ok(Value::Integer(n)) => added += n,
            Ok(other) => failure = failure.or(Some(ClientError::Unexpected(other))),
            Err(e) => failure = failure.or(Some(e)),
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(added),
    }
}

/// Rows whose score lies in `[min, max]`, in score order. Bounds use the
/// ZRANGEBYSCORE syntax, so `(5` and `+inf` work.
pub fn zrangebyscore_matrix(
    conn: &mut Connection,
    key: &[u8],
    min: &str,
    max: &str,
) -> Result<Vec<MatrixRow>> {
    let reply = check(conn.command(&[
        b"ZRANGEBYSCORE".as_slice(),
        key,
        min.as_bytes(),
        max.as_bytes(),
    ])?)?;
    let Value::Array(Some(items)) = reply else {
        return Err(ClientError::Unexpected(reply));
    };
    items
        .iter()
        .map(|item| match item.as_bytes() {
            Some(member) => Ok(MatrixRow::decode(member)?),
            None => Err(ClientError::Unexpected(item.clone())),
        })
        .collect()
}

/// Parses one row written as numbers separated by commas or whitespace.
pub fn parse_row(text: &str) -> std::result::Result<MatrixRow, String> {
    let columns = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("'{t}' is not a number"))
        })
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    MatrixRow::from_columns(&columns).ok_or_else(|| MatrixError::Empty.to_string())
}

/// Formats a row as space-separated columns; parsing it back is exact.
pub fn format_row(row: &MatrixRow) -> String {
    row.columns()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cols: &[f64]) -> MatrixRow {
        MatrixRow::from_columns(cols).unwrap()
    }

    #[test]
    fn encoding_layout() {
        let bytes = row(&[100.0, 1.0]).encode();
        assert_eq!(&bytes[..4], &[0, 0, 0, 2]);
        assert_eq!(&bytes[4..12], &100f64.to_bits().to_be_bytes());
        assert_eq!(bytes.len(), 20);
    }

    #[test]
    fn round_trip_keeps_score_column() {
        let r = row(&[100.0, 1.0, 2.0, 3.0]);
        assert_eq!(
            MatrixRow::decode(&r.encode()).unwrap().columns(),
            vec![100.0, 1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn malformed_members_are_named() {
        let err = MatrixRow::decode(b"pizza").unwrap_err();
        assert_eq!(
            err.to_string(),
            "member \"pizza\" is not an encoded matrix row"
        );
        assert!(MatrixRow::decode(&[0, 0, 0, 0]).is_err());
        let mut truncated = row(&[1.0, 2.0]).encode();
        truncated.pop();
        assert!(MatrixRow::decode(&truncated).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert_eq!(
            check_shape(&[row(&[1.0, 2.0]), row(&[3.0])]),
            Err(MatrixError::Ragged {
                row: 1,
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn text_rows() {
        assert_eq!(
            parse_row("100,1, 2 3").unwrap(),
            row(&[100.0, 1.0, 2.0, 3.0])
        );
        assert!(parse_row("1,x").is_err());
        assert!(parse_row("  ").is_err());
        assert_eq!(format_row(&row(&[105.0, 2.5, -0.0])), "105 2.5 -0");
    }
}

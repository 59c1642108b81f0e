//! RESP2 wire format.
//!
//! [`encode`] serializes a [`Value`] to its exact byte form. [`Decoder`] is
//! the incremental side: bytes are pushed in arbitrary chunks and complete
//! values are pulled out as soon as they are available, with any trailing
//! partial frame kept for the next chunk.

use std::fmt;

use thiserror::Error;

const CRLF: &[u8] = b"\r\n";

/// A single RESP2 value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    /// `+<text>\r\n`
    Simple(String),
    /// `-<text>\r\n`
    Error(String),
    /// `:<n>\r\n`
    Integer(i64),
    /// `$<len>\r\n<bytes>\r\n`, or `$-1\r\n` when `None`.
    Bulk(Option<Vec<u8>>),
    /// `*<n>\r\n<items>`, or `*-1\r\n` when `None`.
    Array(Option<Vec<Value>>),
}

impl Value {
    pub fn ok() -> Self {
        Value::Simple("OK".into())
    }

    pub fn simple(text: impl Into<String>) -> Self {
        Value::Simple(text.into())
    }

    pub fn error(text: impl Into<String>) -> Self {
        Value::Error(text.into())
    }

    pub fn bulk(bytes: impl Into<Vec<u8>>) -> Self {
        Value::Bulk(Some(bytes.into()))
    }

    pub fn null_bulk() -> Self {
        Value::Bulk(None)
    }

    pub fn array(items: Vec<Value>) -> Self {
        Value::Array(Some(items))
    }

    /// An array of bulk strings.
    pub fn bulk_array<I, B>(items: I) -> Self
    where
        I: IntoIterator<Item = B>,
        B: Into<Vec<u8>>,
    {
        Value::Array(Some(items.into_iter().map(Value::bulk).collect()))
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Value::Error(_))
    }

    /// Payload of a non-null bulk string.
    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bulk(Some(b)) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Simple(s) => write!(f, "{s}"),
            Value::Error(e) => write!(f, "(error) {e}"),
            Value::Integer(n) => write!(f, "{n}"),
            Value::Bulk(Some(b)) => write!(f, "{:?}", String::from_utf8_lossy(b)),
            Value::Bulk(None) | Value::Array(None) => write!(f, "(nil)"),
            Value::Array(Some(items)) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("simple string or error payload contains CR or LF")]
    LineBreakInLine,
}

/// Serializes `value` to RESP2 bytes.
pub fn encode(value: &Value) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::new();
    encode_into(value, &mut out)?;
    Ok(out)
}

/// Appends the RESP2 serialization of `value` to `out`.
///
/// On error `out` may hold a partially written frame.
pub fn encode_into(value: &Value, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match value {
        Value::Simple(s) => write_line(out, b'+', s.as_bytes())?,
        Value::Error(s) => write_line(out, b'-', s.as_bytes())?,
        Value::Integer(n) => write_header(out, b':', *n),
        Value::Bulk(None) => out.extend_from_slice(b"$-1\r\n"),
        Value::Bulk(Some(bytes)) => {
            write_header(out, b'$', bytes.len() as i64);
            out.extend_from_slice(bytes);
            out.extend_from_slice(CRLF);
        }
        Value::Array(None) => out.extend_from_slice(b"*-1\r\n"),
        Value::Array(Some(items)) => {
            write_header(out, b'*', items.len() as i64);
            for item in items {
                encode_into(item, out)?;
            }
        }
    }
    Ok(())
}

fn write_line(out: &mut Vec<u8>, tag: u8, text: &[u8]) -> Result<(), EncodeError> {
    if text.iter().any(|&b| b == b'\r' || b == b'\n') {
        return Err(EncodeError::LineBreakInLine);
    }
    out.push(tag);
    out.extend_from_slice(text);
    out.extend_from_slice(CRLF);
    Ok(())
}

fn write_header(out: &mut Vec<u8>, tag: u8, n: i64) {
    out.push(tag);
    out.extend_from_slice(n.to_string().as_bytes());
    out.extend_from_slice(CRLF);
}

/// Bounds enforced while decoding untrusted input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_bulk_len: usize,
    pub max_array_len: usize,
    pub max_depth: usize,
    /// Longest inline command line accepted by the request decoder.
    pub max_inline_len: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        Self {
            max_bulk_len: 512 * 1024 * 1024,
            max_array_len: 1024 * 1024,
            max_depth: 32,
            max_inline_len: 64 * 1024,
        }
    }
}

/// A fatal decode failure; the stream cannot be resynchronized after one.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} (at byte {offset})")]
pub struct DecodeError {
    /// Absolute stream offset of the frame element that failed.
    pub offset: u64,
    pub kind: DecodeErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeErrorKind {
    #[error("invalid type byte '{}'", char::from(*.0).escape_default())]
    InvalidTypeByte(u8),
    #[error("invalid multibulk length")]
    InvalidArrayLength,
    #[error("invalid bulk length")]
    InvalidBulkLength,
    #[error("invalid integer")]
    InvalidInteger,
    #[error("line not terminated by CRLF")]
    MissingCrlf,
    #[error("maximum nesting depth exceeded")]
    DepthExceeded,
    #[error("expected '$', got '{}'", char::from(*.0).escape_default())]
    ExpectedBulk(u8),
    #[error("too big inline request")]
    InlineTooLong,
}

/// Incremental RESP2 decoder.
///
/// Feeding bytes in any chunking produces the same sequence of values as
/// feeding the whole stream at once.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    pos: usize,
    consumed: u64,
    limits: DecodeLimits,
    failed: Option<DecodeError>,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_limits(limits: DecodeLimits) -> Self {
        Self {
            limits,
            ..Self::default()
        }
    }

    pub fn limits(&self) -> &DecodeLimits {
        &self.limits
    }

    /// Appends raw bytes without decoding anything.
    pub fn extend(&mut self, bytes: &[u8]) {
        if self.pos > 0 && self.pos * 2 >= self.buf.len() {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Decodes the next complete value, or `None` if more bytes are needed.
    pub fn next_value(&mut self) -> Result<Option<Value>, DecodeError> {
        if let Some(err) = &self.failed {
            return Err(err.clone());
        }
        let start = self.pos;
        let mut cursor = Cursor {
            buf: &self.buf[start..],
            at: 0,
            base: self.consumed,
            limits: &self.limits,
        };
        match cursor.value(1) {
            Ok(Some(value)) => {
                let used = cursor.at;
                self.advance(used);
                Ok(Some(value))
            }
            Ok(None) => Ok(None),
            Err(err) => Err(self.fail(err)),
        }
    }

    /// Pushes `bytes` and drains every value that is now complete.
    pub fn feed(&mut self, bytes: &[u8]) -> Result<Vec<Value>, DecodeError> {
        self.extend(bytes);
        let mut values = Vec::new();
        while let Some(value) = self.next_value()? {
            values.push(value);
        }
        Ok(values)
    }

    /// Bytes received but not yet consumed.
    pub fn pending(&self) -> &[u8] {
        &self.buf[self.pos..]
    }

    pub(crate) fn check(&self) -> Result<(), DecodeError> {
        match &self.failed {
            Some(err) => Err(err.clone()),
            None => Ok(()),
        }
    }

    pub(crate) fn stream_offset(&self) -> u64 {
        self.consumed
    }

    pub(crate) fn advance(&mut self, n: usize) {
        self.pos += n;
        self.consumed += n as u64;
        if self.pos == self.buf.len() {
            self.buf.clear();
            self.pos = 0;
        }
    }

    pub(crate) fn fail(&mut self, err: DecodeError) -> DecodeError {
        self.failed = Some(err.clone());
        err
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
    base: u64,
    limits: &'a DecodeLimits,
}

impl Cursor<'_> {
    fn error(&self, offset: usize, kind: DecodeErrorKind) -> DecodeError {
        DecodeError {
            offset: self.base + offset as u64,
            kind,
        }
    }

    /// Reads up to CRLF; returns the line without the terminator.
    fn line(&mut self) -> Result<Option<&[u8]>, DecodeError> {
        let rest = &self.buf[self.at..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            // A CR anywhere but the last byte can no longer be a terminator.
            if rest.len() > 1 && rest[..rest.len() - 1].contains(&b'\r') {
                return Err(self.error(self.at, DecodeErrorKind::MissingCrlf));
            }
            return Ok(None);
        };
        if nl == 0 || rest[nl - 1] != b'\r' || rest[..nl - 1].contains(&b'\r') {
            return Err(self.error(self.at, DecodeErrorKind::MissingCrlf));
        }
        let line = &self.buf[self.at..self.at + nl - 1];
        self.at += nl + 1;
        Ok(Some(line))
    }

    fn value(&mut self, depth: usize) -> Result<Option<Value>, DecodeError> {
        let Some(&tag) = self.buf.get(self.at) else {
            return Ok(None);
        };
        let start = self.at;
        self.at += 1;
        let Some(line) = self.line()? else {
            return Ok(None);
        };
        match tag {
            b'+' => Ok(Some(Value::Simple(
                String::from_utf8_lossy(line).into_owned(),
            ))),
            b'-' => Ok(Some(Value::Error(
                String::from_utf8_lossy(line).into_owned(),
            ))),
            b':' => {
                let n = parse_i64(line)
                    .ok_or_else(|| self.error(start, DecodeErrorKind::InvalidInteger))?;
                Ok(Some(Value::Integer(n)))
            }
            b'$' => {
                let len = parse_i64(line)
                    .filter(|&n| n >= -1 && n <= self.limits.max_bulk_len as i64)
                    .ok_or_else(|| self.error(start, DecodeErrorKind::InvalidBulkLength))?;
                if len == -1 {
                    return Ok(Some(Value::Bulk(None)));
                }
                let len = len as usize;
                let body = self.at;
                if self.buf.len() < body + len + 2 {
                    return Ok(None);
                }
                if &self.buf[body + len..body + len + 2] != CRLF {
                    return Err(self.error(body + len, DecodeErrorKind::MissingCrlf));
                }
                self.at = body + len + 2;
                Ok(Some(Value::Bulk(Some(self.buf[body..body + len].to_vec()))))
            }
            b'*' => {
                let n = parse_i64(line)
                    .filter(|&n| n >= -1 && n <= self.limits.max_array_len as i64)
                    .ok_or_else(|| self.error(start, DecodeErrorKind::InvalidArrayLength))?;
                if n == -1 {
                    return Ok(Some(Value::Array(None)));
                }
                if depth > self.limits.max_depth {
                    return Err(self.error(start, DecodeErrorKind::DepthExceeded));
                }
                // Capacity is bounded by what is actually buffered, not by the
                // declared length.
                let mut items = Vec::with_capacity((n as usize).min(self.buf.len() - self.at));
                for _ in 0..n {
                    match self.value(depth + 1)? {
                        Some(v) => items.push(v),
                        None => return Ok(None),
                    }
                }
                Ok(Some(Value::Array(Some(items))))
            }
            other => Err(self.error(start, DecodeErrorKind::InvalidTypeByte(other))),
        }
    }
}

pub(crate) fn parse_i64(bytes: &[u8]) -> Option<i64> {
    if bytes.is_empty() || bytes.len() > 20 {
        return None;
    }
    std::str::from_utf8(bytes).ok()?.parse().ok()
}

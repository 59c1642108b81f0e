//! Server-side request framing: RESP multibulk arrays or inline lines.

use crate::inline::split_args;
use crate::resp::{DecodeError, DecodeErrorKind, DecodeLimits, Decoder, Value};

/// One unit of client input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    /// Command name followed by its arguments, byte-exact.
    Command(Vec<Vec<u8>>),
    /// Input that deserves an error reply but leaves the stream in sync.
    Rejected(String),
}

/// Splits a client byte stream into requests.
///
/// A frame starting with `*` is a RESP array of bulk strings; anything else
/// is read as an inline command line terminated by LF.
#[derive(Debug, Default)]
pub struct RequestDecoder {
    inner: Decoder,
}

impl RequestDecoder {
    pub fn new(limits: DecodeLimits) -> Self {
        Self {
            inner: Decoder::with_limits(limits),
        }
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.inner.extend(bytes);
    }

    /// Bytes buffered but not yet forming a complete request.
    pub fn pending_len(&self) -> usize {
        self.inner.pending().len()
    }

    pub fn next_request(&mut self) -> Result<Option<Request>, DecodeError> {
        self.inner.check()?;
        loop {
            let Some(&first) = self.inner.pending().first() else {
                return Ok(None);
            };
            if first == b'*' {
                match self.inner.next_value()? {
                    None => return Ok(None),
                    Some(Value::Array(None)) => continue,
                    Some(Value::Array(Some(items))) if items.is_empty() => continue,
                    Some(Value::Array(Some(items))) => return self.command(items).map(Some),
                    Some(_) => unreachable!("frame starting with '*' is an array"),
                }
            }
            if let Some(request) = self.inline()? {
                return Ok(Some(request));
            }
            if self.inner.pending().is_empty() || !self.inner.pending().contains(&b'\n') {
                return Ok(None);
            }
        }
    }

    fn command(&mut self, items: Vec<Value>) -> Result<Request, DecodeError> {
        let mut args = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Bulk(Some(bytes)) => args.push(bytes),
                other => {
                    let tag = crate::resp::encode(&other)
                        .ok()
                        .and_then(|b| b.first().copied())
                        .unwrap_or(b'?');
                    let err = DecodeError {
                        offset: self.inner.stream_offset(),
                        kind: DecodeErrorKind::ExpectedBulk(tag),
                    };
                    return Err(self.inner.fail(err));
                }
            }
        }
        Ok(Request::Command(args))
    }

    /// Consumes one inline line if complete. Blank lines are consumed and
    /// produce `None`.
    fn inline(&mut self) -> Result<Option<Request>, DecodeError> {
        let pending = self.inner.pending();
        let max = self.inner.limits().max_inline_len;
        let Some(nl) = pending.iter().position(|&b| b == b'\n') else {
            if pending.len() > max {
                let err = DecodeError {
                    offset: self.inner.stream_offset(),
                    kind: DecodeErrorKind::InlineTooLong,
                };
                return Err(self.inner.fail(err));
            }
            return Ok(None);
        };
        if nl > max {
            let err = DecodeError {
                offset: self.inner.stream_offset(),
                kind: DecodeErrorKind::InlineTooLong,
            };
            return Err(self.inner.fail(err));
        }
        let line = pending[..nl].strip_suffix(b"\r").unwrap_or(&pending[..nl]);
        let parsed = split_args(line);
        self.inner.advance(nl + 1);
        match parsed {
            Ok(args) if args.is_empty() => Ok(None),
            Ok(args) => Ok(Some(Request::Command(args))),
            Err(e) => Ok(Some(Request::Rejected(format!("ERR Protocol error: {e}")))),
        }
    }
}

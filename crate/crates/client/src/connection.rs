//! Blocking RESP connection.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use miniredis_core::{DecodeError, Decoder, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("protocol error: {0}")]
    Protocol(#[from] DecodeError),
    #[error("server closed the connection")]
    Closed,
    /// An error reply where the caller expected data.
    #[error("{0}")]
    Server(String),
    #[error(transparent)]
    Matrix(#[from] crate::matrix::MatrixError),
    #[error("unexpected reply: {0}")]
    Unexpected(Value),
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// Encodes a command as a RESP array of bulk strings.
pub fn encode_command<A: AsRef<[u8]>>(args: &[A]) -> Vec<u8> {
    let mut out = format!("*{}\r\n", args.len()).into_bytes();
    for arg in args {
        let arg = arg.as_ref();
        out.extend_from_slice(format!("${}\r\n", arg.len()).as_bytes());
        out.extend_from_slice(arg);
        out.extend_from_slice(b"\r\n");
    }
    out
}

pub struct Connection {
    stream: TcpStream,
    decoder: Decoder,
    buf: Vec<u8>,
}

impl Connection {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            decoder: Decoder::new(),
            buf: vec![0; 64 * 1024],
        })
    }

    /// Writes one command without waiting for its reply.
    pub fn send<A: AsRef<[u8]>>(&mut self, args: &[A]) -> Result<()> {
        self.stream.write_all(&encode_command(args))?;
        Ok(())
    }

    /// Sends a command and returns its reply. Error replies are returned as
    /// `Value::Error`, not as `Err`.
    pub fn command<A: AsRef<[u8]>>(&mut self, args: &[A]) -> Result<Value> {
        self.send(args)?;
        self.read_reply()
    }

    /// Blocks until a whole frame has arrived.
    pub fn read_reply(&mut self) -> Result<Value> {
        loop {
            if let Some(v) = self.decoder.next_value()? {
                return Ok(v);
            }
            self.fill()?;
        }
    }

    /// Like [`read_reply`](Self::read_reply) but returns `None` when the read
    /// timeout elapses first.
    pub fn poll_reply(&mut self) -> Result<Option<Value>> {
        loop {
            if let Some(v) = self.decoder.next_value()? {
                return Ok(Some(v));
            }
            match self.fill() {
                Ok(()) => {}
                Err(ClientError::Io(e))
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                    ) =>
                {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> Result<()> {
        self.stream.set_read_timeout(timeout)?;
        Ok(())
    }

    fn fill(&mut self) -> Result<()> {
        let n = self.stream.read(&mut self.buf)?;
        if n == 0 {
            return Err(ClientError::Closed);
        }
        self.decoder.extend(&self.buf[..n]);
        Ok(())
    }
}

/// Turns an error reply into `Err`.
pub(crate) fn check(value: Value) -> Result<Value> {
    match value {
        Value::Error(msg) => Err(ClientError::Server(msg)),
        other => Ok(other),
    }
}

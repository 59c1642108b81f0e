//! The `miniredis-cli` driver: one-shot commands, the REPL, subscription
//! streaming and the matrix/blob helper subcommands.

use std::io::{BufRead, Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clap::Subcommand;
use miniredis_core::inline::split_args;
use miniredis_core::{PubSubMessage, Value};

use crate::blob::{hget_blob, hset_blob};
use crate::connection::{ClientError, Connection};
use crate::format::{render, OutputFormat};
use crate::matrix::{format_row, parse_row, zadd_matrix, zrangebyscore_matrix, MatrixRow};

/// How often a subscription stream checks for an interrupt.
const POLL_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientConfig {
    pub host: String,
    pub port: u16,
    pub format: OutputFormat,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            host: "localhost".into(),
            port: 6379,
            format: OutputFormat::Raw,
        }
    }
}

impl ClientConfig {
    pub fn address(&self) -> String {
        if self.host.contains(':') && !self.host.starts_with('[') {
            format!("[{}]:{}", self.host, self.port)
        } else {
            format!("{}:{}", self.host, self.port)
        }
    }

    pub fn connect(&self) -> Result<Connection, ClientError> {
        Connection::connect(self.address())
    }
}

/// Interrupt state shared with a signal handler.
#[derive(Debug, Default)]
pub struct Interrupt {
    requested: AtomicBool,
    streaming: AtomicBool,
}

impl Interrupt {
    pub const fn new() -> Self {
        Self {
            requested: AtomicBool::new(false),
            streaming: AtomicBool::new(false),
        }
    }

    /// Called from the signal handler. Returns false when no subscription
    /// is streaming, meaning the interrupt should end the program instead.
    pub fn trigger(&self) -> bool {
        if self.streaming.load(Ordering::SeqCst) {
            self.requested.store(true, Ordering::SeqCst);
            true
        } else {
            false
        }
    }

    fn take(&self) -> bool {
        self.requested.swap(false, Ordering::SeqCst)
    }
}

/// Exit status for a failure to connect or to use the tool correctly.
pub const EXIT_FAILURE: i32 = 1;

/// Sends one command and prints its reply. Error replies still exit 0.
pub fn run_once(
    config: &ClientConfig,
    args: &[Vec<u8>],
    out: &mut dyn Write,
    err: &mut dyn Write,
    interrupt: &Interrupt,
) -> i32 {
    let mut conn = match config.connect() {
        Ok(c) => c,
        Err(e) => return connect_failed(config, e, err),
    };
    match execute(&mut conn, config.format, args, out, interrupt) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "Error: {e}");
            EXIT_FAILURE
        }
    }
}

fn connect_failed(config: &ClientConfig, e: ClientError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "Could not connect to {}: {e}", config.address());
    EXIT_FAILURE
}

/// Runs one command on an open connection. SUBSCRIBE keeps printing
/// messages until `interrupt` fires, then unsubscribes.
pub fn execute(
    conn: &mut Connection,
    format: OutputFormat,
    args: &[Vec<u8>],
    out: &mut dyn Write,
    interrupt: &Interrupt,
) -> Result<(), ClientError> {
    let subscribing = args
        .first()
        .is_some_and(|name| name.eq_ignore_ascii_case(b"subscribe"));
    conn.send(args)?;
    let first = conn.read_reply()?;
    if !subscribing || first.is_error() {
        out.write_all(&render(&first, format))?;
        return Ok(());
    }
    if format == OutputFormat::Human {
        writeln!(out, "Reading messages... (press Ctrl-C to quit)")?;
    }
    out.write_all(&render(&first, format))?;
    out.flush()?;
    stream(conn, format, out, interrupt)
}

fn stream(
    conn: &mut Connection,
    format: OutputFormat,
    out: &mut dyn Write,
    interrupt: &Interrupt,
) -> Result<(), ClientError> {
    interrupt.streaming.store(true, Ordering::SeqCst);
    conn.set_read_timeout(Some(POLL_INTERVAL))?;
    let result = (|| {
        loop {
            if interrupt.take() {
                break;
            }
            if let Some(frame) = conn.poll_reply()? {
                out.write_all(&render(&frame, format))?;
                out.flush()?;
            }
        }
        conn.set_read_timeout(None)?;
        conn.send(&[b"UNSUBSCRIBE"])?;
        loop {
            let frame = conn.read_reply()?;
            out.write_all(&render(&frame, format))?;
            if let Some(PubSubMessage::Unsubscribe { count: 0, .. }) =
                PubSubMessage::from_value(&frame)
            {
                break;
            }
        }
        out.flush()?;
        Ok(())
    })();
    interrupt.streaming.store(false, Ordering::SeqCst);
    let _ = conn.set_read_timeout(None);
    result
}

/// Interactive loop: reads command lines from `input` until EOF or `quit`.
pub fn repl(
    config: &ClientConfig,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    interrupt: &Interrupt,
) -> i32 {
    let prompt = format!("{}> ", config.address());
    let mut conn = config
        .connect()
        .map_err(|e| connect_failed(config, e, err))
        .ok();
    let mut line = String::new();
    loop {
        let _ = write!(
            out,
            "{}",
            if conn.is_some() {
                &prompt
            } else {
                "not connected> "
            }
        );
        let _ = out.flush();
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) => return 0,
            Ok(_) => {}
            Err(e) => {
                let _ = writeln!(err, "Error: {e}");
                return EXIT_FAILURE;
            }
        }
        let args = match split_args(line.as_bytes()) {
            Ok(a) if a.is_empty() => continue,
            Ok(a) => a,
            Err(_) => {
                let _ = writeln!(out, "Invalid argument(s)");
                continue;
            }
        };
        if args.len() == 1
            && (args[0].eq_ignore_ascii_case(b"quit") || args[0].eq_ignore_ascii_case(b"exit"))
        {
            return 0;
        }
        if conn.is_none() {
            conn = config
                .connect()
                .map_err(|e| connect_failed(config, e, err))
                .ok();
        }
        let Some(c) = conn.as_mut() else { continue };
        if let Err(e) = execute(c, config.format, &args, out, interrupt) {
            let _ = writeln!(err, "Error: {e}");
            conn = None;
        }
    }
}

/// Helper subcommands layered on ordinary commands.
#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Helper {
    /// Store matrix rows as sorted-set members scored by their first column.
    /// Rows are numbers separated by commas or spaces; with no ROW
    /// arguments, one row per line is read from stdin.
    ZaddMatrix { key: String, rows: Vec<String> },
    /// Print the stored rows whose score is within MIN..MAX, one per line.
    ZrangeMatrix {
        key: String,
        #[arg(allow_hyphen_values = true)]
        min: String,
        #[arg(allow_hyphen_values = true)]
        max: String,
    },
    /// Store the bytes of FILE (or stdin when omitted or `-`) in a hash field.
    HsetBlob {
        key: String,
        field: String,
        file: Option<PathBuf>,
    },
    /// Write a hash field's bytes to FILE (or stdout).
    HgetBlob {
        key: String,
        field: String,
        file: Option<PathBuf>,
    },
}

impl Helper {
    pub const NAMES: [&'static str; 4] = ["zadd-matrix", "zrange-matrix", "hset-blob", "hget-blob"];
}

pub fn run_helper(
    config: &ClientConfig,
    helper: &Helper,
    input: &mut dyn Read,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let rows = match helper {
        Helper::ZaddMatrix { rows, .. } => match read_rows(rows, input) {
            Ok(r) => Some(r),
            Err(e) => {
                let _ = writeln!(err, "Error: {e}");
                return EXIT_FAILURE;
            }
        },
        _ => None,
    };
    let payload = match helper {
        Helper::HsetBlob { file, .. } => match read_payload(file.as_ref(), input) {
            Ok(p) => Some(p),
            Err(e) => {
                let _ = writeln!(err, "Error: {e}");
                return EXIT_FAILURE;
            }
        },
        _ => None,
    };
    if let Some(rows) = &rows {
        if let Err(e) = crate::matrix::check_shape(rows) {
            let _ = writeln!(err, "Error: {e}");
            return EXIT_FAILURE;
        }
    }
    let mut conn = match config.connect() {
        Ok(c) => c,
        Err(e) => return connect_failed(config, e, err),
    };
    let result = (|| -> Result<(), ClientError> {
        match helper {
            Helper::ZaddMatrix { key, .. } => {
                let rows = rows.as_deref().unwrap_or_default();
                let added = zadd_matrix(&mut conn, key.as_bytes(), rows)?;
                out.write_all(&render(&Value::Integer(added), config.format))?;
            }
            Helper::ZrangeMatrix { key, min, max } => {
                for row in zrangebyscore_matrix(&mut conn, key.as_bytes(), min, max)? {
                    writeln!(out, "{}", format_row(&row))?;
                }
            }
            Helper::HsetBlob { key, field, .. } => {
                let payload = payload.as_deref().unwrap_or_default();
                let n = hset_blob(&mut conn, key.as_bytes(), field.as_bytes(), payload)?;
                out.write_all(&render(&Value::Integer(n), config.format))?;
            }
            Helper::HgetBlob { key, field, file } => {
                match hget_blob(&mut conn, key.as_bytes(), field.as_bytes())? {
                    Some(bytes) => match file {
                        Some(path) => std::fs::write(path, bytes)?,
                        None => out.write_all(&bytes)?,
                    },
                    None => writeln!(err, "(nil)")?,
                }
            }
        }
        out.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        // Error replies count as a normal outcome, as for plain commands.
        Err(ClientError::Server(msg)) => {
            let _ = out.write_all(&render(&Value::Error(msg), config.format));
            0
        }
        Err(e) => {
            let _ = writeln!(err, "Error: {e}");
            EXIT_FAILURE
        }
    }
}

fn read_rows(args: &[String], input: &mut dyn Read) -> Result<Vec<MatrixRow>, String> {
    let mut text = String::new();
    let lines: Vec<&str> = if args.is_empty() {
        input
            .read_to_string(&mut text)
            .map_err(|e| format!("reading stdin: {e}"))?;
        text.lines().filter(|l| !l.trim().is_empty()).collect()
    } else {
        args.iter().map(String::as_str).collect()
    };
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_row(l).map_err(|e| format!("row {i}: {e}")))
        .collect()
}

fn read_payload(file: Option<&PathBuf>, input: &mut dyn Read) -> Result<Vec<u8>, String> {
    match file {
        Some(path) if path.as_os_str() != "-" => {
            std::fs::read(path).map_err(|e| format!("reading {}: {e}", path.display()))
        }
        _ => {
            let mut buf = Vec::new();
            input
                .read_to_end(&mut buf)
                .map_err(|e| format!("reading stdin: {e}"))?;
            Ok(buf)
        }
    }
}

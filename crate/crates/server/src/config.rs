//! Server configuration: defaults, config-file parsing, validation.
//!
//! The config file is plain text, one `directive value` pair per line. Blank
//! lines and lines starting with `#` are ignored. Command-line flags are
//! applied after the file, so they win.

use std::path::Path;

use miniredis_core::DecodeLimits;
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 6379;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub max_clients: usize,
    /// Bytes a session may have queued for writing before it is dropped.
    pub output_queue_cap: usize,
    pub decode_limits: DecodeLimits,
    pub log_level: LogLevel,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            max_clients: 10_000,
            output_queue_cap: 32 * 1024 * 1024,
            decode_limits: DecodeLimits::default(),
            log_level: LogLevel::Notice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Debug,
    Verbose,
    Notice,
    Warning,
}

impl LogLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "debug" => Some(LogLevel::Debug),
            "verbose" | "info" => Some(LogLevel::Verbose),
            "notice" => Some(LogLevel::Notice),
            "warning" | "warn" => Some(LogLevel::Warning),
            _ => None,
        }
    }

    /// Equivalent `tracing` filter directive.
    pub fn as_filter(self) -> &'static str {
        match self {
            LogLevel::Debug => "debug",
            LogLevel::Verbose | LogLevel::Notice => "info",
            LogLevel::Warning => "warn",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: unknown directive '{directive}'")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: directive '{directive}' needs exactly one value")]
    WrongArgCount { line: usize, directive: String },
    #[error("line {line}: invalid value '{value}' for '{directive}'")]
    InvalidValue {
        line: usize,
        directive: String,
        value: String,
    },
    #[error("port must be between 1 and 65535")]
    PortOutOfRange,
    #[error("maxclients must be at least 1")]
    NoClients,
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config = Self::default();
        config.apply_file(&text)?;
        Ok(config)
    }

    /// Applies every directive in `text` on top of the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut words = trimmed.split_whitespace();
            let directive = words
                .next()
                .expect("line is not blank")
                .to_ascii_lowercase();
            let values: Vec<&str> = words.collect();
            let [value] = values.as_slice() else {
                return Err(ConfigError::WrongArgCount { line, directive });
            };
            let value = value.trim_matches('"');
            let invalid = || ConfigError::InvalidValue {
                line,
                directive: directive.clone(),
                value: value.to_string(),
            };
            match directive.as_str() {
                "bind" => self.bind = value.to_string(),
                "port" => self.port = value.parse().map_err(|_| invalid())?,
                "maxclients" => self.max_clients = value.parse().map_err(|_| invalid())?,
                "loglevel" => self.log_level = LogLevel::parse(value).ok_or_else(invalid)?,
                "output-queue-cap" => {
                    self.output_queue_cap = parse_size(value).ok_or_else(invalid)?
                }
                "proto-max-bulk-len" => {
                    self.decode_limits.max_bulk_len = parse_size(value).ok_or_else(invalid)?
                }
                "proto-max-array-len" => {
                    self.decode_limits.max_array_len = value.parse().map_err(|_| invalid())?
                }
                "proto-max-depth" => {
                    self.decode_limits.max_depth = value.parse().map_err(|_| invalid())?
                }
                _ => return Err(ConfigError::UnknownDirective { line, directive }),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::PortOutOfRange);
        }
        if self.max_clients == 0 {
            return Err(ConfigError::NoClients);
        }
        Ok(())
    }

    pub fn address(&self) -> String {
        if self.bind.contains(':') && !self.bind.starts_with('[') {
            format!("[{}]:{}", self.bind, self.port)
        } else {
            format!("{}:{}", self.bind, self.port)
        }
    }
}

/// Parses a byte count with an optional `k`/`kb`/`m`/`mb`/`g`/`gb` suffix
/// (powers of 1024).
pub fn parse_size(s: &str) -> Option<usize> {
    let lower = s.to_ascii_lowercase();
    let digits_end = lower
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(lower.len());
    let (number, unit) = lower.split_at(digits_end);
    let n: usize = number.parse().ok()?;
    let scale: usize = match unit {
        "" | "b" => 1,
        "k" | "kb" => 1 << 10,
        "m" | "mb" => 1 << 20,
        "g" | "gb" => 1 << 30,
        _ => return None,
    };
    n.checked_mul(scale)
}

//! Reply printing in the two `redis-cli` styles.

use miniredis_core::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    /// Bare values, one per line, as `redis-cli --raw` prints them.
    #[default]
    Raw,
    /// Decorated values as `redis-cli` prints them on a terminal.
    Human,
}

/// Renders a reply, including the trailing newline.
pub fn render(value: &Value, format: OutputFormat) -> Vec<u8> {
    let mut out = match format {
        OutputFormat::Raw => raw(value),
        OutputFormat::Human => human(value),
    };
    out.push(b'\n');
    out
}

fn raw(value: &Value) -> Vec<u8> {
    match value {
        Value::Simple(s) => s.clone().into_bytes(),
        Value::Error(e) => format!("(error) {e}").into_bytes(),
        Value::Integer(n) => n.to_string().into_bytes(),
        Value::Bulk(Some(b)) => b.clone(),
        Value::Bulk(None) | Value::Array(None) => Vec::new(),
        Value::Array(Some(items)) => {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b'\n');
                }
                out.extend(raw(item));
            }
            out
        }
    }
}

fn human(value: &Value) -> Vec<u8> {
    match value {
        Value::Simple(s) => s.clone().into_bytes(),
        Value::Error(e) => format!("(error) {e}").into_bytes(),
        Value::Integer(n) => format!("(integer) {n}").into_bytes(),
        Value::Bulk(Some(b)) => quote(b).into_bytes(),
        Value::Bulk(None) | Value::Array(None) => b"(nil)".to_vec(),
        Value::Array(Some(items)) if items.is_empty() => b"(empty array)".to_vec(),
        Value::Array(Some(items)) => {
            let width = items.len().to_string().len();
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b'\n');
                }
                let prefix = format!("{:>width$}) ", i + 1);
                let indent = " ".repeat(prefix.len());
                let body = human(item);
                out.extend_from_slice(prefix.as_bytes());
                for (j, line) in body.split(|&b| b == b'\n').enumerate() {
                    if j > 0 {
                        out.push(b'\n');
                        out.extend_from_slice(indent.as_bytes());
                    }
                    out.extend_from_slice(line);
                }
            }
            out
        }
    }
}

/// Double-quotes `bytes`, escaping anything not printable ASCII.
pub fn quote(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() + 2);
    s.push('"');
    for &b in bytes {
        match b {
            b'\\' => s.push_str("\\\\"),
            b'"' => s.push_str("\\\""),
            b'\n' => s.push_str("\\n"),
            b'\r' => s.push_str("\\r"),
            b'\t' => s.push_str("\\t"),
            0x07 => s.push_str("\\a"),
            0x08 => s.push_str("\\b"),
            0x20..=0x7e => s.push(b as char),
            _ => s.push_str(&format!("\\x{b:02x}")),
        }
    }
    s.push('"');
    s
}

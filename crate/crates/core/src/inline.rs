//! Tokenizer for inline (telnet-style) command lines.
//!
//! Follows the quoting rules of `redis-cli`: double-quoted tokens understand
//! `\n \r \t \b \a \\ \"` and `\xHH` escapes, single-quoted tokens only `\'`,
//! and a closing quote must be followed by whitespace or the end of line.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unbalanced quotes in request")]
pub struct UnbalancedQuotes;

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

fn hex_value(b: u8) -> Option<u8> {
    (b as char).to_digit(16).map(|d| d as u8)
}

/// Splits one command line into arguments.
///
/// An empty or all-whitespace line yields no arguments.
pub fn split_args(line: &[u8]) -> Result<Vec<Vec<u8>>, UnbalancedQuotes> {
    let mut args = Vec::new();
    let mut i = 0;
    let n = line.len();
    loop {
        while i < n && is_space(line[i]) {
            i += 1;
        }
        if i == n {
            return Ok(args);
        }
        let mut token = Vec::new();
        let mut in_double = false;
        let mut in_single = false;
        loop {
            if in_double {
                let Some(&c) = line.get(i) else {
                    return Err(UnbalancedQuotes);
                };
                if c == b'\\' && i + 3 < n && line[i + 1] == b'x' {
                    if let (Some(hi), Some(lo)) = (hex_value(line[i + 2]), hex_value(line[i + 3])) {
                        token.push(hi * 16 + lo);
                        i += 4;
                        continue;
                    }
                }
                if c == b'\\' && i + 1 < n {
                    i += 1;
                    token.push(match line[i] {
                        b'n' => b'\n',
                        b'r' => b'\r',
                        b't' => b'\t',
                        b'b' => 0x08,
                        b'a' => 0x07,
                        other => other,
                    });
                } else if c == b'"' {
                    if i + 1 < n && !is_space(line[i + 1]) {
                        return Err(UnbalancedQuotes);
                    }
                    i += 1;
                    break;
                } else {
                    token.push(c);
                }
                i += 1;
            } else if in_single {
                let Some(&c) = line.get(i) else {
                    return Err(UnbalancedQuotes);
                };
                if c == b'\\' && i + 1 < n && line[i + 1] == b'\'' {
                    token.push(b'\'');
                    i += 2;
                    continue;
                } else if c == b'\'' {
                    if i + 1 < n && !is_space(line[i + 1]) {
                        return Err(UnbalancedQuotes);
                    }
                    i += 1;
                    break;
                }
                token.push(c);
                i += 1;
            } else {
                match line.get(i) {
                    None | Some(b' ' | b'\n' | b'\r' | b'\t' | 0) => break,
                    Some(b'"') => in_double = true,
                    Some(b'\'') => in_single = true,
                    Some(&c) => token.push(c),
                }
                i += 1;
            }
        }
        args.push(token);
    }
}

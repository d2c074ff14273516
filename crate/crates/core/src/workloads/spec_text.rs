//! Line-oriented textual form for transaction specs, used by test fixtures
//! and the `gen` subcommand:
//!
//! ```text
//! TXN 7 | RMW k1 ADD 5 | WRITE k2 COPY 0 | CHECK k3 POS
//! ```
//!
//! Keys are `k<record>` for table 0 or `k<table>:<record>` otherwise.

use thiserror::Error;

use crate::storage::Key;
use crate::txn::{Compute, Step, StepKind, TxnSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

pub fn format_txn(spec: &TxnSpec) -> String {
    let mut out = format!("TXN {}", spec.txn_id);
    for step in &spec.steps {
        out.push_str(" | ");
        out.push_str(&format_step(step));
    }
    out
}

fn format_key(key: &Key) -> String {
    if key.table == 0 {
        format!("k{}", key.record)
    } else {
        format!("k{}:{}", key.table, key.record)
    }
}

fn format_step(step: &Step) -> String {
    let key = format_key(&step.key);
    match (step.kind, step.compute) {
        (StepKind::Read, Compute::Identity) => format!("READ {key}"),
        (StepKind::Write, Compute::Const(c)) => format!("WRITE {key} CONST {c}"),
        (StepKind::Write, Compute::CopyFrom(s)) => format!("WRITE {key} COPY {s}"),
        (StepKind::Rmw, Compute::AddDelta(d)) => format!("RMW {key} ADD {d}"),
        (StepKind::Rmw, Compute::MulFactor(f)) => format!("RMW {key} MUL {f}"),
        (StepKind::ReadAbortCheck, Compute::CheckPositive) => format!("CHECK {key} POS"),
        (StepKind::ReadAbortCheck, Compute::CheckNotPoison) => format!("CHECK {key} NOTPOISON"),
        (kind, compute) => format!("UNSUPPORTED {key} {kind:?} {compute:?}"),
    }
}

fn parse_key(token: &str, line: usize) -> Result<Key, ParseError> {
    let body = token
        .strip_prefix('k')
        .ok_or_else(|| err(line, format!("key must start with 'k': {token}")))?;
    let (table, record) = match body.split_once(':') {
        Some((t, r)) => (
            t.parse::<u16>()
                .map_err(|_| err(line, format!("bad table in {token}")))?,
            r,
        ),
        None => (0, body),
    };
    let record = record
        .parse::<u64>()
        .map_err(|_| err(line, format!("bad record in {token}")))?;
    Ok(Key::new(table, record))
}

pub fn parse_txn(text: &str) -> Result<TxnSpec, ParseError> {
    parse_txn_at(text, 1)
}

fn parse_txn_at(text: &str, line: usize) -> Result<TxnSpec, ParseError> {
    let mut parts = text.split('|').map(str::trim);
    let header = parts.next().unwrap_or_default();
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("TXN") {
        return Err(err(line, "expected 'TXN <id>' header"));
    }
    let txn_id = header_tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(line, "bad transaction id"))?;

    let mut steps = Vec::new();
    for part in parts {
        if part.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = part.split_whitespace().collect();
        let step = match tokens.as_slice() {
            ["READ", key] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::Read,
                compute: Compute::Identity,
            },
            ["WRITE", key, "CONST", c] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::Write,
                compute: Compute::Const(
                    c.parse().map_err(|_| err(line, format!("bad const {c}")))?,
                ),
            },
            ["WRITE", key, "COPY", s] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::Write,
                compute: Compute::CopyFrom(
                    s.parse().map_err(|_| err(line, format!("bad slot {s}")))?,
                ),
            },
            ["RMW", key, "ADD", d] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::Rmw,
                compute: Compute::AddDelta(
                    d.parse().map_err(|_| err(line, format!("bad delta {d}")))?,
                ),
            },
            ["RMW", key, "MUL", f] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::Rmw,
                compute: Compute::MulFactor(
                    f.parse().map_err(|_| err(line, format!("bad factor {f}")))?,
                ),
            },
            ["CHECK", key, "POS"] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::ReadAbortCheck,
                compute: Compute::CheckPositive,
            },
            ["CHECK", key, "NOTPOISON"] => Step {
                key: parse_key(key, line)?,
                kind: StepKind::ReadAbortCheck,
                compute: Compute::CheckNotPoison,
            },
            other => return Err(err(line, format!("unknown op {other:?}"))),
        };
        steps.push(step);
    }
    Ok(TxnSpec::from_steps(txn_id, steps))
}

/// Parse one spec per non-empty line; `#` starts a comment line.
pub fn parse_stream(text: &str) -> Result<Vec<TxnSpec>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_txn_at(line, i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_the_catalog() {
        let text = "TXN 7 | RMW k1 ADD 5 | WRITE k2 COPY 0 | CHECK k3 POS | RMW k2:9 MUL -2 | WRITE k4 CONST -7 | READ k5 | CHECK k6 NOTPOISON";
        let spec = parse_txn(text).unwrap();
        assert_eq!(spec.txn_id, 7);
        assert_eq!(spec.steps.len(), 7);
        assert_eq!(spec.steps[3].key, Key::new(2, 9));
        assert_eq!(format_txn(&spec), text);
    }

    #[test]
    fn rejects_unknown_ops() {
        assert!(parse_txn("TXN 1 | FROB k1").is_err());
        assert!(parse_txn("RMW k1 ADD 5").is_err());
        assert!(parse_txn("TXN 1 | WRITE k1 CONST abc").is_err());
    }

    #[test]
    fn stream_skips_comments_and_blanks() {
        let text = "# fixture\nTXN 1 | READ k1\n\nTXN 2 | RMW k1 ADD 1\n";
        let specs = parse_stream(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[1].txn_id, 2);
    }
}

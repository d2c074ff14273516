//! Single-threaded serial reference executor.
//!
//! Replays transaction specs directly — not fragments — against a plain map,
//! in the order given, rolling back any transaction whose check fails. It
//! shares nothing with the queue engine beyond the step semantics, so it
//! cross-checks fragmentation, planning and execution at once.

use std::collections::BTreeMap;

use crate::storage::{to_hex, value_from_i64, value_to_i64, Key, Value};
use crate::txn::{FragmentError, StepKind, TxnSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleDecision {
    Committed,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub final_state: BTreeMap<Key, Value>,
    pub decisions: BTreeMap<u64, OracleDecision>,
}

impl OracleResult {
    /// Same sorted CSV shape as the store dump, for diffing.
    pub fn dump_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.final_state {
            out.push_str(&format!("{},{},{}\n", key.table, key.record, to_hex(value)));
        }
        out
    }
}

/// Execute every transaction to completion, sequentially, in the order
/// given. A transaction's writes become visible only if all of its checks
/// pass; otherwise the whole transaction is rolled back. Steps outside the
/// declared read/write sets are rejected, same as the engine.
pub fn serial_execute(
    initial_state: &BTreeMap<Key, Value>,
    txns: &[TxnSpec],
) -> Result<OracleResult, FragmentError> {
    let mut state = initial_state.clone();
    let mut decisions = BTreeMap::new();
    for spec in txns {
        if let Some((idx, step)) = spec
            .steps
            .iter()
            .enumerate()
            .find(|(_, s)| !spec.covers(&s.key))
        {
            return Err(FragmentError::UncoveredKey {
                step: idx,
                key: step.key,
            });
        }
        match run_txn(&state, spec) {
            Some(writes) => {
                for (key, value) in writes {
                    state.insert(key, value);
                }
                decisions.insert(spec.txn_id, OracleDecision::Committed);
            }
            None => {
                decisions.insert(spec.txn_id, OracleDecision::Aborted);
            }
        }
    }
    Ok(OracleResult {
        final_state: state,
        decisions,
    })
}

/// Run one spec against a read-only view plus a local write overlay.
/// Returns the overlay on success, `None` on a failed check.
fn run_txn(state: &BTreeMap<Key, Value>, spec: &TxnSpec) -> Option<BTreeMap<Key, Value>> {
    let mut overlay: BTreeMap<Key, Value> = BTreeMap::new();
    let mut slots: BTreeMap<u16, i64> = BTreeMap::new();
    for (idx, step) in spec.steps.iter().enumerate() {
        let read = |key: &Key| -> i64 {
            overlay
                .get(key)
                .or_else(|| state.get(key))
                .map(|v| value_to_i64(v))
                .unwrap_or_default()
        };
        match step.kind {
            StepKind::Read => {
                slots.insert(idx as u16, read(&step.key));
            }
            StepKind::ReadAbortCheck => {
                let v = read(&step.key);
                slots.insert(idx as u16, v);
                if !step.compute.check(v) {
                    return None;
                }
            }
            StepKind::Rmw => {
                let pre = read(&step.key);
                slots.insert(idx as u16, pre);
                let post = step
                    .compute
                    .apply(pre, |s| slots.get(&s).copied().unwrap_or_default());
                overlay.insert(step.key, value_from_i64(post));
            }
            StepKind::Write => {
                let v = step
                    .compute
                    .apply(read(&step.key), |s| slots.get(&s).copied().unwrap_or_default());
                overlay.insert(step.key, value_from_i64(v));
            }
        }
    }
    Some(overlay)
}

/// Convenience: initial state from (record-in-table-0, value) pairs.
pub fn state_from(pairs: &[(u64, i64)]) -> BTreeMap<Key, Value> {
    pairs
        .iter()
        .map(|(r, v)| (Key::new(0, *r), value_from_i64(*v)))
        .collect()
}

//! Two-phase locking with no-wait conflict handling, the non-deterministic
//! comparison engine.
//!
//! Worker threads pull whole transactions from a shared cursor, acquire
//! locks in step order as they execute, and abort immediately on any lock
//! conflict (releasing everything, backing off, and retrying up to a
//! budget). Writes are buffered and applied to committed state only once
//! every step succeeded, under the exclusive locks, so the schedule is
//! strict and serializable in commit order. No deadlock is possible since
//! no acquisition ever blocks.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;

use crate::storage::{value_from_i64, value_to_i64, Key, Store};
use crate::txn::{StepKind, TxnId, TxnSpec};

const LOCK_SHARDS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LockState {
    Shared(u32),
    Exclusive(TxnId),
}

/// Sharded no-wait lock table. Every acquisition returns immediately.
pub struct LockTable {
    shards: Vec<Mutex<HashMap<Key, LockState>>>,
}

impl Default for LockTable {
    fn default() -> Self {
        Self::new()
    }
}

impl LockTable {
    pub fn new() -> Self {
        LockTable {
            shards: (0..LOCK_SHARDS)
                .map(|_| Mutex::new(HashMap::new()))
                .collect(),
        }
    }

    fn shard(&self, key: &Key) -> &Mutex<HashMap<Key, LockState>> {
        &self.shards[(crate::planner::hash_key(key) as usize) % LOCK_SHARDS]
    }

    fn try_shared(&self, key: Key) -> bool {
        let mut shard = self.shard(&key).lock();
        match shard.get_mut(&key) {
            None => {
                shard.insert(key, LockState::Shared(1));
                true
            }
            Some(LockState::Shared(n)) => {
                *n += 1;
                true
            }
            Some(LockState::Exclusive(_)) => false,
        }
    }

    fn try_exclusive(&self, key: Key, txn: TxnId) -> bool {
        let mut shard = self.shard(&key).lock();
        match shard.get(&key) {
            None => {
                shard.insert(key, LockState::Exclusive(txn));
                true
            }
            Some(_) => false,
        }
    }

    /// Shared-to-exclusive upgrade; legal only while we are the sole reader.
    fn try_upgrade(&self, key: Key, txn: TxnId) -> bool {
        let mut shard = self.shard(&key).lock();
        match shard.get(&key) {
            Some(LockState::Shared(1)) => {
                shard.insert(key, LockState::Exclusive(txn));
                true
            }
            _ => false,
        }
    }

    fn release(&self, key: Key, exclusive: bool) {
        let mut shard = self.shard(&key).lock();
        match shard.get_mut(&key) {
            Some(LockState::Shared(n)) if !exclusive => {
                *n -= 1;
                if *n == 0 {
                    shard.remove(&key);
                }
            }
            Some(LockState::Exclusive(_)) if exclusive => {
                shard.remove(&key);
            }
            _ => unreachable!("released a lock that was not held"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineOutcome {
    Committed,
    /// A check failed; final, never retried.
    LogicAbort,
    /// Retry budget exhausted on lock conflicts.
    Unresolved,
}

#[derive(Debug)]
pub struct BaselineResult {
    pub decisions: Vec<(TxnId, BaselineOutcome)>,
    pub conflict_aborts: u64,
    pub retries: u64,
    /// Commit sequence, the order against which the serial oracle must agree.
    pub commit_order: Vec<TxnId>,
    pub latencies_us: Vec<u64>,
    pub wall: Duration,
}

impl BaselineResult {
    pub fn committed_count(&self) -> usize {
        self.decisions
            .iter()
            .filter(|(_, o)| *o == BaselineOutcome::Committed)
            .count()
    }

    pub fn unresolved_count(&self) -> usize {
        self.decisions
            .iter()
            .filter(|(_, o)| *o == BaselineOutcome::Unresolved)
            .count()
    }
}

#[derive(Default)]
struct WorkerOut {
    decisions: Vec<(TxnId, BaselineOutcome)>,
    conflict_aborts: u64,
    retries: u64,
    commits: Vec<(u64, TxnId)>,
    latencies_us: Vec<u64>,
}

/// Execute a transaction stream with `thread_count` workers over the shared
/// store. Aborted-beyond-budget transactions are reported, not dropped
/// silently.
pub fn run_2pl_nowait(
    store: &Store,
    txns: &[TxnSpec],
    thread_count: usize,
    retry_budget: u32,
) -> BaselineResult {
    let lock_table = LockTable::new();
    let cursor = AtomicUsize::new(0);
    let commit_seq = AtomicU64::new(0);
    let started = Instant::now();

    let outs: Vec<WorkerOut> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..thread_count.max(1))
            .map(|_| {
                let lock_table = &lock_table;
                let cursor = &cursor;
                let commit_seq = &commit_seq;
                scope.spawn(move || {
                    let mut out = WorkerOut::default();
                    loop {
                        let i = cursor.fetch_add(1, Ordering::Relaxed);
                        if i >= txns.len() {
                            break;
                        }
                        let spec = &txns[i];
                        let t0 = Instant::now();
                        let outcome =
                            run_one(store, lock_table, commit_seq, spec, retry_budget, &mut out);
                        out.latencies_us.push(t0.elapsed().as_micros() as u64);
                        out.decisions.push((spec.txn_id, outcome));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("locking worker panicked"))
            .collect()
    });

    let mut decisions = Vec::new();
    let mut conflict_aborts = 0;
    let mut retries = 0;
    let mut commits: Vec<(u64, TxnId)> = Vec::new();
    let mut latencies_us = Vec::new();
    for out in outs {
        decisions.extend(out.decisions);
        conflict_aborts += out.conflict_aborts;
        retries += out.retries;
        commits.extend(out.commits);
        latencies_us.extend(out.latencies_us);
    }
    commits.sort_unstable();
    decisions.sort_unstable_by_key(|(t, _)| *t);
    BaselineResult {
        decisions,
        conflict_aborts,
        retries,
        commit_order: commits.into_iter().map(|(_, t)| t).collect(),
        latencies_us,
        wall: started.elapsed(),
    }
}

fn run_one(
    store: &Store,
    locks: &LockTable,
    commit_seq: &AtomicU64,
    spec: &TxnSpec,
    retry_budget: u32,
    out: &mut WorkerOut,
) -> BaselineOutcome {
    let mut attempt = 0u32;
    loop {
        match attempt_txn(store, locks, commit_seq, spec, out) {
            AttemptResult::Committed => return BaselineOutcome::Committed,
            AttemptResult::LogicAbort => return BaselineOutcome::LogicAbort,
            AttemptResult::Conflict => {
                out.conflict_aborts += 1;
                if attempt >= retry_budget {
                    return BaselineOutcome::Unresolved;
                }
                attempt += 1;
                out.retries += 1;
                backoff(spec.txn_id, attempt);
            }
        }
    }
}

struct Held {
    key: Key,
    exclusive: bool,
}

enum AttemptResult {
    Committed,
    LogicAbort,
    Conflict,
}

fn attempt_txn(
    store: &Store,
    locks: &LockTable,
    commit_seq: &AtomicU64,
    spec: &TxnSpec,
    out: &mut WorkerOut,
) -> AttemptResult {
    let mut held: Vec<Held> = Vec::with_capacity(spec.steps.len());
    let mut buffer: HashMap<Key, i64> = HashMap::new();
    let mut slots: HashMap<u16, i64> = HashMap::new();

    fn release_all(locks: &LockTable, held: &mut Vec<Held>) {
        while let Some(h) = held.pop() {
            locks.release(h.key, h.exclusive);
        }
    }

    for (idx, step) in spec.steps.iter().enumerate() {
        // Locks are taken in step order, never sorted: conflicts rather than
        // deadlocks are the failure mode here.
        let want_exclusive = step.writes_record();
        let acquired = match held.iter_mut().find(|h| h.key == step.key) {
            Some(h) if h.exclusive || !want_exclusive => true,
            Some(h) => {
                if locks.try_upgrade(step.key, spec.txn_id) {
                    h.exclusive = true;
                    true
                } else {
                    false
                }
            }
            None => {
                let ok = if want_exclusive {
                    locks.try_exclusive(step.key, spec.txn_id)
                } else {
                    locks.try_shared(step.key)
                };
                if ok {
                    held.push(Held {
                        key: step.key,
                        exclusive: want_exclusive,
                    });
                }
                ok
            }
        };
        if !acquired {
            release_all(locks, &mut held);
            return AttemptResult::Conflict;
        }

        let current = buffer.get(&step.key).copied().unwrap_or_else(|| {
            store
                .read_committed(&step.key)
                .map(|v| value_to_i64(&v))
                .unwrap_or_default()
        });
        match step.kind {
            StepKind::Read => {
                slots.insert(idx as u16, current);
            }
            StepKind::ReadAbortCheck => {
                slots.insert(idx as u16, current);
                if !step.compute.check(current) {
                    release_all(locks, &mut held);
                    return AttemptResult::LogicAbort;
                }
            }
            StepKind::Rmw => {
                slots.insert(idx as u16, current);
                let next = step
                    .compute
                    .apply(current, |s| slots.get(&s).copied().unwrap_or_default());
                buffer.insert(step.key, next);
            }
            StepKind::Write => {
                let next = step
                    .compute
                    .apply(current, |s| slots.get(&s).copied().unwrap_or_default());
                buffer.insert(step.key, next);
            }
        }
    }

    // Linearization point: writes land while every exclusive lock is held.
    let seq = commit_seq.fetch_add(1, Ordering::SeqCst);
    for (key, value) in &buffer {
        store.write_committed(*key, value_from_i64(*value));
    }
    out.commits.push((seq, spec.txn_id));
    release_all(locks, &mut held);
    AttemptResult::Committed
}

/// Exponential backoff with a per-transaction deterministic jitter. Early
/// attempts spin, later ones sleep, capped well under a millisecond.
fn backoff(txn_id: TxnId, attempt: u32) {
    let shift = attempt.min(8);
    let jitter = crate::planner::hash_key(&Key::new(0, txn_id ^ attempt as u64)) % 32;
    if attempt <= 4 {
        let spins = (1u64 << shift) * 16 + jitter;
        for _ in 0..spins {
            std::hint::spin_loop();
        }
    } else {
        std::thread::sleep(Duration::from_micros((1 << shift.min(6)) + jitter));
    }
}

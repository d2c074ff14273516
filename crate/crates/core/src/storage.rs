//! In-memory versioned key-value store.
//!
//! Each record carries one committed value plus an ordered, batch-local list
//! of speculative versions. Executors append speculative versions in strictly
//! ascending fragment priority (the planner routes all writes for a key to a
//! single executor, so there is exactly one writer per key); the committed
//! value changes only at the batch barrier, when [`Store::install_batch`]
//! folds the surviving speculative versions in and clears the lists.
//!
//! Values are opaque byte sequences; the benchmarks use 8-byte little-endian
//! integers via [`value_from_i64`] / [`value_to_i64`].

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::planner::FragmentPriority;
use crate::txn::TxnId;

pub type Value = Vec<u8>;

pub fn value_from_i64(v: i64) -> Value {
    v.to_le_bytes().to_vec()
}

/// Interprets up to the first 8 bytes as a little-endian integer; shorter
/// values are zero-padded. Total on all inputs so the compute catalog is
/// defined for any stored value.
pub fn value_to_i64(v: &[u8]) -> i64 {
    let mut buf = [0u8; 8];
    let n = v.len().min(8);
    buf[..n].copy_from_slice(&v[..n]);
    i64::from_le_bytes(buf)
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct Key {
    pub table: u16,
    pub record: u64,
}

impl Key {
    pub fn new(table: u16, record: u64) -> Self {
        Key { table, record }
    }
}

/// Where a value read came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Committed,
    Speculative(TxnId),
}

#[derive(Debug, Clone)]
pub struct SpecEntry {
    pub txn_id: TxnId,
    pub priority: FragmentPriority,
    pub value: Value,
    pub aborted: bool,
}

/// Identifies one speculative version for later abort marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryHandle {
    pub key: Key,
    pub txn_id: TxnId,
    pub priority: FragmentPriority,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StorageError {
    #[error("key {0:?} was never loaded")]
    KeyNotFound(Key),
    #[error("speculative write at {attempted:?} not above existing priority {existing:?} for {key:?}")]
    PriorityOrderViolation {
        key: Key,
        existing: FragmentPriority,
        attempted: FragmentPriority,
    },
    #[error("version {0:?} already marked aborted")]
    AlreadyAborted(EntryHandle),
    #[error("no speculative version matches {0:?}")]
    NoSuchVersion(EntryHandle),
    #[error("transaction {0} has no commit decision")]
    IncompleteDecisions(TxnId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitDecision {
    Commit,
    Abort,
}

/// Gate state a conservative reader sees for a speculative writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriterGate {
    Unresolved,
    WillCommit,
    Aborted,
}

/// Outcome of a gated read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatedRead {
    Value(Value, Provenance),
    /// Top relevant version belongs to a still-unresolved transaction.
    WaitOn(TxnId),
}

#[derive(Default)]
struct Record {
    committed: RwLock<Option<Value>>,
    spec: Mutex<Vec<SpecEntry>>,
}

const SHARDS: usize = 64;

/// Sharded record map. Records are created on first committed or speculative
/// write; reads of unknown keys fail with `KeyNotFound`.
pub struct Store {
    shards: Vec<RwLock<HashMap<Key, Arc<Record>>>>,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

impl Store {
    pub fn new() -> Self {
        Store {
            shards: (0..SHARDS).map(|_| RwLock::new(HashMap::new())).collect(),
        }
    }

    fn shard(&self, key: &Key) -> &RwLock<HashMap<Key, Arc<Record>>> {
        &self.shards[(crate::planner::hash_key(key) as usize) % SHARDS]
    }

    fn get(&self, key: &Key) -> Option<Arc<Record>> {
        self.shard(key).read().get(key).cloned()
    }

    fn get_or_insert(&self, key: Key) -> Arc<Record> {
        if let Some(rec) = self.get(&key) {
            return rec;
        }
        let mut shard = self.shard(&key).write();
        shard.entry(key).or_default().clone()
    }

    /// Load committed values directly, outside any batch.
    pub fn bulk_load(&self, pairs: impl IntoIterator<Item = (Key, Value)>) {
        for (key, value) in pairs {
            self.write_committed(key, value);
        }
    }

    /// Direct committed write; used by bulk load and the locking baseline,
    /// never by queue execution.
    pub fn write_committed(&self, key: Key, value: Value) {
        let rec = self.get_or_insert(key);
        *rec.committed.write() = Some(value);
    }

    pub fn read_committed(&self, key: &Key) -> Result<Value, StorageError> {
        let rec = self.get(key).ok_or(StorageError::KeyNotFound(*key))?;
        let committed = rec.committed.read().clone();
        committed.ok_or(StorageError::KeyNotFound(*key))
    }

    /// Highest-priority live speculative version, falling back to the
    /// committed value. Returns the writer so the caller can record a
    /// speculation edge.
    pub fn read_latest(&self, key: &Key) -> Result<(Value, Provenance), StorageError> {
        let rec = self.get(key).ok_or(StorageError::KeyNotFound(*key))?;
        let spec = rec.spec.lock();
        for entry in spec.iter().rev() {
            if !entry.aborted {
                return Ok((entry.value.clone(), Provenance::Speculative(entry.txn_id)));
            }
        }
        drop(spec);
        let committed = rec.committed.read().clone();
        committed
            .map(|v| (v, Provenance::Committed))
            .ok_or(StorageError::KeyNotFound(*key))
    }

    /// Conservative-mode read: walk versions top-down consulting the writer's
    /// resolution state. Unresolved writer means the caller must retry later;
    /// aborted writers are skipped regardless of the entry flag.
    pub fn read_gated(
        &self,
        key: &Key,
        gate: impl Fn(TxnId) -> WriterGate,
    ) -> Result<GatedRead, StorageError> {
        let rec = self.get(key).ok_or(StorageError::KeyNotFound(*key))?;
        let spec = rec.spec.lock();
        for entry in spec.iter().rev() {
            match gate(entry.txn_id) {
                WriterGate::Unresolved => return Ok(GatedRead::WaitOn(entry.txn_id)),
                WriterGate::Aborted => continue,
                WriterGate::WillCommit => {
                    return Ok(GatedRead::Value(
                        entry.value.clone(),
                        Provenance::Speculative(entry.txn_id),
                    ))
                }
            }
        }
        drop(spec);
        let committed = rec.committed.read().clone();
        committed
            .map(|v| GatedRead::Value(v, Provenance::Committed))
            .ok_or(StorageError::KeyNotFound(*key))
    }

    /// Append a speculative version. Priorities must arrive strictly
    /// ascending per key; anything else is a planner routing bug.
    pub fn write_speculative(
        &self,
        key: Key,
        value: Value,
        txn_id: TxnId,
        priority: FragmentPriority,
    ) -> Result<EntryHandle, StorageError> {
        let rec = self.get_or_insert(key);
        let mut spec = rec.spec.lock();
        if let Some(last) = spec.last() {
            if last.priority >= priority {
                return Err(StorageError::PriorityOrderViolation {
                    key,
                    existing: last.priority,
                    attempted: priority,
                });
            }
        }
        spec.push(SpecEntry {
            txn_id,
            priority,
            value,
            aborted: false,
        });
        Ok(EntryHandle {
            key,
            txn_id,
            priority,
        })
    }

    /// Flag one speculative version dead. Marking twice reports
    /// `AlreadyAborted`; callers in release paths treat that as a no-op.
    pub fn mark_version_aborted(&self, handle: &EntryHandle) -> Result<(), StorageError> {
        let rec = self
            .get(&handle.key)
            .ok_or(StorageError::NoSuchVersion(*handle))?;
        let mut spec = rec.spec.lock();
        let entry = spec
            .iter_mut()
            .find(|e| e.txn_id == handle.txn_id && e.priority == handle.priority)
            .ok_or(StorageError::NoSuchVersion(*handle))?;
        if entry.aborted {
            return Err(StorageError::AlreadyAborted(*handle));
        }
        entry.aborted = true;
        Ok(())
    }

    /// Fold a finished batch into committed state: per key, the committed
    /// value becomes the highest-priority version whose transaction
    /// committed, and every speculative list empties. Aborted transactions
    /// leave no trace.
    pub fn install_batch<'a>(
        &self,
        dirty_keys: impl IntoIterator<Item = &'a Key>,
        decision: impl Fn(TxnId) -> Option<CommitDecision>,
    ) -> Result<(), StorageError> {
        for key in dirty_keys {
            let Some(rec) = self.get(key) else { continue };
            let mut spec = rec.spec.lock();
            let mut winner: Option<Value> = None;
            for entry in spec.iter() {
                match decision(entry.txn_id) {
                    None => return Err(StorageError::IncompleteDecisions(entry.txn_id)),
                    Some(CommitDecision::Commit) => winner = Some(entry.value.clone()),
                    Some(CommitDecision::Abort) => {}
                }
            }
            spec.clear();
            drop(spec);
            if let Some(v) = winner {
                *rec.committed.write() = Some(v);
            }
        }
        Ok(())
    }

    /// Number of speculative versions currently held for a key (testing aid).
    pub fn spec_len(&self, key: &Key) -> usize {
        self.get(key).map_or(0, |r| r.spec.lock().len())
    }

    pub fn snapshot_committed(&self) -> Vec<(Key, Value)> {
        let mut out = Vec::new();
        for shard in &self.shards {
            for (key, rec) in shard.read().iter() {
                if let Some(v) = rec.committed.read().clone() {
                    out.push((*key, v));
                }
            }
        }
        out.sort_by_key(|(k, _)| *k);
        out
    }

    /// Full committed state as sorted CSV lines `table,record,value_hex`.
    pub fn dump_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.snapshot_committed() {
            out.push_str(&format!(
                "{},{},{}\n",
                key.table,
                key.record,
                to_hex(&value)
            ));
        }
        out
    }

    /// Stable digest of the committed state, for determinism checks.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.dump_csv().as_bytes());
        to_hex(&hasher.finalize())
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

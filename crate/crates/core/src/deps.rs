//! Shared dependency registry for one batch: planned edges, single-assignment
//! value channels, conservative gates, transaction resolution state, and the
//! read-from taint used to close speculative cascades.
//!
//! The graph is built fresh per batch. Registration happens between the
//! planning barrier and execution, single-threaded; execution threads then
//! only publish/poll channels, record taint, and resolve transactions, all of
//! which are safe under concurrent access. Channels are write-once: a second
//! publish is a determinism violation and fails loudly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU8, Ordering};
use std::sync::OnceLock;

use parking_lot::Mutex;
use serde::Serialize;
use thiserror::Error;

use crate::executor::ExecMode;
use crate::planner::DepEdge;
use crate::storage::{EntryHandle, Value};
use crate::txn::{FragId, Fragment, SlotId, TxnId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DepsError {
    #[error("unknown transaction {0} in this batch")]
    UnknownTxn(TxnId),
    #[error("edge {0:?} -> {1:?} registered twice")]
    DuplicateEdge(FragId, FragId),
    #[error("channel (txn {0}, slot {1}) published twice")]
    DoublePublish(TxnId, SlotId),
    #[error("transaction {0} resolved twice")]
    DoubleResolve(TxnId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TxnStatus {
    Active,
    Committed,
    Aborted,
}

const STATUS_ACTIVE: u8 = 0;
const STATUS_COMMITTED: u8 = 1;
const STATUS_ABORTED: u8 = 2;

struct TxnNode {
    txn_id: TxnId,
    status: AtomicU8,
    /// Abortable fragments not yet executed.
    pending_checks: AtomicU32,
    /// Some check op has failed.
    logic_failed: AtomicBool,
    /// Write-once value channels, one per step index.
    channels: Vec<OnceLock<Value>>,
    /// Transactions whose speculative values this one consumed.
    taint: Mutex<BTreeSet<TxnId>>,
    /// Inverse of taint: transactions that consumed this one's values.
    readers: Mutex<BTreeSet<TxnId>>,
    /// Speculative versions written, for abort marking.
    writes: Mutex<Vec<EntryHandle>>,
}

/// Result of polling a fragment for readiness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Poll {
    /// All inputs available: (slot, value) pairs in input order.
    Ready(Vec<(SlotId, Value)>),
    Pending(Vec<PendingCause>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PendingCause {
    MissingInput { producer: FragId, slot: SlotId },
    UnresolvedWriter { txn_id: TxnId },
}

pub struct DependencyGraph {
    strict: bool,
    nodes: Vec<TxnNode>,
    index: HashMap<TxnId, usize>,
    edges: Mutex<Vec<DepEdge>>,
    edge_set: Mutex<HashSet<(FragId, FragId, crate::txn::DependencyKind)>>,
    /// Conservative-mode gates: reading fragment -> writer transactions that
    /// must resolve first.
    gates: HashMap<FragId, Vec<TxnId>>,
}

impl DependencyGraph {
    /// `txns` lists (txn_id, step_count, abortable_fragment_count) in batch
    /// order.
    pub fn new(txns: &[(TxnId, usize, u32)], strict: bool) -> Self {
        let mut index = HashMap::with_capacity(txns.len());
        let nodes = txns
            .iter()
            .enumerate()
            .map(|(i, (txn_id, steps, checks))| {
                index.insert(*txn_id, i);
                TxnNode {
                    txn_id: *txn_id,
                    status: AtomicU8::new(STATUS_ACTIVE),
                    pending_checks: AtomicU32::new(*checks),
                    logic_failed: AtomicBool::new(false),
                    channels: (0..*steps).map(|_| OnceLock::new()).collect(),
                    taint: Mutex::new(BTreeSet::new()),
                    readers: Mutex::new(BTreeSet::new()),
                    writes: Mutex::new(Vec::new()),
                }
            })
            .collect();
        DependencyGraph {
            strict,
            nodes,
            index,
            edges: Mutex::new(Vec::new()),
            edge_set: Mutex::new(HashSet::new()),
            gates: HashMap::new(),
        }
    }

    fn node(&self, txn: TxnId) -> Result<&TxnNode, DepsError> {
        self.index
            .get(&txn)
            .map(|i| &self.nodes[*i])
            .ok_or(DepsError::UnknownTxn(txn))
    }

    pub fn txn_ids(&self) -> impl Iterator<Item = TxnId> + '_ {
        self.nodes.iter().map(|n| n.txn_id)
    }

    /// Record planned edges. In strict mode a repeated edge is an error; in
    /// release mode it is dropped silently.
    pub fn register_edges(&self, edges: &[DepEdge]) -> Result<(), DepsError> {
        let mut stored = self.edges.lock();
        let mut seen = self.edge_set.lock();
        for edge in edges {
            if !seen.insert((edge.from, edge.to, edge.kind)) {
                if self.strict {
                    return Err(DepsError::DuplicateEdge(edge.from, edge.to));
                }
                continue;
            }
            stored.push(*edge);
        }
        Ok(())
    }

    pub fn edges(&self) -> Vec<DepEdge> {
        self.edges.lock().clone()
    }

    /// Install the conservative gate table; called once before execution.
    pub fn set_gates(&mut self, gates: HashMap<FragId, Vec<TxnId>>) {
        self.gates = gates;
    }

    /// Count of fragments waiting on at least one planned input (testing aid).
    pub fn pending_input_count(&self, frag: &Fragment) -> usize {
        match self.poll_ready(frag, ExecMode::Conservative) {
            Poll::Ready(_) => 0,
            Poll::Pending(causes) => causes.len(),
        }
    }

    /// Publish a step's read result for cross-fragment consumers. Write-once.
    pub fn publish(&self, txn: TxnId, slot: SlotId, value: Value) -> Result<(), DepsError> {
        let node = self.node(txn)?;
        node.channels
            .get(slot as usize)
            .ok_or(DepsError::DoublePublish(txn, slot))?
            .set(value)
            .map_err(|_| DepsError::DoublePublish(txn, slot))
    }

    pub fn peek_slot(&self, txn: TxnId, slot: SlotId) -> Option<Value> {
        self.node(txn)
            .ok()?
            .channels
            .get(slot as usize)?
            .get()
            .cloned()
    }

    /// Non-blocking readiness check: all cross-fragment inputs published,
    /// and in conservative mode every gating writer resolved.
    pub fn poll_ready(&self, frag: &Fragment, mode: ExecMode) -> Poll {
        let mut missing = Vec::new();
        let mut inputs = Vec::new();
        for (producer, slot) in &frag.data_inputs {
            match self.peek_slot(producer.txn_id, *slot) {
                Some(v) => inputs.push((*slot, v)),
                None => missing.push(PendingCause::MissingInput {
                    producer: *producer,
                    slot: *slot,
                }),
            }
        }
        if mode == ExecMode::Conservative {
            if let Some(writers) = self.gates.get(&frag.id) {
                for w in writers {
                    if self.status(*w) == TxnStatus::Active {
                        missing.push(PendingCause::UnresolvedWriter { txn_id: *w });
                    }
                }
            }
        }
        if missing.is_empty() {
            Poll::Ready(inputs)
        } else {
            Poll::Pending(missing)
        }
    }

    /// Record that `reader` consumed a speculative value written by `writer`.
    pub fn record_taint(&self, reader: TxnId, writer: TxnId) {
        if reader == writer {
            return;
        }
        if let (Ok(r), Ok(w)) = (self.node(reader), self.node(writer)) {
            r.taint.lock().insert(writer);
            w.readers.lock().insert(reader);
        }
    }

    pub fn taint_of(&self, txn: TxnId) -> BTreeSet<TxnId> {
        self.node(txn).map(|n| n.taint.lock().clone()).unwrap_or_default()
    }

    /// All recorded read-from pairs (reader, writer).
    pub fn taint_edges(&self) -> Vec<(TxnId, TxnId)> {
        let mut out = Vec::new();
        for node in &self.nodes {
            for writer in node.taint.lock().iter() {
                out.push((node.txn_id, *writer));
            }
        }
        out.sort_unstable();
        out
    }

    /// Remember a speculative version written on behalf of `txn`.
    pub fn record_write(&self, txn: TxnId, handle: EntryHandle) {
        if let Ok(node) = self.node(txn) {
            node.writes.lock().push(handle);
        }
    }

    pub fn writes_of(&self, txn: TxnId) -> Vec<EntryHandle> {
        self.node(txn).map(|n| n.writes.lock().clone()).unwrap_or_default()
    }

    /// Note one executed abortable fragment. Returns `(remaining, failed)`
    /// after this check; the engine resolves the transaction when remaining
    /// hits zero (or immediately on failure in conservative mode).
    pub fn note_check_result(&self, txn: TxnId, passed: bool) -> Result<(u32, bool), DepsError> {
        let node = self.node(txn)?;
        if !passed {
            node.logic_failed.store(true, Ordering::SeqCst);
        }
        let before = node.pending_checks.fetch_sub(1, Ordering::SeqCst);
        debug_assert!(before > 0, "more check results than abortable fragments");
        Ok((
            before.saturating_sub(1),
            node.logic_failed.load(Ordering::SeqCst),
        ))
    }

    pub fn logic_failed(&self, txn: TxnId) -> bool {
        self.node(txn)
            .map(|n| n.logic_failed.load(Ordering::SeqCst))
            .unwrap_or(false)
    }

    pub fn logic_failed_txns(&self) -> Vec<TxnId> {
        self.nodes
            .iter()
            .filter(|n| n.logic_failed.load(Ordering::SeqCst))
            .map(|n| n.txn_id)
            .collect()
    }

    pub fn status(&self, txn: TxnId) -> TxnStatus {
        match self.node(txn) {
            Err(_) => TxnStatus::Active,
            Ok(node) => match node.status.load(Ordering::SeqCst) {
                STATUS_COMMITTED => TxnStatus::Committed,
                STATUS_ABORTED => TxnStatus::Aborted,
                _ => TxnStatus::Active,
            },
        }
    }

    /// Finalize a transaction. Transitions are monotone: only
    /// Active -> Committed and Active -> Aborted exist; a second resolution
    /// is reported (and ignored in release mode by the caller).
    pub fn resolve_txn(&self, txn: TxnId, committed: bool) -> Result<(), DepsError> {
        let node = self.node(txn)?;
        let target = if committed {
            STATUS_COMMITTED
        } else {
            STATUS_ABORTED
        };
        node.status
            .compare_exchange(STATUS_ACTIVE, target, Ordering::SeqCst, Ordering::SeqCst)
            .map(|_| ())
            .map_err(|_| DepsError::DoubleResolve(txn))
    }

    /// Abort `root` and, transitively, every transaction that consumed
    /// speculative values from an aborted one. Returns the set newly marked
    /// aborted (already-aborted transactions are skipped); idempotent.
    pub fn cascade_abort(&self, root: TxnId) -> BTreeSet<TxnId> {
        let mut newly = BTreeSet::new();
        let mut frontier = vec![root];
        while let Some(txn) = frontier.pop() {
            let Ok(node) = self.node(txn) else { continue };
            if node
                .status
                .compare_exchange(
                    STATUS_ACTIVE,
                    STATUS_ABORTED,
                    Ordering::SeqCst,
                    Ordering::SeqCst,
                )
                .is_err()
            {
                continue;
            }
            newly.insert(txn);
            frontier.extend(node.readers.lock().iter().copied());
        }
        newly
    }

    /// JSON-serializable view of edges, taint sets and statuses.
    pub fn dump(&self) -> DepsDump {
        DepsDump {
            edges: self.edges(),
            taint: self
                .nodes
                .iter()
                .map(|n| (n.txn_id, n.taint.lock().iter().copied().collect()))
                .filter(|(_, t): &(TxnId, Vec<TxnId>)| !t.is_empty())
                .collect(),
            status: self
                .nodes
                .iter()
                .map(|n| (n.txn_id, self.status(n.txn_id)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DepsDump {
    pub edges: Vec<DepEdge>,
    pub taint: BTreeMap<TxnId, Vec<TxnId>>,
    pub status: BTreeMap<TxnId, TxnStatus>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::FragmentPriority;
    use crate::storage::{value_from_i64, Key};
    use crate::txn::{Compute, DependencyKind, FragOp, StepKind};

    fn graph(n: usize) -> DependencyGraph {
        let txns: Vec<(TxnId, usize, u32)> = (0..n as u64).map(|i| (i, 4, 0)).collect();
        DependencyGraph::new(&txns, true)
    }

    fn frag(txn_id: TxnId, inputs: Vec<(FragId, SlotId)>) -> Fragment {
        Fragment {
            id: FragId { txn_id, seq: 0 },
            key: Key::new(0, 1),
            ops: vec![FragOp {
                step_index: 0,
                kind: StepKind::Read,
                compute: Compute::Identity,
            }],
            abortable: false,
            data_inputs: inputs,
            publish_slots: vec![],
            priority: FragmentPriority::UNASSIGNED,
        }
    }

    #[test]
    fn registered_edge_shows_up_and_duplicates_fail_strict() {
        let g = graph(2);
        let edge = DepEdge {
            from: FragId { txn_id: 0, seq: 0 },
            to: FragId { txn_id: 1, seq: 0 },
            kind: DependencyKind::Data,
        };
        g.register_edges(&[edge]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(
            g.register_edges(&[edge]),
            Err(DepsError::DuplicateEdge(edge.from, edge.to))
        );
    }

    #[test]
    fn no_edges_means_everything_ready() {
        let g = graph(1);
        let f = frag(0, vec![]);
        assert_eq!(g.poll_ready(&f, ExecMode::Speculative), Poll::Ready(vec![]));
    }

    #[test]
    fn publish_feeds_poll_and_is_write_once() {
        let g = graph(2);
        let producer = FragId { txn_id: 0, seq: 0 };
        let consumer = frag(1, vec![(producer, 0)]);
        assert!(matches!(
            g.poll_ready(&consumer, ExecMode::Speculative),
            Poll::Pending(_)
        ));
        g.publish(0, 0, value_from_i64(42)).unwrap();
        assert_eq!(
            g.poll_ready(&consumer, ExecMode::Speculative),
            Poll::Ready(vec![(0, value_from_i64(42))])
        );
        assert_eq!(
            g.publish(0, 0, value_from_i64(43)),
            Err(DepsError::DoublePublish(0, 0))
        );
    }

    #[test]
    fn concurrent_polls_observe_one_value() {
        // One publisher, many readers: every observed value is 42.
        let g = std::sync::Arc::new(graph(2));
        g.publish(0, 0, value_from_i64(42)).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..8 {
                let g = g.clone();
                scope.spawn(move || {
                    for _ in 0..1000 {
                        let v = g.peek_slot(0, 0).expect("published");
                        assert_eq!(v, value_from_i64(42));
                    }
                });
            }
        });
    }

    #[test]
    fn conservative_gate_blocks_until_resolution() {
        let txns: Vec<(TxnId, usize, u32)> = vec![(0, 1, 1), (1, 1, 0)];
        let mut g = DependencyGraph::new(&txns, true);
        let reader = frag(1, vec![]);
        let mut gates = HashMap::new();
        gates.insert(reader.id, vec![0]);
        g.set_gates(gates);

        // Inputs are ready but the abortable writer is unresolved.
        assert_eq!(
            g.poll_ready(&reader, ExecMode::Conservative),
            Poll::Pending(vec![PendingCause::UnresolvedWriter { txn_id: 0 }])
        );
        // Speculative mode ignores gates.
        assert_eq!(
            g.poll_ready(&reader, ExecMode::Speculative),
            Poll::Ready(vec![])
        );
        g.resolve_txn(0, true).unwrap();
        assert_eq!(
            g.poll_ready(&reader, ExecMode::Conservative),
            Poll::Ready(vec![])
        );
    }

    #[test]
    fn taint_tracks_only_cross_txn_speculative_reads() {
        let g = graph(3);
        g.record_taint(2, 1);
        g.record_taint(2, 2); // self-read, ignored
        assert_eq!(g.taint_of(2), BTreeSet::from([1]));
        assert!(g.taint_of(1).is_empty());
    }

    #[test]
    fn cascade_chain_matches_brute_force() {
        let g = graph(4);
        // T1 -> T2 -> T3 read chain.
        g.record_taint(2, 1);
        g.record_taint(3, 2);
        let aborted = g.cascade_abort(1);
        assert_eq!(aborted, BTreeSet::from([1, 2, 3]));
        assert_eq!(brute_force_closure(&g.taint_edges(), 1), aborted);
        // Idempotent: nothing newly aborted.
        assert!(g.cascade_abort(1).is_empty());
    }

    #[test]
    fn cascade_diamond_and_untouched_reader() {
        let g = graph(6);
        // T2 and T3 read T1; T4 reads both; T5 read only committed data.
        g.record_taint(2, 1);
        g.record_taint(3, 1);
        g.record_taint(4, 2);
        g.record_taint(4, 3);
        let aborted = g.cascade_abort(1);
        assert_eq!(aborted, BTreeSet::from([1, 2, 3, 4]));
        assert!(!aborted.contains(&5));
        assert_eq!(brute_force_closure(&g.taint_edges(), 1), aborted);
        assert_eq!(g.status(5), TxnStatus::Active);
    }

    #[test]
    fn cascade_of_leaf_is_just_root() {
        let g = graph(2);
        assert_eq!(g.cascade_abort(0), BTreeSet::from([0]));
    }

    #[test]
    fn resolution_is_monotone_and_single_shot() {
        let g = graph(2);
        g.resolve_txn(0, true).unwrap();
        assert_eq!(g.status(0), TxnStatus::Committed);
        assert_eq!(g.resolve_txn(0, false), Err(DepsError::DoubleResolve(0)));
        assert_eq!(g.status(0), TxnStatus::Committed);

        g.resolve_txn(1, false).unwrap();
        assert_eq!(g.status(1), TxnStatus::Aborted);
    }

    #[test]
    fn check_accounting_reaches_zero() {
        let txns: Vec<(TxnId, usize, u32)> = vec![(7, 2, 2)];
        let g = DependencyGraph::new(&txns, true);
        assert_eq!(g.note_check_result(7, true).unwrap(), (1, false));
        assert_eq!(g.note_check_result(7, false).unwrap(), (0, true));
        assert!(g.logic_failed(7));
        assert_eq!(g.logic_failed_txns(), vec![7]);
    }

    /// Reachability over recorded (reader, writer) pairs, for cascade checks.
    pub fn brute_force_closure(taint_edges: &[(TxnId, TxnId)], root: TxnId) -> BTreeSet<TxnId> {
        let mut out = BTreeSet::from([root]);
        loop {
            let mut grew = false;
            for (reader, writer) in taint_edges {
                if out.contains(writer) && out.insert(*reader) {
                    grew = true;
                }
            }
            if !grew {
                return out;
            }
        }
    }
}

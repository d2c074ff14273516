//! Transaction and fragment model.
//!
//! Transactions are declared up front as [`TxnSpec`]s: an ordered list of
//! [`Step`]s over a closed catalog of compute operations, plus the full read
//! and write sets. Declaring every touched key ahead of execution is what
//! lets the planner lay out conflict-free schedules with no run-time
//! concurrency control; accesses outside the declared sets are rejected.
//!
//! [`fragment_transaction`] slices a spec into per-record [`Fragment`]s, the
//! scheduling atom: every operation a transaction performs on one record
//! lands in exactly one fragment, and cross-record value flow becomes
//! explicit data edges between fragments. A fragment whose logic can abort
//! the whole transaction is marked abortable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ExecMode;
use crate::planner::FragmentPriority;
use crate::storage::Key;

pub type TxnId = u64;

/// A slot names the read result of one step, by step index.
pub type SlotId = u16;

/// Designated poison payload for abort checks. Reading this value through a
/// `CheckNotPoison` step aborts the transaction.
pub const POISON: i64 = -0x0BAD_F00D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// Read the record, exposing its value in this step's slot.
    Read,
    /// Blind write; the new value comes from the compute tag alone.
    Write,
    /// Read-modify-write; the slot holds the value read (the pre-image).
    Rmw,
    /// Read plus an abort condition over the value read.
    ReadAbortCheck,
}

/// Closed catalog of pure compute tags. Keeping the logic enumerable is what
/// makes execution deterministic and the serial reference executor exact.
/// Arithmetic wraps on overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compute {
    /// No transformation; pairs with `Read`.
    Identity,
    Const(i64),
    AddDelta(i64),
    MulFactor(i64),
    /// Use the value another step read, by slot.
    CopyFrom(SlotId),
    /// Abort unless the value read is strictly positive.
    CheckPositive,
    /// Abort if the value read equals [`POISON`].
    CheckNotPoison,
}

impl Compute {
    /// Value produced by a writing step. `cur` is the record value as seen
    /// through the transaction's own earlier writes; `slot` resolves
    /// cross-step inputs.
    pub fn apply(self, cur: i64, slot: impl Fn(SlotId) -> i64) -> i64 {
        match self {
            Compute::Identity => cur,
            Compute::Const(c) => c,
            Compute::AddDelta(d) => cur.wrapping_add(d),
            Compute::MulFactor(f) => cur.wrapping_mul(f),
            Compute::CopyFrom(s) => slot(s),
            Compute::CheckPositive | Compute::CheckNotPoison => cur,
        }
    }

    /// Abort predicate for check tags; `true` means the transaction survives.
    pub fn check(self, value: i64) -> bool {
        match self {
            Compute::CheckPositive => value > 0,
            Compute::CheckNotPoison => value != POISON,
            _ => true,
        }
    }

    /// Slot consumed by this compute tag, if any.
    pub fn input(self) -> Option<SlotId> {
        match self {
            Compute::CopyFrom(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub key: Key,
    pub kind: StepKind,
    pub compute: Compute,
}

impl Step {
    pub fn reads_record(&self) -> bool {
        matches!(
            self.kind,
            StepKind::Read | StepKind::Rmw | StepKind::ReadAbortCheck
        )
    }

    pub fn writes_record(&self) -> bool {
        matches!(self.kind, StepKind::Write | StepKind::Rmw)
    }

    pub fn is_check(&self) -> bool {
        matches!(self.kind, StepKind::ReadAbortCheck)
            || matches!(self.compute, Compute::CheckPositive | Compute::CheckNotPoison)
    }

    /// Legal (kind, compute) pairings in the catalog.
    fn compute_is_legal(&self) -> bool {
        match self.kind {
            StepKind::Read => matches!(self.compute, Compute::Identity),
            StepKind::Write => matches!(self.compute, Compute::Const(_) | Compute::CopyFrom(_)),
            StepKind::Rmw => matches!(self.compute, Compute::AddDelta(_) | Compute::MulFactor(_)),
            StepKind::ReadAbortCheck => {
                matches!(self.compute, Compute::CheckPositive | Compute::CheckNotPoison)
            }
        }
    }
}

/// Declarative transaction: ordered steps plus the full read/write sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxnSpec {
    pub txn_id: TxnId,
    pub steps: Vec<Step>,
    pub read_set: BTreeSet<Key>,
    pub write_set: BTreeSet<Key>,
}

impl TxnSpec {
    /// Build a spec with the read/write sets derived from the steps.
    pub fn from_steps(txn_id: TxnId, steps: Vec<Step>) -> Self {
        let mut read_set = BTreeSet::new();
        let mut write_set = BTreeSet::new();
        for s in &steps {
            if s.reads_record() {
                read_set.insert(s.key);
            }
            if s.writes_record() {
                write_set.insert(s.key);
            }
        }
        TxnSpec {
            txn_id,
            steps,
            read_set,
            write_set,
        }
    }

    pub fn covers(&self, key: &Key) -> bool {
        self.read_set.contains(key) || self.write_set.contains(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FragId {
    pub txn_id: TxnId,
    pub seq: u16,
}

/// One step as carried inside a fragment, tagged with its original position
/// so slots keep their step-index identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragOp {
    pub step_index: SlotId,
    pub kind: StepKind,
    pub compute: Compute,
}

/// Unit of scheduling: all of one transaction's operations on one record,
/// in step order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: FragId,
    pub key: Key,
    pub ops: Vec<FragOp>,
    /// True when some op can abort the whole transaction.
    pub abortable: bool,
    /// Cross-fragment value inputs: (producer fragment, slot).
    pub data_inputs: Vec<(FragId, SlotId)>,
    /// Slots this fragment must make visible to other fragments.
    pub publish_slots: Vec<SlotId>,
    /// Assigned during planning; meaningless before.
    pub priority: FragmentPriority,
}

impl Fragment {
    pub fn reads_key(&self) -> bool {
        self.ops.iter().any(|op| {
            matches!(
                op.kind,
                StepKind::Read | StepKind::Rmw | StepKind::ReadAbortCheck
            )
        })
    }

    pub fn writes_key(&self) -> bool {
        self.ops
            .iter()
            .any(|op| matches!(op.kind, StepKind::Write | StepKind::Rmw))
    }

    /// True when every op is a plain read: the fragment may run against
    /// committed data under read-committed isolation.
    pub fn is_pure_read(&self) -> bool {
        self.ops.iter().all(|op| matches!(op.kind, StepKind::Read))
    }
}

/// Dependency kinds between fragments. Data and commit edges stay inside one
/// transaction; conflict and speculation edges cross transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DependencyKind {
    Data,
    Conflict,
    Commit,
    Speculation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FragmentError {
    #[error("step {step} touches {key:?} outside the declared read/write sets")]
    UncoveredKey { step: usize, key: Key },
    #[error("step {step} consumes slot {slot} which is not an earlier read result")]
    InvalidSlot { step: usize, slot: SlotId },
}

/// Split a transaction into per-record fragments, in first-touch order.
///
/// The union of fragment ops equals the step list; data edges are created
/// wherever a step consumes a slot produced on a different record.
pub fn fragment_transaction(spec: &TxnSpec) -> Result<Vec<Fragment>, FragmentError> {
    let mut order: Vec<Key> = Vec::new();
    let mut by_key: BTreeMap<Key, Vec<FragOp>> = BTreeMap::new();
    for (idx, step) in spec.steps.iter().enumerate() {
        if !spec.covers(&step.key) {
            return Err(FragmentError::UncoveredKey {
                step: idx,
                key: step.key,
            });
        }
        if !by_key.contains_key(&step.key) {
            order.push(step.key);
        }
        by_key.entry(step.key).or_default().push(FragOp {
            step_index: idx as SlotId,
            kind: step.kind,
            compute: step.compute,
        });
    }

    // Producer lookup: step index -> owning fragment seq, for reading steps.
    let mut frag_of_step: BTreeMap<SlotId, u16> = BTreeMap::new();
    for (seq, key) in order.iter().enumerate() {
        for op in &by_key[key] {
            frag_of_step.insert(op.step_index, seq as u16);
        }
    }

    let mut frags: Vec<Fragment> = order
        .iter()
        .enumerate()
        .map(|(seq, key)| {
            let ops = by_key[key].clone();
            let abortable = ops.iter().any(|op| {
                matches!(op.kind, StepKind::ReadAbortCheck)
                    || matches!(op.compute, Compute::CheckPositive | Compute::CheckNotPoison)
            });
            Fragment {
                id: FragId {
                    txn_id: spec.txn_id,
                    seq: seq as u16,
                },
                key: *key,
                ops,
                abortable,
                data_inputs: Vec::new(),
                publish_slots: Vec::new(),
                priority: FragmentPriority::UNASSIGNED,
            }
        })
        .collect();

    // Wire data edges for cross-fragment slot consumption.
    for (idx, step) in spec.steps.iter().enumerate() {
        let Some(slot) = step.compute.input() else {
            continue;
        };
        let producer_reads = (slot as usize) < idx
            && spec
                .steps
                .get(slot as usize)
                .is_some_and(|p| p.reads_record());
        if !producer_reads {
            return Err(FragmentError::InvalidSlot { step: idx, slot });
        }
        let consumer_seq = frag_of_step[&(idx as SlotId)];
        let producer_seq = frag_of_step[&slot];
        if consumer_seq != producer_seq {
            let producer_id = frags[producer_seq as usize].id;
            let consumer = &mut frags[consumer_seq as usize];
            if !consumer.data_inputs.contains(&(producer_id, slot)) {
                consumer.data_inputs.push((producer_id, slot));
            }
            let producer = &mut frags[producer_seq as usize];
            if !producer.publish_slots.contains(&slot) {
                producer.publish_slots.push(slot);
            }
        }
    }

    Ok(frags)
}

/// Looks up which transactions may leave doomed speculative values behind:
/// those with an abortable fragment, plus (transitively) readers of their
/// writes. Computed once per batch during planning.
#[derive(Debug, Default, Clone)]
pub struct TaintPotential(pub BTreeSet<TxnId>);

impl TaintPotential {
    pub fn contains(&self, txn: TxnId) -> bool {
        self.0.contains(&txn)
    }
}

/// Classify the dependency of `b` (the dependent) on `a` (the dependee).
/// Callers pass `a` before `b` in batch/priority order; fragments must come
/// from the same batch.
pub fn classify_dependency(
    a: &Fragment,
    b: &Fragment,
    mode: ExecMode,
    taint: &TaintPotential,
) -> Option<DependencyKind> {
    if a.id.txn_id == b.id.txn_id {
        if b.data_inputs.iter().any(|(src, _)| *src == a.id) {
            return Some(DependencyKind::Data);
        }
        if a.abortable && a.id.seq < b.id.seq && b.writes_key() {
            return Some(DependencyKind::Commit);
        }
        return None;
    }
    if a.key == b.key {
        if mode == ExecMode::Speculative
            && a.writes_key()
            && b.reads_key()
            && taint.contains(a.id.txn_id)
        {
            return Some(DependencyKind::Speculation);
        }
        return Some(DependencyKind::Conflict);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecViolation {
    UncoveredKey { step: usize, key: Key },
    ForwardReference { step: usize, slot: SlotId },
    UnreadableSlot { step: usize, slot: SlotId },
    IllegalCompute { step: usize },
}

/// Diagnostic pass over a spec; returns every violation rather than failing
/// on the first.
pub fn validate_spec(spec: &TxnSpec) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    for (idx, step) in spec.steps.iter().enumerate() {
        if !spec.covers(&step.key) {
            out.push(SpecViolation::UncoveredKey {
                step: idx,
                key: step.key,
            });
        }
        if !step.compute_is_legal() {
            out.push(SpecViolation::IllegalCompute { step: idx });
        }
        if let Some(slot) = step.compute.input() {
            if slot as usize >= idx {
                out.push(SpecViolation::ForwardReference { step: idx, slot });
            } else if !spec.steps[slot as usize].reads_record() {
                out.push(SpecViolation::UnreadableSlot { step: idx, slot });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::Key;

    fn k(record: u64) -> Key {
        Key { table: 0, record }
    }

    fn rmw_add(key: Key, delta: i64) -> Step {
        Step {
            key,
            kind: StepKind::Rmw,
            compute: Compute::AddDelta(delta),
        }
    }

    #[test]
    fn fragments_group_by_key_with_data_edge() {
        // RMW(k1,+5) then WRITE(k2, COPY slot0): two fragments, one data edge.
        let spec = TxnSpec::from_steps(
            7,
            vec![
                rmw_add(k(1), 5),
                Step {
                    key: k(2),
                    kind: StepKind::Write,
                    compute: Compute::CopyFrom(0),
                },
            ],
        );
        let frags = fragment_transaction(&spec).unwrap();
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0].key, k(1));
        assert_eq!(frags[1].key, k(2));
        assert_eq!(frags[1].data_inputs, vec![(frags[0].id, 0)]);
        assert_eq!(frags[0].publish_slots, vec![0]);
        assert!(!frags[0].abortable && !frags[1].abortable);
    }

    #[test]
    fn check_and_write_on_same_key_fold_into_one_abortable_fragment() {
        let spec = TxnSpec::from_steps(
            1,
            vec![
                Step {
                    key: k(1),
                    kind: StepKind::ReadAbortCheck,
                    compute: Compute::CheckPositive,
                },
                Step {
                    key: k(1),
                    kind: StepKind::Write,
                    compute: Compute::Const(7),
                },
            ],
        );
        let frags = fragment_transaction(&spec).unwrap();
        assert_eq!(frags.len(), 1);
        assert!(frags[0].abortable);
        assert_eq!(frags[0].ops.len(), 2);
    }

    #[test]
    fn distinct_keys_yield_one_fragment_each_no_edges() {
        let steps: Vec<Step> = (1..=5).map(|i| rmw_add(k(i), 1)).collect();
        let spec = TxnSpec::from_steps(2, steps);
        let frags = fragment_transaction(&spec).unwrap();
        assert_eq!(frags.len(), 5);
        assert!(frags.iter().all(|f| f.data_inputs.is_empty()));
    }

    #[test]
    fn uncovered_key_is_rejected() {
        let mut spec = TxnSpec::from_steps(3, vec![rmw_add(k(1), 1)]);
        spec.read_set.clear();
        spec.write_set.clear();
        let err = fragment_transaction(&spec).unwrap_err();
        assert_eq!(
            err,
            FragmentError::UncoveredKey {
                step: 0,
                key: k(1)
            }
        );
    }

    #[test]
    fn fragmentation_is_deterministic() {
        let spec = TxnSpec::from_steps(
            9,
            vec![
                rmw_add(k(3), 2),
                rmw_add(k(1), 4),
                Step {
                    key: k(3),
                    kind: StepKind::Write,
                    compute: Compute::Const(5),
                },
            ],
        );
        let a = fragment_transaction(&spec).unwrap();
        let b = fragment_transaction(&spec).unwrap();
        assert_eq!(a, b);
        // First-touch order, not key order.
        assert_eq!(a[0].key, k(3));
        assert_eq!(a[0].ops.len(), 2);
    }

    #[test]
    fn classify_same_txn_data_and_commit() {
        let spec = TxnSpec::from_steps(
            4,
            vec![
                Step {
                    key: k(1),
                    kind: StepKind::ReadAbortCheck,
                    compute: Compute::CheckPositive,
                },
                Step {
                    key: k(2),
                    kind: StepKind::Write,
                    compute: Compute::Const(1),
                },
            ],
        );
        let frags = fragment_transaction(&spec).unwrap();
        // A abortable, B writes another record: commit dependency.
        assert_eq!(
            classify_dependency(
                &frags[0],
                &frags[1],
                ExecMode::Conservative,
                &TaintPotential::default()
            ),
            Some(DependencyKind::Commit)
        );

        let spec2 = TxnSpec::from_steps(
            5,
            vec![
                rmw_add(k(1), 5),
                Step {
                    key: k(2),
                    kind: StepKind::Write,
                    compute: Compute::CopyFrom(0),
                },
            ],
        );
        let frags2 = fragment_transaction(&spec2).unwrap();
        assert_eq!(
            classify_dependency(
                &frags2[0],
                &frags2[1],
                ExecMode::Speculative,
                &TaintPotential::default()
            ),
            Some(DependencyKind::Data)
        );
    }

    #[test]
    fn classify_cross_txn_conflict_and_speculation() {
        let a = fragment_transaction(&TxnSpec::from_steps(1, vec![rmw_add(k(1), 1)])).unwrap();
        let b = fragment_transaction(&TxnSpec::from_steps(2, vec![rmw_add(k(1), 2)])).unwrap();
        assert_eq!(
            classify_dependency(
                &a[0],
                &b[0],
                ExecMode::Conservative,
                &TaintPotential::default()
            ),
            Some(DependencyKind::Conflict)
        );
        // Writer's transaction may abort, reader consumes its record:
        // speculation once the writer is taint-potential and mode allows it.
        let mut taint = TaintPotential::default();
        taint.0.insert(1);
        assert_eq!(
            classify_dependency(&a[0], &b[0], ExecMode::Speculative, &taint),
            Some(DependencyKind::Speculation)
        );
        assert_eq!(
            classify_dependency(&a[0], &b[0], ExecMode::Conservative, &taint),
            Some(DependencyKind::Conflict)
        );
    }

    #[test]
    fn classify_unrelated_is_none() {
        let a = fragment_transaction(&TxnSpec::from_steps(1, vec![rmw_add(k(1), 1)])).unwrap();
        let b = fragment_transaction(&TxnSpec::from_steps(2, vec![rmw_add(k(2), 2)])).unwrap();
        assert_eq!(
            classify_dependency(
                &a[0],
                &b[0],
                ExecMode::Speculative,
                &TaintPotential::default()
            ),
            None
        );
    }

    #[test]
    fn validate_reports_all_violations() {
        let ok = TxnSpec::from_steps(1, vec![rmw_add(k(1), 1)]);
        assert!(validate_spec(&ok).is_empty());

        let mut bad = TxnSpec::from_steps(
            2,
            vec![
                Step {
                    key: k(1),
                    kind: StepKind::Write,
                    compute: Compute::CopyFrom(2),
                },
                rmw_add(k(9), 1),
            ],
        );
        bad.read_set.remove(&k(9));
        bad.write_set.remove(&k(9));
        let violations = validate_spec(&bad);
        assert!(violations.contains(&SpecViolation::ForwardReference { step: 0, slot: 2 }));
        assert!(violations.contains(&SpecViolation::UncoveredKey { step: 1, key: k(9) }));
    }

    #[test]
    fn validate_rejects_slot_of_blind_write() {
        let spec = TxnSpec::from_steps(
            3,
            vec![
                Step {
                    key: k(1),
                    kind: StepKind::Write,
                    compute: Compute::Const(1),
                },
                Step {
                    key: k(2),
                    kind: StepKind::Write,
                    compute: Compute::CopyFrom(0),
                },
            ],
        );
        let violations = validate_spec(&spec);
        assert!(violations.contains(&SpecViolation::UnreadableSlot { step: 1, slot: 0 }));
    }
}

//! Execution phase and batch driver.
//!
//! Each batch runs in two deterministic phases. Planner threads lay
//! fragments into priority-tagged queues; executor threads then drain their
//! queues in ascending priority with a per-record FIFO rule, and a barrier
//! resolves commit decisions and folds surviving speculative versions into
//! committed state.
//!
//! Determinism is the load-bearing property. A fragment's view of its record
//! is fixed by queue order alone: when it runs, exactly the lower-priority
//! fragments on that record have run, no matter how threads interleave. Two
//! consequences shape the code here:
//!
//! * In speculative mode no fragment is ever skipped mid-batch. Whether a
//!   transaction has already failed its abort check is a race against other
//!   executors, so acting on it would make visibility (and therefore the
//!   cascade) schedule-dependent. Every fragment executes, check verdicts
//!   and read-from taint are recorded, and the barrier closes the cascade.
//! * In conservative mode readers instead wait until every lower-priority
//!   abortable writer of their record has resolved, then read around aborted
//!   versions. Resolution state is final when observed, so skipping the
//!   fragments of an aborted transaction is harmless there.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use parking_lot::Mutex;
use serde::Serialize;
use thiserror::Error;

use crate::deps::{DependencyGraph, DepsDump, DepsError, Poll, TxnStatus};
use crate::planner::{
    cross_planner_pass, form_batch, merge_for_executor, plan, Batch, ExecutionQueue, PlanError,
    PlannerOutput,
};
use crate::storage::{
    value_from_i64, value_to_i64, CommitDecision, GatedRead, Key, Provenance, StorageError, Store,
    WriterGate,
};
use crate::txn::{Fragment, SlotId, StepKind, TxnId, TxnSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExecMode {
    Speculative,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IsolationLevel {
    Serializable,
    ReadCommitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AbortReason {
    Logic,
    Cascade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Committed,
    Aborted(AbortReason),
}

impl Decision {
    pub fn committed(&self) -> bool {
        matches!(self, Decision::Committed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FragOutcome {
    Ok,
    LogicAbort,
    Skipped,
}

/// One fragment execution, as recorded in the event log.
#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub batch: u64,
    pub txn: TxnId,
    pub frag_seq: u16,
    pub key: Key,
    pub executor: usize,
    pub outcome: FragOutcome,
    pub ts_nanos: u64,
    // Audit fields, not part of the log line format.
    pub priority: crate::planner::FragmentPriority,
    pub wrote: bool,
    pub read_queue: bool,
    pub read_from: Option<Provenance>,
}

impl EventRecord {
    /// Log line format: `batch,txn,frag_seq,key,executor,outcome,ts`.
    pub fn to_line(&self) -> String {
        let outcome = match self.outcome {
            FragOutcome::Ok => "ok",
            FragOutcome::LogicAbort => "logic_abort",
            FragOutcome::Skipped => "skipped",
        };
        format!(
            "{},{},{},{}:{},{},{},{}",
            self.batch,
            self.txn,
            self.frag_seq,
            self.key.table,
            self.key.record,
            self.executor,
            outcome,
            self.ts_nanos
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchResult {
    pub batch_id: u64,
    pub decisions: BTreeMap<TxnId, Decision>,
    /// Transactions whose own abort check failed (cascade roots in
    /// speculative mode).
    pub logic_failed: Vec<TxnId>,
    /// Recorded (reader, writer) speculative read pairs.
    pub taint_edges: Vec<(TxnId, TxnId)>,
    pub events: Vec<EventRecord>,
    pub plan_dump: Option<serde_json::Value>,
    pub deps_dump: Option<DepsDump>,
}

impl BatchResult {
    pub fn committed_count(&self) -> usize {
        self.decisions.values().filter(|d| d.committed()).count()
    }

    pub fn aborted_by(&self, reason: AbortReason) -> usize {
        self.decisions
            .values()
            .filter(|d| matches!(d, Decision::Aborted(r) if *r == reason))
            .count()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Deps(#[from] DepsError),
    #[error("executor {executor} stalled after {polls} polls; {remaining} fragments pending: {sample:?}")]
    Stall {
        executor: usize,
        polls: u64,
        remaining: usize,
        sample: Vec<String>,
    },
    #[error("batch left transaction {0} unresolved")]
    Unresolved(TxnId),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub planners: usize,
    pub executors: usize,
    pub mode: ExecMode,
    pub isolation: IsolationLevel,
    pub batch_size: usize,
    /// Fail loudly on idempotence violations (tests) instead of tolerating
    /// them (benchmarks).
    pub strict: bool,
    /// Poll budget per executor per batch before declaring a stall.
    pub stall_poll_limit: u64,
    pub collect_events: bool,
    /// Populate the planned-edge registry (needed for dumps and audits;
    /// costs quadratic work on hot keys).
    pub collect_edges: bool,
    pub dump_plan: bool,
    pub dump_deps: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            planners: 2,
            executors: 2,
            mode: ExecMode::Speculative,
            isolation: IsolationLevel::Serializable,
            batch_size: 1024,
            strict: false,
            stall_poll_limit: 10_000_000,
            collect_events: false,
            collect_edges: false,
            dump_plan: false,
            dump_deps: false,
        }
    }
}

/// Batch-at-a-time deterministic engine over a [`Store`].
pub struct Engine {
    pub config: EngineConfig,
    store: Store,
    last_batch_id: u64,
}

impl Engine {
    pub fn new(store: Store, config: EngineConfig) -> Self {
        Engine {
            config,
            store,
            last_batch_id: 0,
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn into_store(self) -> Store {
        self.store
    }

    /// Run one batch through plan, execute and commit.
    pub fn run_batch(&mut self, txns: Vec<TxnSpec>) -> Result<BatchResult, EngineError> {
        let mut pending: VecDeque<TxnSpec> = txns.into();
        let batch = form_batch(&mut pending, usize::MAX, self.last_batch_id)?;
        self.last_batch_id = batch.batch_id;
        run_planned_batch(&self.store, &self.config, batch)
    }

    /// Drain a transaction stream in batches of `config.batch_size`.
    pub fn run_stream(
        &mut self,
        txns: impl IntoIterator<Item = TxnSpec>,
    ) -> Result<Vec<BatchResult>, EngineError> {
        let mut pending: VecDeque<TxnSpec> = txns.into_iter().collect();
        let mut results = Vec::new();
        while !pending.is_empty() {
            let batch = form_batch(&mut pending, self.config.batch_size, self.last_batch_id)?;
            self.last_batch_id = batch.batch_id;
            results.push(run_planned_batch(&self.store, &self.config, batch)?);
        }
        Ok(results)
    }
}

/// Work slated for one executor: its merged write-queue fragments in
/// priority order, plus any read-queue fragments (read-committed isolation).
struct ExecutorWork {
    items: Vec<Fragment>,
    read_items: Vec<Fragment>,
}

struct ExecutorOutput {
    events: Vec<EventRecord>,
    dirty_keys: Vec<Key>,
}

fn run_planned_batch(
    store: &Store,
    config: &EngineConfig,
    batch: Batch,
) -> Result<BatchResult, EngineError> {
    let batch_id = batch.batch_id;
    if batch.txns.is_empty() {
        return Ok(BatchResult {
            batch_id,
            decisions: BTreeMap::new(),
            logic_failed: Vec::new(),
            taint_edges: Vec::new(),
            events: Vec::new(),
            plan_dump: None,
            deps_dump: None,
        });
    }

    // Planning phase: one thread per planner over disjoint txn subsets.
    let planner_count = config.planners.max(1);
    let executor_count = config.executors.max(1);
    let outputs: Vec<PlannerOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..planner_count)
            .map(|p| {
                let batch = &batch;
                scope.spawn(move || {
                    plan(
                        p as u16,
                        batch,
                        planner_count,
                        executor_count,
                        config.mode,
                        config.isolation,
                        config.collect_edges,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("planner thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Planning barrier: cross-planner edges, gates and taint potential, then
    // the shared graph, all registered before any executor starts.
    let cross = cross_planner_pass(&outputs, config.mode, config.collect_edges);
    let txn_nodes: Vec<(TxnId, usize, u32)> = {
        let mut metas: Vec<_> = outputs.iter().flat_map(|o| &o.txn_meta).collect();
        metas.sort_by_key(|m| (m.slot, m.planner_id));
        metas
            .iter()
            .map(|m| (m.txn_id, m.step_count, m.abortable_fragments))
            .collect()
    };
    let mut graph = DependencyGraph::new(&txn_nodes, config.strict);
    if config.collect_edges {
        for out in &outputs {
            graph.register_edges(&out.edges)?;
        }
        graph.register_edges(&cross.edges)?;
    }
    graph.set_gates(cross.gates);
    let graph = &graph;

    // Conservative mode: transactions without abort checks can never abort,
    // so their uncommitted values are safe to read from the start.
    if config.mode == ExecMode::Conservative {
        for (txn_id, _, checks) in &txn_nodes {
            if *checks == 0 {
                graph.resolve_txn(*txn_id, true)?;
            }
        }
    }

    let plan_dump = config.dump_plan.then(|| {
        serde_json::json!({
            "batch_id": batch_id,
            "queues": outputs.iter().flat_map(|o| &o.queues).collect::<Vec<_>>(),
            "read_queues": outputs.iter().flat_map(|o| &o.read_queues).collect::<Vec<_>>(),
            "edges": outputs
                .iter()
                .flat_map(|o| o.edges.iter())
                .chain(cross.edges.iter())
                .collect::<Vec<_>>(),
        })
    });

    // Execution phase.
    let mut work: Vec<ExecutorWork> = Vec::with_capacity(executor_count);
    for e in 0..executor_count {
        let queues = merge_for_executor(&outputs, planner_count, e)?;
        work.push(build_work(&queues));
    }
    let failed = AtomicBool::new(false);
    let outcome: Mutex<Option<EngineError>> = Mutex::new(None);
    let exec_outputs: Vec<ExecutorOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = work
            .into_iter()
            .enumerate()
            .map(|(e, w)| {
                let failed = &failed;
                let outcome = &outcome;
                scope.spawn(move || {
                    match drain_executor(e, w, store, graph, config, batch_id, failed) {
                        Ok(out) => out,
                        Err(err) => {
                            failed.store(true, Ordering::SeqCst);
                            let mut slot = outcome.lock();
                            if slot.is_none() {
                                *slot = Some(err);
                            }
                            ExecutorOutput {
                                events: Vec::new(),
                                dirty_keys: Vec::new(),
                            }
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("executor thread panicked"))
            .collect()
    });
    if let Some(err) = outcome.into_inner() {
        return Err(err);
    }

    // Commit barrier (single-threaded).
    commit_barrier(store, graph, config, batch_id, exec_outputs, plan_dump)
}

/// Flatten an executor's queues into one priority-ordered work list plus the
/// read-queue items, which carry no ordering constraints.
fn build_work(queues: &[&ExecutionQueue]) -> ExecutorWork {
    let mut items = Vec::new();
    let mut read_items = Vec::new();
    for q in queues {
        if q.read_queue {
            read_items.extend(q.fragments.iter().cloned());
        } else {
            items.extend(q.fragments.iter().cloned());
        }
    }
    items.sort_by_key(|f| f.priority);
    ExecutorWork { items, read_items }
}

fn now_nanos(epoch: Instant) -> u64 {
    epoch.elapsed().as_nanos() as u64
}

fn drain_executor(
    executor_id: usize,
    work: ExecutorWork,
    store: &Store,
    graph: &DependencyGraph,
    config: &EngineConfig,
    batch_id: u64,
    failed: &AtomicBool,
) -> Result<ExecutorOutput, EngineError> {
    let epoch = Instant::now();
    let mut events = Vec::new();
    let mut dirty_keys = Vec::new();

    // Read-queue fragments observe only committed data, which is frozen for
    // the whole batch, so they can run up front in any order.
    for frag in &work.read_items {
        let value = store.read_committed(&frag.key)?;
        let v = value_to_i64(&value);
        for op in &frag.ops {
            if frag.publish_slots.contains(&op.step_index) {
                graph.publish(frag.id.txn_id, op.step_index, value_from_i64(v))?;
            }
        }
        if config.collect_events {
            events.push(EventRecord {
                batch: batch_id,
                txn: frag.id.txn_id,
                frag_seq: frag.id.seq,
                key: frag.key,
                executor: executor_id,
                outcome: FragOutcome::Ok,
                ts_nanos: now_nanos(epoch),
                priority: frag.priority,
                wrote: false,
                read_queue: true,
                read_from: Some(Provenance::Committed),
            });
        }
    }

    let items = work.items;
    let mut remaining = items.len();
    let mut parked: VecDeque<usize> = VecDeque::new();
    let mut cursor = 0usize;
    let mut polls: u64 = 0;

    while remaining > 0 {
        if failed.load(Ordering::SeqCst) {
            // Another executor already hit a fatal error; report drained so
            // its error surfaces instead of a spurious stall.
            return Ok(ExecutorOutput { events, dirty_keys });
        }
        let mut progress = false;
        // Keys with an earlier fragment still parked this round; later
        // fragments on those keys must hold back to keep per-record FIFO.
        let mut blocked: HashSet<Key> = HashSet::new();

        for _ in 0..parked.len() {
            let idx = parked.pop_front().expect("len checked");
            let frag = &items[idx];
            if blocked.contains(&frag.key) {
                parked.push_back(idx);
                continue;
            }
            polls += 1;
            match try_fragment(
                frag,
                executor_id,
                store,
                graph,
                config,
                batch_id,
                epoch,
                &mut events,
                &mut dirty_keys,
            )? {
                Attempt::Done => {
                    remaining -= 1;
                    progress = true;
                }
                Attempt::Pending => {
                    blocked.insert(frag.key);
                    parked.push_back(idx);
                }
            }
        }

        while cursor < items.len() {
            let frag = &items[cursor];
            if blocked.contains(&frag.key) {
                parked.push_back(cursor);
                cursor += 1;
                continue;
            }
            polls += 1;
            match try_fragment(
                frag,
                executor_id,
                store,
                graph,
                config,
                batch_id,
                epoch,
                &mut events,
                &mut dirty_keys,
            )? {
                Attempt::Done => {
                    remaining -= 1;
                    progress = true;
                }
                Attempt::Pending => {
                    blocked.insert(frag.key);
                    parked.push_back(cursor);
                }
            }
            cursor += 1;
        }

        if !progress {
            if polls > config.stall_poll_limit {
                let sample: Vec<String> = parked
                    .iter()
                    .take(8)
                    .map(|idx| {
                        let f = &items[*idx];
                        match graph.poll_ready(f, config.mode) {
                            Poll::Pending(causes) => {
                                format!("txn {} frag {} waiting on {causes:?}", f.id.txn_id, f.id.seq)
                            }
                            Poll::Ready(_) => format!("txn {} frag {} ready", f.id.txn_id, f.id.seq),
                        }
                    })
                    .collect();
                return Err(EngineError::Stall {
                    executor: executor_id,
                    polls,
                    remaining,
                    sample,
                });
            }
            std::thread::yield_now();
        }
    }

    Ok(ExecutorOutput { events, dirty_keys })
}

enum Attempt {
    Done,
    Pending,
}

#[allow(clippy::too_many_arguments)]
fn try_fragment(
    frag: &Fragment,
    executor_id: usize,
    store: &Store,
    graph: &DependencyGraph,
    config: &EngineConfig,
    batch_id: u64,
    epoch: Instant,
    events: &mut Vec<EventRecord>,
    dirty_keys: &mut Vec<Key>,
) -> Result<Attempt, EngineError> {
    let txn = frag.id.txn_id;

    // Conservative mode may skip fragments of already-aborted transactions:
    // their versions are unreadable behind the gates either way. Speculative
    // mode must not look at statuses here; see the module docs.
    if config.mode == ExecMode::Conservative && graph.status(txn) == TxnStatus::Aborted {
        if config.collect_events {
            events.push(EventRecord {
                batch: batch_id,
                txn,
                frag_seq: frag.id.seq,
                key: frag.key,
                executor: executor_id,
                outcome: FragOutcome::Skipped,
                ts_nanos: now_nanos(epoch),
                priority: frag.priority,
                wrote: false,
                read_queue: false,
                read_from: None,
            });
        }
        return Ok(Attempt::Done);
    }

    let inputs = match graph.poll_ready(frag, config.mode) {
        Poll::Pending(_) => return Ok(Attempt::Pending),
        Poll::Ready(inputs) => inputs,
    };

    match run_fragment(frag, &inputs, store, graph, config)? {
        FragRun::Pending => Ok(Attempt::Pending),
        FragRun::Executed {
            wrote,
            logic_failed,
            read_from,
        } => {
            if wrote {
                dirty_keys.push(frag.key);
            }
            if frag.abortable {
                let (left, any_failed) = graph.note_check_result(txn, !logic_failed)?;
                if config.mode == ExecMode::Conservative {
                    // Resolve as soon as the fate is known: on first failure,
                    // or once the last check passed.
                    if logic_failed {
                        let _ = graph.resolve_txn(txn, false);
                    } else if left == 0 && !any_failed {
                        let _ = graph.resolve_txn(txn, true);
                    }
                }
            }
            if config.collect_events {
                events.push(EventRecord {
                    batch: batch_id,
                    txn,
                    frag_seq: frag.id.seq,
                    key: frag.key,
                    executor: executor_id,
                    outcome: if logic_failed {
                        FragOutcome::LogicAbort
                    } else {
                        FragOutcome::Ok
                    },
                    ts_nanos: now_nanos(epoch),
                    priority: frag.priority,
                    wrote,
                    read_queue: false,
                    read_from,
                });
            }
            Ok(Attempt::Done)
        }
    }
}

enum FragRun {
    /// Record read hit an unresolved writer (conservative); retry later.
    /// Nothing was published or written, so the retry re-runs from scratch.
    Pending,
    Executed {
        wrote: bool,
        logic_failed: bool,
        read_from: Option<Provenance>,
    },
}

/// Execute one fragment's ops in step order against a local view of its
/// record. The record is read at most once (per-record FIFO means nothing
/// can change under us); later ops see the fragment's own pending value, and
/// a single speculative version is installed at the end.
fn run_fragment(
    frag: &Fragment,
    inputs: &[(SlotId, crate::storage::Value)],
    store: &Store,
    graph: &DependencyGraph,
    config: &EngineConfig,
) -> Result<FragRun, EngineError> {
    let txn = frag.id.txn_id;
    let mut slots: HashMap<SlotId, i64> = inputs
        .iter()
        .map(|(slot, v)| (*slot, value_to_i64(v)))
        .collect();
    let mut cur: Option<i64> = None;
    let mut read_from: Option<Provenance> = None;
    let mut wrote = false;
    let mut logic_failed = false;

    for op in &frag.ops {
        let needs_record = matches!(
            op.kind,
            StepKind::Read | StepKind::Rmw | StepKind::ReadAbortCheck
        );
        if needs_record && cur.is_none() {
            let (value, provenance) = match config.mode {
                ExecMode::Speculative => store.read_latest(&frag.key)?,
                ExecMode::Conservative => {
                    match store.read_gated(&frag.key, |writer| match graph.status(writer) {
                        TxnStatus::Active => WriterGate::Unresolved,
                        TxnStatus::Committed => WriterGate::WillCommit,
                        TxnStatus::Aborted => WriterGate::Aborted,
                    })? {
                        GatedRead::WaitOn(_) => return Ok(FragRun::Pending),
                        GatedRead::Value(v, p) => (v, p),
                    }
                }
            };
            if let Provenance::Speculative(writer) = provenance {
                if writer != txn && config.mode == ExecMode::Speculative {
                    graph.record_taint(txn, writer);
                }
            }
            cur = Some(value_to_i64(&value));
            read_from = Some(provenance);
        }

        match op.kind {
            StepKind::Read => {
                slots.insert(op.step_index, cur.unwrap_or_default());
            }
            StepKind::ReadAbortCheck => {
                let v = cur.unwrap_or_default();
                slots.insert(op.step_index, v);
                if !op.compute.check(v) {
                    logic_failed = true;
                }
            }
            StepKind::Rmw => {
                let pre = cur.unwrap_or_default();
                slots.insert(op.step_index, pre);
                cur = Some(op.compute.apply(pre, |s| {
                    slots.get(&s).copied().unwrap_or_default()
                }));
                wrote = true;
            }
            StepKind::Write => {
                cur = Some(op.compute.apply(cur.unwrap_or_default(), |s| {
                    slots.get(&s).copied().unwrap_or_default()
                }));
                wrote = true;
            }
        }

        if frag.publish_slots.contains(&op.step_index) {
            if let Some(v) = slots.get(&op.step_index) {
                graph.publish(txn, op.step_index, value_from_i64(*v))?;
            }
        }
    }

    if wrote {
        let handle = store.write_speculative(
            frag.key,
            value_from_i64(cur.unwrap_or_default()),
            txn,
            frag.priority,
        )?;
        graph.record_write(txn, handle);
    }

    Ok(FragRun::Executed {
        wrote,
        logic_failed,
        read_from,
    })
}

/// Resolve the batch's decisions, install surviving versions, and clear
/// per-batch state. Runs single-threaded after every executor drains.
fn commit_barrier(
    store: &Store,
    graph: &DependencyGraph,
    config: &EngineConfig,
    batch_id: u64,
    exec_outputs: Vec<ExecutorOutput>,
    plan_dump: Option<serde_json::Value>,
) -> Result<BatchResult, EngineError> {
    let logic_failed = graph.logic_failed_txns();

    if config.mode == ExecMode::Speculative {
        // Roots are the transactions whose own checks failed; everything
        // that read (transitively) from an aborted transaction goes with
        // them. Statuses stay untouched until here, so the closure is a
        // pure function of the recorded verdicts and read-from pairs.
        for root in &logic_failed {
            let newly = graph.cascade_abort(*root);
            for txn in newly {
                for handle in graph.writes_of(txn) {
                    match store.mark_version_aborted(&handle) {
                        Ok(()) => {}
                        Err(StorageError::AlreadyAborted(h)) if !config.strict => {
                            let _ = h;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        for txn in graph.txn_ids().collect::<Vec<_>>() {
            if graph.status(txn) == TxnStatus::Active {
                graph.resolve_txn(txn, true)?;
            }
        }
    }

    let mut decisions: BTreeMap<TxnId, Decision> = BTreeMap::new();
    let aborted: BTreeSet<TxnId> = graph
        .txn_ids()
        .filter(|t| graph.status(*t) == TxnStatus::Aborted)
        .collect();
    for txn in graph.txn_ids().collect::<Vec<_>>() {
        let decision = match graph.status(txn) {
            TxnStatus::Active => return Err(EngineError::Unresolved(txn)),
            TxnStatus::Committed => Decision::Committed,
            TxnStatus::Aborted => {
                // A failed check whose inputs were all sound is a logic
                // abort; anything downstream of another aborted transaction
                // is a cascade, even if its own check also fired.
                let tainted_by_aborted =
                    graph.taint_of(txn).iter().any(|w| aborted.contains(w));
                if tainted_by_aborted {
                    Decision::Aborted(AbortReason::Cascade)
                } else {
                    Decision::Aborted(AbortReason::Logic)
                }
            }
        };
        decisions.insert(txn, decision);
    }

    let mut dirty: Vec<Key> = exec_outputs
        .iter()
        .flat_map(|o| o.dirty_keys.iter().copied())
        .collect();
    dirty.sort_unstable();
    dirty.dedup();
    store.install_batch(dirty.iter(), |txn| {
        decisions.get(&txn).map(|d| {
            if d.committed() {
                CommitDecision::Commit
            } else {
                CommitDecision::Abort
            }
        })
    })?;

    let mut events = Vec::new();
    for out in exec_outputs {
        events.extend(out.events);
    }

    Ok(BatchResult {
        batch_id,
        decisions,
        logic_failed,
        taint_edges: graph.taint_edges(),
        events,
        plan_dump,
        deps_dump: config.dump_deps.then(|| graph.dump()),
    })
}

/// Event-log audits shared by tests and external consumers.
pub mod audit {
    use super::EventRecord;
    use crate::storage::{Key, Provenance};
    use std::collections::HashMap;

    /// Check that same-key writing fragments executed in ascending priority
    /// order. Events must be grouped per executor in execution order, which
    /// is how the engine emits them.
    pub fn fifo_per_record(events: &[EventRecord]) -> Result<(), String> {
        let mut last: HashMap<Key, crate::planner::FragmentPriority> = HashMap::new();
        for ev in events.iter().filter(|e| e.wrote) {
            if let Some(prev) = last.get(&ev.key) {
                if *prev >= ev.priority {
                    return Err(format!(
                        "key {:?}: write at {:?} executed after {:?}",
                        ev.key, ev.priority, prev
                    ));
                }
            }
            last.insert(ev.key, ev.priority);
        }
        Ok(())
    }

    /// Check that read-queue fragments only ever observed committed data.
    /// Returns the number of read-queue reads audited.
    pub fn read_committed_only(events: &[EventRecord]) -> Result<usize, String> {
        let mut audited = 0;
        for ev in events.iter().filter(|e| e.read_queue) {
            match ev.read_from {
                Some(Provenance::Committed) => audited += 1,
                other => {
                    return Err(format!(
                        "read-queue fragment txn {} observed {:?}",
                        ev.txn, other
                    ))
                }
            }
        }
        Ok(audited)
    }
}

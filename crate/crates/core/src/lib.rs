//! Deterministic main-memory transaction engine built around two phases:
//! planning, which lays transaction fragments into priority-tagged execution
//! queues, and execution, which drains the queues under a per-record FIFO
//! rule and commits each batch atomically at a barrier. Given the same
//! initial state and batch contents, the engine reaches the same committed
//! state and the same per-transaction decisions on every run, for any
//! planner or executor count.
//!
//! The crate also ships the pieces needed to evaluate that engine honestly:
//! a single-threaded serial oracle ([`oracle`]), a no-wait two-phase-locking
//! baseline ([`baseline`]), and deterministic workload generators
//! ([`workloads`]).

pub mod baseline;
pub mod deps;
pub mod executor;
pub mod oracle;
pub mod planner;
pub mod storage;
pub mod txn;
pub mod workloads;

pub use executor::{
    AbortReason, BatchResult, Decision, Engine, EngineConfig, EngineError, ExecMode,
    IsolationLevel,
};
pub use storage::{Key, Store, Value};
pub use txn::{Compute, Fragment, Step, StepKind, TxnId, TxnSpec};

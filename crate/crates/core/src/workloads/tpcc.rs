//! Simplified order-entry benchmark: NewOrder and Payment only, with every
//! read/write set declared up front so the stream is plannable.
//!
//! NewOrder reads the warehouse row, bumps the district's next-order counter
//! (the classic hotspot), decrements 5-15 stock rows, and writes an order
//! row whose value is the order id it observed; the order-row key derives
//! from the transaction id so no key ever depends on data. Payment adds to
//! the warehouse and district year-to-date counters and moves the customer
//! balance, with a small fraction of payments guarding the balance with an
//! abort check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::storage::{value_from_i64, Key, Value};
use crate::txn::{Compute, Step, StepKind, TxnId, TxnSpec};

pub const TABLE_WAREHOUSE: u16 = 0;
pub const TABLE_DISTRICT_ORDER: u16 = 1;
pub const TABLE_DISTRICT_YTD: u16 = 2;
pub const TABLE_CUSTOMER: u16 = 3;
pub const TABLE_STOCK: u16 = 4;
pub const TABLE_ORDER: u16 = 5;

pub const DISTRICTS_PER_WAREHOUSE: u64 = 10;
pub const CUSTOMERS_PER_DISTRICT: u64 = 3000;
pub const STOCK_PER_WAREHOUSE: u64 = 100_000;
const FIRST_ORDER_ID: i64 = 3001;
const INITIAL_BALANCE: i64 = 100_000;
const INITIAL_STOCK: i64 = 10_000;
/// Fraction of payments that carry a balance check.
const PAYMENT_CHECK_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpccConfig {
    pub warehouse_count: u64,
    pub payment_fraction: f64,
    pub seed: u64,
}

impl Default for TpccConfig {
    fn default() -> Self {
        TpccConfig {
            warehouse_count: 1,
            payment_fraction: 0.5,
            seed: 1,
        }
    }
}

impl TpccConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.warehouse_count < 1 {
            return Err("warehouse_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.payment_fraction) {
            return Err("payment_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

fn warehouse_key(w: u64) -> Key {
    Key::new(TABLE_WAREHOUSE, w)
}

fn district_order_key(w: u64, d: u64) -> Key {
    Key::new(TABLE_DISTRICT_ORDER, w * DISTRICTS_PER_WAREHOUSE + d)
}

fn district_ytd_key(w: u64, d: u64) -> Key {
    Key::new(TABLE_DISTRICT_YTD, w * DISTRICTS_PER_WAREHOUSE + d)
}

fn customer_key(w: u64, d: u64, c: u64) -> Key {
    Key::new(
        TABLE_CUSTOMER,
        (w * DISTRICTS_PER_WAREHOUSE + d) * CUSTOMERS_PER_DISTRICT + c,
    )
}

fn stock_key(w: u64, item: u64) -> Key {
    Key::new(TABLE_STOCK, w * STOCK_PER_WAREHOUSE + item)
}

/// Initial committed state for every table except orders, which are created
/// by the workload itself.
pub fn tpcc_load(cfg: &TpccConfig) -> Vec<(Key, Value)> {
    let mut out = Vec::new();
    for w in 0..cfg.warehouse_count {
        out.push((warehouse_key(w), value_from_i64(0)));
        for d in 0..DISTRICTS_PER_WAREHOUSE {
            out.push((district_order_key(w, d), value_from_i64(FIRST_ORDER_ID)));
            out.push((district_ytd_key(w, d), value_from_i64(0)));
            for c in 0..CUSTOMERS_PER_DISTRICT {
                out.push((customer_key(w, d, c), value_from_i64(INITIAL_BALANCE)));
            }
        }
        for item in 0..STOCK_PER_WAREHOUSE {
            out.push((stock_key(w, item), value_from_i64(INITIAL_STOCK)));
        }
    }
    out
}

pub fn gen_tpcc(cfg: &TpccConfig, count: usize, first_txn_id: TxnId) -> Vec<TxnSpec> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut txns = Vec::with_capacity(count);
    for i in 0..count {
        let txn_id = first_txn_id + i as TxnId;
        let w = rng.gen_range(0..cfg.warehouse_count);
        let d = rng.gen_range(0..DISTRICTS_PER_WAREHOUSE);
        let spec = if rng.gen_bool(cfg.payment_fraction) {
            payment(&mut rng, txn_id, w, d)
        } else {
            new_order(&mut rng, txn_id, w, d)
        };
        txns.push(spec);
    }
    txns
}

fn new_order(rng: &mut ChaCha12Rng, txn_id: TxnId, w: u64, d: u64) -> TxnSpec {
    let mut steps = vec![
        // Warehouse row read (tax lookup); slot 0.
        Step {
            key: warehouse_key(w),
            kind: StepKind::Read,
            compute: Compute::Identity,
        },
        // District next-order-id bump; slot 1 holds the order id assigned.
        Step {
            key: district_order_key(w, d),
            kind: StepKind::Rmw,
            compute: Compute::AddDelta(1),
        },
    ];
    let line_count = rng.gen_range(5..=15u64);
    let mut items: Vec<u64> = Vec::with_capacity(line_count as usize);
    while items.len() < line_count as usize {
        let item = rng.gen_range(0..STOCK_PER_WAREHOUSE);
        if !items.contains(&item) {
            items.push(item);
        }
    }
    for item in items {
        steps.push(Step {
            key: stock_key(w, item),
            kind: StepKind::Rmw,
            compute: Compute::AddDelta(-(rng.gen_range(1..=10i64))),
        });
    }
    // Order row keyed by transaction id, carrying the observed order id.
    steps.push(Step {
        key: Key::new(TABLE_ORDER, txn_id),
        kind: StepKind::Write,
        compute: Compute::CopyFrom(1),
    });
    TxnSpec::from_steps(txn_id, steps)
}

fn payment(rng: &mut ChaCha12Rng, txn_id: TxnId, w: u64, d: u64) -> TxnSpec {
    let amount = rng.gen_range(1..=5000i64);
    let c = rng.gen_range(0..CUSTOMERS_PER_DISTRICT);
    let guarded = rng.gen_bool(PAYMENT_CHECK_FRACTION);
    let mut steps = vec![
        // Warehouse year-to-date: the single-warehouse hotspot.
        Step {
            key: warehouse_key(w),
            kind: StepKind::Rmw,
            compute: Compute::AddDelta(amount),
        },
        Step {
            key: district_ytd_key(w, d),
            kind: StepKind::Rmw,
            compute: Compute::AddDelta(amount),
        },
    ];
    if guarded {
        steps.push(Step {
            key: customer_key(w, d, c),
            kind: StepKind::ReadAbortCheck,
            compute: Compute::CheckPositive,
        });
    }
    steps.push(Step {
        key: customer_key(w, d, c),
        kind: StepKind::Rmw,
        compute: Compute::AddDelta(-amount),
    });
    TxnSpec::from_steps(txn_id, steps)
}

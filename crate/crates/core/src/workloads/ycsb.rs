//! YCSB-style key-value transactions: a fixed number of distinct keys per
//! transaction drawn from a Zipf distribution, each op a blind write or a
//! read. A configurable fraction of transactions carries one poison-value
//! abort check, and a matching share of writes plants the poison, which
//! keeps logic-abort rates controllable without data-dependent read sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::storage::{value_from_i64, Key, Value};
use crate::txn::{Compute, Step, StepKind, TxnId, TxnSpec, POISON};

use super::ZipfSampler;

pub const YCSB_TABLE: u16 = 0;

/// Fraction of an abortable workload's writes that plant the poison value,
/// relative to `abortable_fraction`.
const POISON_WRITE_SHARE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YcsbConfig {
    pub record_count: u64,
    pub ops_per_txn: usize,
    pub write_fraction: f64,
    pub zipf_theta: f64,
    pub abortable_fraction: f64,
    pub seed: u64,
}

impl Default for YcsbConfig {
    fn default() -> Self {
        YcsbConfig {
            record_count: 10_000,
            ops_per_txn: 10,
            write_fraction: 0.5,
            zipf_theta: 0.0,
            abortable_fraction: 0.0,
            seed: 1,
        }
    }
}

impl YcsbConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.ops_per_txn < 1 {
            return Err("ops_per_txn must be at least 1".into());
        }
        if self.record_count < self.ops_per_txn as u64 {
            return Err("record_count must cover ops_per_txn distinct keys".into());
        }
        for (name, v) in [
            ("write_fraction", self.write_fraction),
            ("abortable_fraction", self.abortable_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.zipf_theta < 0.0 {
            return Err("zipf_theta must be non-negative".into());
        }
        Ok(())
    }
}

/// Initial committed state: every record holds a small positive value.
pub fn ycsb_load(cfg: &YcsbConfig) -> impl Iterator<Item = (Key, Value)> + '_ {
    (0..cfg.record_count).map(|r| (Key::new(YCSB_TABLE, r), value_from_i64(r as i64 % 1000 + 1)))
}

/// Generate `count` transactions with ids starting at `first_txn_id`.
pub fn gen_ycsb(cfg: &YcsbConfig, count: usize, first_txn_id: TxnId) -> Vec<TxnSpec> {
    let sampler = ZipfSampler::new(cfg.record_count as usize, cfg.zipf_theta);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut txns = Vec::with_capacity(count);
    for i in 0..count {
        let txn_id = first_txn_id + i as TxnId;
        let mut keys: Vec<u64> = Vec::with_capacity(cfg.ops_per_txn);
        while keys.len() < cfg.ops_per_txn {
            let r = sampler.sample(&mut rng) as u64;
            if !keys.contains(&r) {
                keys.push(r);
            }
        }
        let mut steps: Vec<Step> = keys
            .iter()
            .map(|r| {
                let key = Key::new(YCSB_TABLE, *r);
                if rng.gen_bool(cfg.write_fraction) {
                    let plant_poison = cfg.abortable_fraction > 0.0
                        && rng.gen_bool(cfg.abortable_fraction * POISON_WRITE_SHARE);
                    let value = if plant_poison {
                        POISON
                    } else {
                        rng.gen_range(1..=1_000_000)
                    };
                    Step {
                        key,
                        kind: StepKind::Write,
                        compute: Compute::Const(value),
                    }
                } else {
                    Step {
                        key,
                        kind: StepKind::Read,
                        compute: Compute::Identity,
                    }
                }
            })
            .collect();
        if cfg.abortable_fraction > 0.0 && rng.gen_bool(cfg.abortable_fraction) {
            let idx = rng.gen_range(0..steps.len());
            steps[idx].kind = StepKind::ReadAbortCheck;
            steps[idx].compute = Compute::CheckNotPoison;
        }
        txns.push(TxnSpec::from_steps(txn_id, steps));
    }
    txns
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn zero_write_fraction_is_read_only() {
        let cfg = YcsbConfig {
            write_fraction: 0.0,
            record_count: 100,
            ops_per_txn: 4,
            ..YcsbConfig::default()
        };
        for txn in gen_ycsb(&cfg, 50, 1) {
            assert!(txn.write_set.is_empty());
            assert!(txn.steps.iter().all(|s| s.kind == StepKind::Read));
        }
    }

    #[test]
    fn each_txn_touches_distinct_keys() {
        let cfg = YcsbConfig {
            record_count: 64,
            ops_per_txn: 4,
            zipf_theta: 0.99,
            ..YcsbConfig::default()
        };
        for txn in gen_ycsb(&cfg, 200, 1) {
            let keys: BTreeSet<Key> = txn.steps.iter().map(|s| s.key).collect();
            assert_eq!(keys.len(), 4);
        }
    }

    #[test]
    fn skewed_generation_concentrates_on_hottest_key() {
        // With theta = 0.99 over 1000 records the hottest record's exact
        // marginal probability per op is 1/zeta(0.99, 1000) ~= 0.134;
        // distinct-key sampling within a txn dampens that, but well above
        // the 5% line for 10-op transactions.
        let cfg = YcsbConfig {
            record_count: 1000,
            ops_per_txn: 10,
            zipf_theta: 0.99,
            write_fraction: 0.5,
            ..YcsbConfig::default()
        };
        let txns = gen_ycsb(&cfg, 100_000, 1);
        let mut hot = 0u64;
        let mut total = 0u64;
        for txn in &txns {
            for step in &txn.steps {
                total += 1;
                if step.key.record == 0 {
                    hot += 1;
                }
            }
        }
        let frac = hot as f64 / total as f64;
        assert!(frac > 0.05, "hottest key frequency {frac}");
    }

    #[test]
    fn generation_is_pure() {
        let cfg = YcsbConfig {
            record_count: 128,
            ops_per_txn: 6,
            abortable_fraction: 0.2,
            zipf_theta: 0.5,
            ..YcsbConfig::default()
        };
        assert_eq!(gen_ycsb(&cfg, 500, 1), gen_ycsb(&cfg, 500, 1));
        let other = YcsbConfig {
            seed: 2,
            ..cfg.clone()
        };
        assert_ne!(gen_ycsb(&cfg, 500, 1), gen_ycsb(&other, 500, 1));
    }

    #[test]
    fn abortable_fraction_places_checks() {
        let cfg = YcsbConfig {
            record_count: 100,
            ops_per_txn: 4,
            abortable_fraction: 1.0,
            ..YcsbConfig::default()
        };
        for txn in gen_ycsb(&cfg, 100, 1) {
            assert_eq!(
                txn.steps
                    .iter()
                    .filter(|s| s.kind == StepKind::ReadAbortCheck)
                    .count(),
                1
            );
        }
    }
}

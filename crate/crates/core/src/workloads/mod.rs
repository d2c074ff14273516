//! Deterministic transaction stream generators.
//!
//! Both generators are pure functions of their config: the same seed yields
//! a byte-identical spec stream, which the determinism suites rely on.

mod spec_text;
mod tpcc;
mod ycsb;
mod zipf;

pub use spec_text::{format_txn, parse_stream, parse_txn, ParseError};
pub use tpcc::{gen_tpcc, tpcc_load, TpccConfig};
pub use ycsb::{gen_ycsb, ycsb_load, YcsbConfig};
pub use zipf::ZipfSampler;

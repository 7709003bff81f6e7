//! Benchmark harness for the adaptive filters: seeded workload generators,
//! false-positive and adaptivity measurements, and CSV metrics rows.
//!
//! Member keys and query keys live in disjoint halves of the 64-bit key
//! space (queries carry the top bit), so FPR runs never accidentally query
//! a stored key. Everything is deterministic per seed except wall-clock
//! throughput numbers.

use std::fmt;

pub mod measure;
pub mod metrics;
pub mod workload;

use adaptive_filters::coder::{ExtensionModel, SelectorModel};
use adaptive_filters::exaf::ExafFilter;
use adaptive_filters::rsqf::RsqfFilter;
use adaptive_filters::taf::TafFilter;
pub use adaptive_filters::{Filter, QueryOutcome, Stats, Verdict};

#[derive(Debug)]
pub enum BenchError {
    InvalidSpec(String),
    InvalidStream(&'static str),
    Filter(adaptive_filters::Error),
    Io(std::io::Error),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::InvalidSpec(s) => write!(f, "invalid workload spec: {s}"),
            BenchError::InvalidStream(s) => write!(f, "invalid query stream: {s}"),
            BenchError::Filter(e) => write!(f, "filter error: {e}"),
            BenchError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<adaptive_filters::Error> for BenchError {
    fn from(e: adaptive_filters::Error) -> Self {
        BenchError::Filter(e)
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e)
    }
}

/// Filter variants the harness knows how to drive.
pub const FILTER_NAMES: [&str; 5] = ["taf", "exaf", "rsqf", "utaf", "uexaf"];

pub fn make_filter(
    name: &str,
    qbits: u32,
    rbits: u32,
    seed: u64,
) -> Result<Box<dyn Filter>, BenchError> {
    let f: Box<dyn Filter> = match name {
        "taf" => Box::new(TafFilter::new(qbits, rbits, SelectorModel::Fixed256, seed)?),
        "utaf" => Box::new(TafFilter::new_uncompressed(qbits, rbits, seed)?),
        "exaf" => Box::new(ExafFilter::new(qbits, rbits, ExtensionModel::default(), seed)?),
        "uexaf" => Box::new(ExafFilter::new_uncompressed(qbits, rbits, seed)?),
        "rsqf" => Box::new(RsqfFilter::new(qbits, rbits, seed)?),
        other => {
            return Err(BenchError::InvalidSpec(format!(
                "unknown filter {other:?}; expected one of {FILTER_NAMES:?}"
            )))
        }
    };
    Ok(f)
}

/// Fill `filter` with distinct member keys up to `load * nslots` elements;
/// returns the keys inserted.
pub fn fill_to_load(
    filter: &mut dyn Filter,
    load: f64,
    seed: u64,
) -> Result<Vec<u64>, BenchError> {
    if !(0.0..=1.0).contains(&load) {
        return Err(BenchError::InvalidSpec(format!("load {load} outside [0, 1]")));
    }
    let target = (filter.nslots() as f64 * load) as u64;
    let keys = workload::member_keys(target, seed);
    for &k in &keys {
        filter.insert(k)?;
    }
    Ok(keys)
}

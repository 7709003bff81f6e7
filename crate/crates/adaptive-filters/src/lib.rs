//! Adaptive approximate-membership filters over a blocked rank-and-select
//! quotient filter (RSQF).
//!
//! Two adaptive variants share the same substrate:
//!
//! * [`taf::TafFilter`] — the telescoping adaptive filter. Each stored
//!   element carries a small *hash-selector* value choosing which chunk of
//!   its 128-bit hash serves as the remainder. A verified false positive is
//!   fixed by incrementing the selectors of the colliding slots, which
//!   re-randomizes their remainders. Selectors for each 64-slot block are
//!   packed into a 56-bit arithmetic code.
//! * [`exaf::ExafFilter`] — the extension adaptive filter. Fixes false
//!   positives by lengthening fingerprints with extra hash bits; the
//!   variable-length extensions of a block live in the same 56-bit sidecar.
//!
//! Both filters keep a remote store ([`remote::RemoteStore`]) of
//! `(key, hash)` pairs, slot-aligned with the local filter, used to verify
//! positives and drive adapts. The remote store does not count toward the
//! filter's local space.
//!
//! The crate is `no_std` (alloc required). All randomness comes from the
//! caller-provided hash seed; the filters themselves are deterministic.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

use core::fmt;

pub mod coder;
pub mod exaf;
pub mod hash;
pub mod remote;
pub mod rsqf;
pub mod taf;

/// Errors shared across the filter modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Error {
    /// Construction parameters violate the documented bounds.
    InvalidParams(&'static str),
    /// A selector index exceeds what the 128-bit hash can supply.
    SelectorOutOfRange,
    /// A bit range runs past the end of the 128-bit hash.
    HashExhausted,
    /// The filter is at 100% occupancy.
    FilterFull,
    /// An arithmetic code no longer fits in its fixed-width word.
    CodeOverflow,
    /// A letter is not representable under the probability model.
    LetterTooLarge,
    /// A fingerprint extension exceeds the configured length cap.
    ExtensionTooLong,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(what) => write!(f, "invalid parameters: {what}"),
            Error::SelectorOutOfRange => write!(f, "hash-selector value out of range"),
            Error::HashExhausted => write!(f, "bit range exceeds the 128-bit hash"),
            Error::FilterFull => write!(f, "filter is full"),
            Error::CodeOverflow => write!(f, "arithmetic code exceeds its fixed width"),
            Error::LetterTooLarge => write!(f, "letter not encodable under this model"),
            Error::ExtensionTooLong => write!(f, "extension exceeds the length cap"),
        }
    }
}

impl core::error::Error for Error {}

/// Lookup answer. Filters never answer `Absent` for a stored key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Present,
    Absent,
}

/// Outcome of one adaptive query.
///
/// Invariants: `adapted` implies `was_false_positive`; `rebuilt` implies
/// `adapted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryOutcome {
    pub verdict: Verdict,
    /// Local verdict was `Present` but the remote store showed the key is
    /// not a member.
    pub was_false_positive: bool,
    /// Adaptivity metadata of at least one colliding slot was advanced.
    pub adapted: bool,
    /// Fixing the false positive forced at least one block rebuild.
    pub rebuilt: bool,
}

impl QueryOutcome {
    pub(crate) fn absent() -> Self {
        QueryOutcome {
            verdict: Verdict::Absent,
            was_false_positive: false,
            adapted: false,
            rebuilt: false,
        }
    }

    pub(crate) fn member() -> Self {
        QueryOutcome {
            verdict: Verdict::Present,
            was_false_positive: false,
            adapted: false,
            rebuilt: false,
        }
    }

    pub fn is_present(&self) -> bool {
        self.verdict == Verdict::Present
    }
}

/// Point-in-time instrumentation snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    /// Occupancy divided by the logical slot count.
    pub load: f64,
    /// Local filter bits divided by the number of stored elements
    /// (0.0 when empty). Remote storage is excluded.
    pub bits_per_element: f64,
    pub rebuilds: u64,
    pub adapts: u64,
    /// For the TAF: count of stored elements per hash-selector value.
    /// For the exAF: count of stored elements per extension length.
    /// Obtained by decoding every block sidecar.
    pub histogram: alloc::vec::Vec<u64>,
}

/// Common driver interface for the filter variants; used by benchmarks.
pub trait Filter {
    fn insert(&mut self, key: u64) -> Result<(), Error>;
    /// Non-mutating membership probe.
    fn lookup(&self, key: u64) -> bool;
    /// Adaptive query: may consult the remote store and fix false positives.
    fn query(&mut self, key: u64) -> QueryOutcome;
    fn occupancy(&self) -> u64;
    /// Logical slot count (2^qbits).
    fn nslots(&self) -> u64;
    fn stats(&self) -> Stats;
    fn name(&self) -> &'static str;
}

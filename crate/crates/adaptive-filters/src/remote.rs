//! The remote representation: a slot-aligned store of `(key, hash)` pairs.
//!
//! Adaptive filters verify every locally-positive query against the remote
//! store and read stored hashes back out of it when fixing false positives,
//! so no key is ever rehashed. The sync invariant is positional: if the
//! local filter keeps element `x`'s remainder in slot `s`, then slot `s`
//! here holds `(x, h(x))`. Shifting inserts therefore shift this store too.
//!
//! The store lives in memory; its space does not count toward the filter's
//! local footprint. Simulating a slow remote medium is the benchmark
//! harness's business, not this module's.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::hash::HashBits;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteEntry {
    pub key: u64,
    pub hash: HashBits,
}

#[derive(Debug, Clone, Default)]
pub struct RemoteStore {
    slots: Vec<Option<RemoteEntry>>,
}

impl RemoteStore {
    pub fn new(nslots: u64) -> Self {
        RemoteStore {
            slots: vec![None; nslots as usize],
        }
    }

    pub fn len(&self) -> u64 {
        self.slots.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(|s| s.is_none())
    }

    /// Grow to `nslots` slots; mirrors physical growth of the local filter.
    pub fn ensure_slots(&mut self, nslots: u64) {
        if nslots as usize > self.slots.len() {
            self.slots.resize(nslots as usize, None);
        }
    }

    pub fn place(&mut self, slot: u64, key: u64, hash: HashBits) {
        self.slots[slot as usize] = Some(RemoteEntry { key, hash });
    }

    pub fn get(&self, slot: u64) -> Option<&RemoteEntry> {
        self.slots[slot as usize].as_ref()
    }

    pub fn is_used(&self, slot: u64) -> bool {
        self.slots[slot as usize].is_some()
    }

    /// Move entries in `range` one slot right, mirroring a shifting insert.
    /// The vacated first slot is cleared; the caller places the new entry.
    pub fn shift(&mut self, range: Range<u64>) {
        for i in (range.start..range.end).rev() {
            self.slots[(i + 1) as usize] = self.slots[i as usize].take();
        }
    }

    /// Resolve a locally-positive query against the true set. `run` pairs
    /// each slot of the queried quotient's run with whether its stored
    /// fingerprint matched the query. Returns whether the key itself is a
    /// member, and the slots whose elements currently fingerprint-collide
    /// with it (the set the filter must adapt).
    pub fn collisions(&self, run: &[(u64, bool)], key: u64) -> (bool, Vec<u64>) {
        let mut is_member = false;
        let mut colliding = Vec::new();
        for &(slot, matched) in run {
            match self.get(slot) {
                Some(e) if e.key == key => is_member = true,
                Some(_) if matched => colliding.push(slot),
                _ => {}
            }
        }
        (is_member, colliding)
    }
}

//! The extension adaptive filter.
//!
//! Same blocked RSQF substrate as the TAF, but a slot's fingerprint is the
//! quotient, the *base* remainder (hash chunk 0, never replaced), and a
//! variable-length extension of further hash bits. A verified false
//! positive against element `x` is fixed deterministically: `x`'s extension
//! grows to the shortest hash prefix that no longer prefix-matches the
//! querying key's hash — through the first differing bit, inclusive.
//!
//! Queries are two-phase. Phase one compares quotient and base remainder
//! without touching the sidecar; only on a phase-one match is the block's
//! arithmetic code decoded so extensions can be checked. Negative-heavy
//! workloads therefore skip almost all decode work, which is why this
//! filter answers queries faster than the TAF.
//!
//! Inserts never adapt, so duplicate fingerprints can accumulate; they are
//! kept as duplicates. Extensions of shifted slots migrate with their
//! remainders; a block whose extensions no longer fit its 56-bit sidecar is
//! rebuilt (all extensions zeroed, then the triggering fix re-applied).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::coder::{
    decode_extensions, encode_extensions, Extension, ExtensionModel, BLOCK_LETTERS,
    EXTENSION_LEN_CAP,
};
use crate::hash::{
    extension_budget, extension_slice, fingerprint_parts, hash128, FingerprintParams, HashBits,
};
use crate::remote::RemoteStore;
use crate::rsqf::{Rsqf, SLOTS_PER_BLOCK};
use crate::{Error, QueryOutcome, Stats, Verdict};

enum ExtBacking {
    Coded(ExtensionModel),
    Plain(Vec<Extension>),
}

pub struct ExafFilter {
    rsqf: Rsqf,
    remote: RemoteStore,
    params: FingerprintParams,
    seed: u64,
    backing: ExtBacking,
    ext_cap: u32,
    adapts: u64,
    rebuilds: u64,
    false_positives: u64,
    dropped_fixes: u64,
    clamped_extensions: u64,
    hash_collisions: u64,
    rebuilt_blocks: Vec<u64>,
}

impl ExafFilter {
    pub fn new(qbits: u32, rbits: u32, model: ExtensionModel, seed: u64) -> Result<Self, Error> {
        model.validate()?;
        Self::build(qbits, rbits, seed, |_| ExtBacking::Coded(model))
    }

    /// Uncompressed mirror: extensions in a plain array.
    pub fn new_uncompressed(qbits: u32, rbits: u32, seed: u64) -> Result<Self, Error> {
        Self::build(qbits, rbits, seed, |slots| {
            ExtBacking::Plain(vec![Extension::EMPTY; slots as usize])
        })
    }

    fn build(
        qbits: u32,
        rbits: u32,
        seed: u64,
        backing: impl FnOnce(u64) -> ExtBacking,
    ) -> Result<Self, Error> {
        let params = FingerprintParams::new(qbits, rbits)?;
        if extension_budget(params) < 1 {
            return Err(Error::InvalidParams("no hash bits left for extensions"));
        }
        let rsqf = Rsqf::new(params)?;
        let physical = rsqf.physical_slots();
        Ok(ExafFilter {
            rsqf,
            remote: RemoteStore::new(physical),
            params,
            seed,
            backing: backing(physical),
            ext_cap: EXTENSION_LEN_CAP.min(extension_budget(params)),
            adapts: 0,
            rebuilds: 0,
            false_positives: 0,
            dropped_fixes: 0,
            clamped_extensions: 0,
            hash_collisions: 0,
            rebuilt_blocks: Vec::new(),
        })
    }

    pub fn params(&self) -> FingerprintParams {
        self.params
    }

    pub fn occupancy(&self) -> u64 {
        self.rsqf.occupancy()
    }

    pub fn load(&self) -> f64 {
        self.rsqf.load()
    }

    pub fn adapts(&self) -> u64 {
        self.adapts
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    pub fn false_positives(&self) -> u64 {
        self.false_positives
    }

    pub fn dropped_fixes(&self) -> u64 {
        self.dropped_fixes
    }

    /// Fixes whose distinguishing prefix exceeded the extension length cap
    /// and were stored truncated (the false positive stays fixable only by
    /// later rebuilds).
    pub fn clamped_extensions(&self) -> u64 {
        self.clamped_extensions
    }

    /// Queries whose hash agreed with a stored element's hash on every
    /// extension bit; unresolvable, handled by rebuilding the block.
    pub fn hash_collisions(&self) -> u64 {
        self.hash_collisions
    }

    pub fn rebuilt_blocks(&self) -> &[u64] {
        &self.rebuilt_blocks
    }

    pub fn extension_cap(&self) -> u32 {
        self.ext_cap
    }

    pub fn local_bits(&self) -> u64 {
        match self.backing {
            ExtBacking::Coded(_) => self.rsqf.local_bits(),
            // One length byte plus sixteen value bits per slot.
            ExtBacking::Plain(_) => {
                self.rsqf.local_bits_without_sidecar() + self.rsqf.nblocks() * SLOTS_PER_BLOCK * 24
            }
        }
    }

    pub fn extensions_of_block(&self, block: u64) -> [Extension; BLOCK_LETTERS] {
        match &self.backing {
            ExtBacking::Coded(m) => decode_extensions(self.rsqf.sidecar(block), *m),
            ExtBacking::Plain(v) => {
                let mut out = [Extension::EMPTY; BLOCK_LETTERS];
                let base = (block * SLOTS_PER_BLOCK) as usize;
                out.copy_from_slice(&v[base..base + BLOCK_LETTERS]);
                out
            }
        }
    }

    fn write_block_extensions(
        &mut self,
        block: u64,
        exts: &[Extension; BLOCK_LETTERS],
    ) -> Result<(), Error> {
        match &mut self.backing {
            ExtBacking::Coded(m) => {
                let code = encode_extensions(exts, *m)?;
                self.rsqf.set_sidecar(block, code);
                Ok(())
            }
            ExtBacking::Plain(v) => {
                let base = (block * SLOTS_PER_BLOCK) as usize;
                v[base..base + BLOCK_LETTERS].copy_from_slice(exts);
                Ok(())
            }
        }
    }

    fn sync_growth(&mut self) {
        let physical = self.rsqf.physical_slots();
        self.remote.ensure_slots(physical);
        if let ExtBacking::Plain(v) = &mut self.backing {
            if (v.len() as u64) < physical {
                v.resize(physical as usize, Extension::EMPTY);
            }
        }
    }

    pub fn insert(&mut self, key: u64) -> Result<(), Error> {
        let h = hash128(key, self.seed);
        let (q, r0) = fingerprint_parts(h, self.params, 0).expect("selector 0 always valid");
        let out = self.rsqf.insert_remainder(q, r0)?;
        self.sync_growth();
        self.remote.shift(out.shifted.clone());
        self.remote.place(out.slot, key, h);
        if !out.shifted.is_empty() {
            self.migrate_extensions(&out.shifted);
        }
        Ok(())
    }

    fn migrate_extensions(&mut self, shifted: &Range<u64>) {
        let s = shifted.start;
        let u = shifted.end;
        match &mut self.backing {
            ExtBacking::Plain(v) => {
                for i in (s..u).rev() {
                    v[(i + 1) as usize] = v[i as usize];
                }
                v[s as usize] = Extension::EMPTY;
            }
            ExtBacking::Coded(m) => {
                let model = *m;
                let first_block = s / SLOTS_PER_BLOCK;
                let last_block = u / SLOTS_PER_BLOCK;
                let nb = (last_block - first_block + 1) as usize;
                let mut bufs: Vec<[Extension; BLOCK_LETTERS]> = (0..nb)
                    .map(|k| decode_extensions(self.rsqf.sidecar(first_block + k as u64), model))
                    .collect();
                let idx = |slot: u64| {
                    (
                        (slot / SLOTS_PER_BLOCK - first_block) as usize,
                        (slot % SLOTS_PER_BLOCK) as usize,
                    )
                };
                for i in (s..u).rev() {
                    let (fb, fj) = idx(i);
                    let (tb, tj) = idx(i + 1);
                    bufs[tb][tj] = bufs[fb][fj];
                }
                let (sb, sj) = idx(s);
                bufs[sb][sj] = Extension::EMPTY;
                for (k, buf) in bufs.iter().enumerate() {
                    let block = first_block + k as u64;
                    match encode_extensions(buf, model) {
                        Ok(code) => self.rsqf.set_sidecar(block, code),
                        Err(_) => self.rebuild_with_fixes(block, &[]),
                    }
                }
            }
        }
    }

    /// Phase one: slots of the quotient's run whose stored remainder equals
    /// the query's base chunk. No sidecar decode.
    fn base_matches(&self, h: HashBits, out: &mut Vec<u64>) {
        let (q, r0) = fingerprint_parts(h, self.params, 0).expect("selector 0 always valid");
        let Some((start, end)) = self.rsqf.run_bounds(q) else {
            return;
        };
        for slot in start..=end {
            if self.rsqf.remainder(slot) == r0 {
                out.push(slot);
            }
        }
    }

    /// Phase two: keep slots whose stored extension is a prefix of the
    /// query's extension bits. Decodes each touched block once.
    fn extension_matches(&self, h: HashBits, base: &[u64], out: &mut Vec<u64>) {
        let mut cur_block = u64::MAX;
        let mut exts = [Extension::EMPTY; BLOCK_LETTERS];
        for &slot in base {
            let block = slot / SLOTS_PER_BLOCK;
            if block != cur_block {
                exts = self.extensions_of_block(block);
                cur_block = block;
            }
            let e = exts[(slot % SLOTS_PER_BLOCK) as usize];
            let query_bits = extension_slice(h, self.params, 0, e.len())
                .expect("stored extensions stay within the budget");
            if e.is_empty() || u64::from(e.bits()) == query_bits {
                out.push(slot);
            }
        }
    }

    pub fn lookup(&self, key: u64) -> bool {
        let h = hash128(key, self.seed);
        let mut base = Vec::new();
        self.base_matches(h, &mut base);
        if base.is_empty() {
            return false;
        }
        let mut passing = Vec::new();
        self.extension_matches(h, &base, &mut passing);
        !passing.is_empty()
    }

    /// Adaptive query: on a verified false positive, lengthen the extension
    /// of every colliding slot through the first bit where its hash departs
    /// from the query's.
    pub fn query(&mut self, key: u64) -> QueryOutcome {
        let h = hash128(key, self.seed);
        let mut base = Vec::new();
        self.base_matches(h, &mut base);
        if base.is_empty() {
            return QueryOutcome::absent();
        }
        let mut passing = Vec::new();
        self.extension_matches(h, &base, &mut passing);
        if passing.is_empty() {
            return QueryOutcome::absent();
        }
        let (q, _) = fingerprint_parts(h, self.params, 0).expect("selector 0 always valid");
        let (start, end) = self.rsqf.run_bounds(q).expect("match implies a run");
        let is_member =
            (start..=end).any(|s| self.remote.get(s).is_some_and(|e| e.key == key));
        if is_member {
            return QueryOutcome::member();
        }
        self.false_positives += 1;
        let rebuilt = self.adapt(&passing, h);
        QueryOutcome {
            verdict: Verdict::Present,
            was_false_positive: true,
            adapted: true,
            rebuilt,
        }
    }

    /// First bit index at which the two hashes' extension streams differ.
    fn first_ext_diff(&self, a: HashBits, b: HashBits) -> Option<u32> {
        let shift = self.params.qbits() + self.params.rbits();
        let x = (a.0 ^ b.0) >> shift;
        if x == 0 {
            None
        } else {
            Some(x.trailing_zeros())
        }
    }

    fn adapt(&mut self, passing: &[u64], qh: HashBits) -> bool {
        let mut any_rebuild = false;
        let mut fixes: Vec<(u64, Extension)> = Vec::new();
        for &slot in passing {
            let eh = self.remote.get(slot).expect("used slot has a remote entry").hash;
            match self.first_ext_diff(eh, qh) {
                None => {
                    // The hashes agree on all 128 bits; nothing can tell
                    // them apart. Reset the block and record the event.
                    self.hash_collisions += 1;
                    self.rebuild_with_fixes(slot / SLOTS_PER_BLOCK, &[]);
                    any_rebuild = true;
                }
                Some(d) => {
                    let mut len = d + 1;
                    if len > self.ext_cap {
                        len = self.ext_cap;
                        self.clamped_extensions += 1;
                    }
                    let bits = extension_slice(eh, self.params, 0, len)
                        .expect("length within budget") as u16;
                    fixes.push((slot, Extension::new(len, bits).expect("length within cap")));
                }
            }
        }
        let mut i = 0;
        while i < fixes.len() {
            let block = fixes[i].0 / SLOTS_PER_BLOCK;
            let mut j = i;
            while j < fixes.len() && fixes[j].0 / SLOTS_PER_BLOCK == block {
                j += 1;
            }
            any_rebuild |= self.apply_block(block, &fixes[i..j]);
            i = j;
        }
        any_rebuild
    }

    fn apply_block(&mut self, block: u64, fixes: &[(u64, Extension)]) -> bool {
        let mut exts = self.extensions_of_block(block);
        for &(slot, e) in fixes {
            exts[(slot % SLOTS_PER_BLOCK) as usize] = e;
        }
        if self.write_block_extensions(block, &exts).is_ok() {
            self.adapts += fixes.len() as u64;
            return false;
        }
        self.rebuild_with_fixes(block, fixes);
        true
    }

    /// Zero every extension in `block`, then re-apply the pending fixes.
    /// Unlike the TAF, remainders are untouched: the base chunk never
    /// changes. Fixes that cannot fit even in a fresh block are dropped.
    fn rebuild_with_fixes(&mut self, block: u64, fixes: &[(u64, Extension)]) {
        self.rebuilds += 1;
        self.rebuilt_blocks.push(block);
        let mut kept = fixes.len();
        loop {
            let mut exts = [Extension::EMPTY; BLOCK_LETTERS];
            for &(slot, e) in &fixes[..kept] {
                exts[(slot % SLOTS_PER_BLOCK) as usize] = e;
            }
            if self.write_block_extensions(block, &exts).is_ok() {
                self.dropped_fixes += (fixes.len() - kept) as u64;
                return;
            }
            kept -= 1; // all-empty always encodes
        }
    }

    /// Rebuild `block` directly, optionally re-extending one slot by a
    /// single bit of its own hash. `then_fix` must name a used slot.
    pub fn rebuild_block(&mut self, block: u64, then_fix: Option<u64>) {
        assert!(block < self.rsqf.nblocks(), "block index out of range");
        match then_fix {
            Some(slot) => {
                assert!(
                    slot / SLOTS_PER_BLOCK == block && self.remote.is_used(slot),
                    "then_fix must name a used slot of the block"
                );
                let eh = self.remote.get(slot).expect("checked above").hash;
                let bits = extension_slice(eh, self.params, 0, 1).expect("budget >= 1") as u16;
                let fix = Extension::new(1, bits).expect("within cap");
                self.rebuild_with_fixes(block, &[(slot, fix)]);
            }
            None => self.rebuild_with_fixes(block, &[]),
        }
    }

    pub fn stats(&self) -> Stats {
        let mut histogram = vec![0u64; self.ext_cap as usize + 1];
        for block in 0..self.rsqf.nblocks() {
            let exts = self.extensions_of_block(block);
            for (j, e) in exts.iter().enumerate() {
                let slot = block * SLOTS_PER_BLOCK + j as u64;
                if self.remote.is_used(slot) {
                    histogram[e.len() as usize] += 1;
                }
            }
        }
        Stats {
            load: self.load(),
            bits_per_element: if self.occupancy() == 0 {
                0.0
            } else {
                self.local_bits() as f64 / self.occupancy() as f64
            },
            rebuilds: self.rebuilds,
            adapts: self.adapts,
            histogram,
        }
    }

    /// Debug serialization, same line format as the TAF.
    pub fn dump_blocks(&self) -> alloc::string::String {
        self.rsqf.dump_blocks()
    }

    pub fn rsqf(&self) -> &Rsqf {
        &self.rsqf
    }

    /// Full-scan consistency check used by tests: substrate invariants,
    /// local/remote sync, base remainders equal to hash chunk 0, and every
    /// stored extension a prefix of its own element's hash.
    pub fn verify(&self) {
        self.rsqf.check_invariants();
        for slot in 0..self.rsqf.physical_slots() {
            assert_eq!(
                self.rsqf.is_slot_used(slot),
                self.remote.is_used(slot),
                "local/remote sync broken at slot {slot}"
            );
        }
        for block in 0..self.rsqf.nblocks() {
            let exts = self.extensions_of_block(block);
            for (j, e) in exts.iter().enumerate() {
                let slot = block * SLOTS_PER_BLOCK + j as u64;
                match self.remote.get(slot) {
                    Some(entry) => {
                        let (eq, er) =
                            fingerprint_parts(entry.hash, self.params, 0).expect("chunk 0");
                        assert_eq!(self.rsqf.remainder(slot), er, "base remainder at {slot}");
                        let own = extension_slice(entry.hash, self.params, 0, e.len())
                            .expect("within budget");
                        assert_eq!(
                            u64::from(e.bits()),
                            own,
                            "extension at slot {slot} is not a prefix of its own hash"
                        );
                        let (rs, re) = self.rsqf.run_bounds(eq).expect("member quotient occupied");
                        assert!(rs <= slot && slot <= re, "slot {slot} outside its run");
                    }
                    None => assert!(e.is_empty(), "unused slot {slot} has an extension"),
                }
            }
        }
    }
}

impl crate::Filter for ExafFilter {
    fn insert(&mut self, key: u64) -> Result<(), Error> {
        ExafFilter::insert(self, key)
    }

    fn lookup(&self, key: u64) -> bool {
        ExafFilter::lookup(self, key)
    }

    fn query(&mut self, key: u64) -> QueryOutcome {
        ExafFilter::query(self, key)
    }

    fn occupancy(&self) -> u64 {
        self.rsqf.occupancy()
    }

    fn nslots(&self) -> u64 {
        self.rsqf.nslots()
    }

    fn stats(&self) -> Stats {
        ExafFilter::stats(self)
    }

    fn name(&self) -> &'static str {
        match self.backing {
            ExtBacking::Coded(_) => "exaf",
            ExtBacking::Plain(_) => "uexaf",
        }
    }
}

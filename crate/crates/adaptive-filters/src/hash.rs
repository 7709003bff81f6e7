//! 128-bit keyed hashing and fingerprint slicing.
//!
//! Every filter in this crate derives all of its randomness from a single
//! 128-bit hash per key. The low `qbits` select a slot (the *quotient*); the
//! bits above it are consumed in non-overlapping `rbits`-wide chunks, one per
//! hash-selector value (TAF), or bit-by-bit as fingerprint extensions (exAF).
//! Bit 0 is the least significant bit; all slices read upward from there.
//!
//! The hash is the 128-bit MurmurHash3 (x64 variant) of the 8-byte
//! little-endian key, with the 64-bit seed as the initial state of both
//! lanes. Any well-mixing keyed 128-bit hash would do; the filters only
//! rely on the bits looking uniform and on determinism per `(key, seed)`.
//! Note the usual filter caveat: a computationally unbounded adversary who
//! can search the key space offline can defeat any public non-cryptographic
//! hash; we assume fresh queries are not engineered that way.

use crate::Error;

/// The 128-bit hash of a key. Bit 0 is least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashBits(pub u128);

/// Fingerprint geometry: quotient and remainder-chunk widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintParams {
    qbits: u32,
    rbits: u32,
}

impl FingerprintParams {
    /// `qbits` in `1..=56`, `rbits` in `1..=16`, and `qbits + rbits <= 128`.
    pub fn new(qbits: u32, rbits: u32) -> Result<Self, Error> {
        if !(1..=56).contains(&qbits) {
            return Err(Error::InvalidParams("qbits must be in 1..=56"));
        }
        if !(1..=16).contains(&rbits) {
            return Err(Error::InvalidParams("rbits must be in 1..=16"));
        }
        if qbits + rbits > 128 {
            return Err(Error::InvalidParams("qbits + rbits must not exceed 128"));
        }
        Ok(FingerprintParams { qbits, rbits })
    }

    pub fn qbits(&self) -> u32 {
        self.qbits
    }

    pub fn rbits(&self) -> u32 {
        self.rbits
    }

    /// Logical slot count, 2^qbits.
    pub fn nslots(&self) -> u64 {
        1u64 << self.qbits
    }

    /// Design false-positive probability, 2^-rbits.
    pub fn epsilon(&self) -> f64 {
        1.0 / (1u64 << self.rbits) as f64
    }
}

const C1: u64 = 0x87c3_7b91_1142_53d5;
const C2: u64 = 0x4cf5_ad43_2745_937f;

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// MurmurHash3 x64_128 of the 8-byte key, seeded with `seed` in both lanes.
#[inline]
pub fn hash128(key: u64, seed: u64) -> HashBits {
    let mut h1 = seed;
    let mut h2 = seed;

    // 8-byte tail, lane 1 only.
    let mut k1 = key;
    k1 = k1.wrapping_mul(C1);
    k1 = k1.rotate_left(31);
    k1 = k1.wrapping_mul(C2);
    h1 ^= k1;

    h1 ^= 8;
    h2 ^= 8;
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 = h1.wrapping_add(h2);
    h2 = h2.wrapping_add(h1);

    HashBits(((h2 as u128) << 64) | h1 as u128)
}

/// Largest usable hash-selector value: the 128-bit hash supplies
/// `(128 - qbits) / rbits` complete remainder chunks.
pub fn max_selector(p: FingerprintParams) -> u32 {
    (128 - p.qbits) / p.rbits - 1
}

/// Slice the quotient and the `selector`-th remainder chunk out of `h`.
///
/// The quotient is bits `[0, qbits)`; remainder chunk `i` is bits
/// `[qbits + i*rbits, qbits + (i+1)*rbits)`.
pub fn fingerprint_parts(
    h: HashBits,
    p: FingerprintParams,
    selector: u32,
) -> Result<(u64, u64), Error> {
    if selector > max_selector(p) {
        return Err(Error::SelectorOutOfRange);
    }
    let quotient = (h.0 & ((1u128 << p.qbits) - 1)) as u64;
    let lo = p.qbits + selector * p.rbits;
    let remainder = ((h.0 >> lo) as u64) & ((1u64 << p.rbits) - 1);
    Ok((quotient, remainder))
}

/// Extension bits `[start, start + len)` counted from just past the base
/// remainder, i.e. hash bits `[qbits + rbits + start, ...)`. `len == 0`
/// yields 0. `len` must be at most 64.
pub fn extension_slice(
    h: HashBits,
    p: FingerprintParams,
    start: u32,
    len: u32,
) -> Result<u64, Error> {
    if len == 0 {
        return Ok(0);
    }
    if len > 64 || p.qbits as u64 + p.rbits as u64 + start as u64 + len as u64 > 128 {
        return Err(Error::HashExhausted);
    }
    let lo = p.qbits + p.rbits + start;
    let bits = (h.0 >> lo) as u64;
    Ok(if len == 64 { bits } else { bits & ((1u64 << len) - 1) })
}

/// Number of extension bits the hash can supply past the base remainder.
pub fn extension_budget(p: FingerprintParams) -> u32 {
    128 - p.qbits - p.rbits
}

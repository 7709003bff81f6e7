//! Integer-interval arithmetic coding for block sidecars.
//!
//! A block's 64 adaptivity values (hash selectors for the TAF, fingerprint
//! extensions for the exAF) are packed into one 56-bit word by arithmetic
//! coding over the integer range `[0, 2^56)` instead of the unit interval.
//! All interval updates use only shifts, adds and the exact
//! floor-multiplication identity in [`floor_mul_frac`], so encode and decode
//! are fast, branch-light and bit-reproducible.
//!
//! Encoding narrows `[low, high)` once per letter and fails with
//! [`Error::CodeOverflow`] the moment `high - low < 2`; the caller responds
//! by rebuilding the block. Decoding always emits exactly 64 letters — a
//! block has a fixed population, so no stop symbol is needed. Decoding a
//! word that was never produced by the encoder terminates but may return
//! arbitrary values; the filters only decode words they wrote.

use crate::Error;

/// Width of a block sidecar code, in bits.
pub const CODE_BITS: u32 = 56;

/// Letters per code word: one per slot in a block.
pub const BLOCK_LETTERS: usize = 64;

/// Longest fingerprint extension the exAF will store, in bits.
pub const EXTENSION_LEN_CAP: u32 = 16;

/// Probability model for hash-selector letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorModel {
    /// Hard-wired shift table tuned for epsilon = 1/256. Letter k's
    /// probability is a short sum of inverse powers of two:
    /// P(0) = 1/2 + 1/4 + 1/32, P(1) = 1/8 + 1/16 + 1/128 + 1/512,
    /// P(2) = 1/64 + 1/256, P(3) = 2^-10 + 2^-11, P(4) = 2^-14 + 2^-16,
    /// P(5) = 2^-19 + 2^-20 + 2^-23, and letter 6 takes the remaining
    /// mass. Letters above 6 are not encodable.
    Fixed256,
    /// Two-parameter geometric family: P(0) = 1 - 2^-x and
    /// P(i) = 2^-x * (1 - 2^-y) * 2^-y(i-1) for i >= 1. Any letter value
    /// is encodable while the interval still has room.
    Geometric { x: u32, y: u32 },
}

impl SelectorModel {
    /// Defaults for the geometric family when nothing better is known;
    /// both exponents are tunable per deployment.
    pub const DEFAULT_GEOMETRIC: SelectorModel = SelectorModel::Geometric { x: 2, y: 2 };

    /// Largest letter the model can represent at all, if bounded.
    pub fn max_letter(&self) -> Option<u32> {
        match self {
            SelectorModel::Fixed256 => Some(6),
            SelectorModel::Geometric { .. } => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), Error> {
        if let SelectorModel::Geometric { x, y } = self {
            if !(1..=32).contains(x) || !(1..=32).contains(y) {
                return Err(Error::InvalidParams("geometric exponents must be in 1..=32"));
            }
        }
        Ok(())
    }
}

/// Length model for fingerprint-extension letters: the empty extension has
/// probability 1 - 2^-x, and conditioned on being non-empty, length k has
/// probability (1 - 2^-y) * 2^-y(k-1). With `y = 1` the lengths split as
/// 2^-k, matching the two-level subdivision the exAF code is built around.
/// All 2^k extensions of length k share the length's interval evenly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtensionModel {
    pub x: u32,
    pub y: u32,
}

impl Default for ExtensionModel {
    fn default() -> Self {
        ExtensionModel { x: 2, y: 1 }
    }
}

impl ExtensionModel {
    pub(crate) fn validate(&self) -> Result<(), Error> {
        if !(1..=32).contains(&self.x) || !(1..=32).contains(&self.y) {
            return Err(Error::InvalidParams("extension exponents must be in 1..=32"));
        }
        Ok(())
    }
}

/// A variable-length fingerprint extension: `len` bits, LSB-first, in
/// `bits`. The empty extension, "0" and "00" are all distinct letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Extension {
    len: u8,
    bits: u16,
}

impl Extension {
    pub const EMPTY: Extension = Extension { len: 0, bits: 0 };

    pub fn new(len: u32, bits: u16) -> Result<Self, Error> {
        if len > EXTENSION_LEN_CAP {
            return Err(Error::ExtensionTooLong);
        }
        if len < 16 && bits >= 1 << len {
            return Err(Error::InvalidParams("extension bits wider than its length"));
        }
        Ok(Extension {
            len: len as u8,
            bits,
        })
    }

    pub fn len(&self) -> u32 {
        self.len as u32
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u16 {
        self.bits
    }
}

/// Exactly `floor(m * (2^n - 1) / 2^n)` using only shifts and masks.
///
/// Writing `m = a*2^n + b` gives `m*(2^n-1)/2^n = m - a - b/2^n`, so the
/// floor is `a*(2^n - 1) + b - [b != 0]`.
#[inline]
pub fn floor_mul_frac(m: u64, n: u32) -> u64 {
    debug_assert!((1..64).contains(&n));
    let mask = (1u64 << n) - 1;
    let b = m & mask;
    (m >> n) * mask + b - (b != 0) as u64
}

const FIXED256_SHIFTS: [&[u32]; 6] = [
    &[1, 2, 5],
    &[3, 4, 7, 9],
    &[6, 8],
    &[10, 11],
    &[14, 16],
    &[19, 20, 23],
];

/// Width of letter `k < 6` within `range`, as the table's shift sum.
#[inline]
fn fixed_width(k: usize, range: u64) -> u64 {
    FIXED256_SHIFTS[k].iter().map(|&s| range >> s).sum()
}

/// Integer width the Fixed256 model assigns letter `k` within `range`;
/// letter 6 absorbs whatever the shift sums leave over.
pub fn fixed256_letter_width(k: u32, range: u64) -> u64 {
    if k < 6 {
        fixed_width(k as usize, range)
    } else {
        assert_eq!(k, 6);
        range - (0..6).map(|j| fixed_width(j, range)).sum::<u64>()
    }
}

#[derive(Clone, Copy)]
struct Interval {
    low: u64,
    high: u64,
}

impl Interval {
    fn full(code_bits: u32) -> Self {
        Interval {
            low: 0,
            high: 1u64 << code_bits,
        }
    }

    fn range(&self) -> u64 {
        self.high - self.low
    }
}

/// Narrow `iv` by one selector letter. Fails if the letter is not
/// representable or the narrowed interval drops below width 2.
fn selector_step(iv: &mut Interval, letter: u32, model: SelectorModel) -> Result<(), Error> {
    let range = iv.range();
    let (new_low, new_high) = match model {
        SelectorModel::Fixed256 => {
            if letter > 6 {
                return Err(Error::LetterTooLarge);
            }
            let mut low = iv.low;
            for k in 0..letter as usize {
                low += fixed_width(k, range);
            }
            let high = if letter == 6 {
                iv.high
            } else {
                low + fixed_width(letter as usize, range)
            };
            (low, high)
        }
        SelectorModel::Geometric { x, y } => {
            let mut base = iv.low;
            let mut w = floor_mul_frac(range, x);
            let mut rest = range - w;
            for _ in 0..letter {
                base += w;
                w = floor_mul_frac(rest, y);
                rest -= w;
            }
            (base, base + w)
        }
    };
    if new_high - new_low < 2 {
        return Err(Error::CodeOverflow);
    }
    iv.low = new_low;
    iv.high = new_high;
    Ok(())
}

/// Decode one selector letter by increasing-value probing: test letter 0,
/// then 1, then 2, ... until the letter's subinterval contains `code`.
fn selector_unstep(iv: &mut Interval, code: u64, model: SelectorModel) -> u32 {
    let range = iv.range();
    match model {
        SelectorModel::Fixed256 => {
            let mut low = iv.low;
            for k in 0..6usize {
                let end = low + fixed_width(k, range);
                if code < end {
                    iv.low = low;
                    iv.high = end;
                    return k as u32;
                }
                low = end;
            }
            iv.low = low;
            return 6;
        }
        SelectorModel::Geometric { x, y } => {
            let mut base = iv.low;
            let mut w = floor_mul_frac(range, x);
            let mut rest = range - w;
            for letter in 0..=u8::MAX as u32 {
                if w == 0 {
                    // A valid encode never lands here; clamp and move on.
                    iv.low = base;
                    iv.high = base + 1;
                    return letter;
                }
                if code < base + w {
                    iv.low = base;
                    iv.high = base + w;
                    return letter;
                }
                base += w;
                w = floor_mul_frac(rest, y);
                rest -= w;
            }
            iv.low = base;
            iv.high = base.max(iv.low) + 1;
            u8::MAX as u32
        }
    }
}

/// Encode hash-selector values into a `code_bits`-wide word. The filters
/// always encode whole 64-letter blocks; shorter slices exist so the
/// interval machinery can be exercised at narrow widths.
pub fn encode_selector_slice(
    values: &[u8],
    model: SelectorModel,
    code_bits: u32,
) -> Result<u64, Error> {
    debug_assert!((8..=CODE_BITS).contains(&code_bits));
    model.validate()?;
    let mut iv = Interval::full(code_bits);
    for &v in values.iter() {
        selector_step(&mut iv, v as u32, model)?;
    }
    Ok(iv.low)
}

/// Decode `count` letters out of a word written by [`encode_selector_slice`].
pub fn decode_selector_slice(
    code: u64,
    count: usize,
    model: SelectorModel,
    code_bits: u32,
) -> alloc::vec::Vec<u8> {
    let code = code & ((1u64 << code_bits) - 1);
    let mut iv = Interval::full(code_bits);
    (0..count)
        .map(|_| selector_unstep(&mut iv, code, model).min(u8::MAX as u32) as u8)
        .collect()
}

/// Encode a block's 64 hash-selector values into a `code_bits`-wide word.
pub fn encode_selectors_width(
    values: &[u8; BLOCK_LETTERS],
    model: SelectorModel,
    code_bits: u32,
) -> Result<u64, Error> {
    encode_selector_slice(values, model, code_bits)
}

/// Decode a word produced by [`encode_selectors_width`] with the same model.
pub fn decode_selectors_width(
    code: u64,
    model: SelectorModel,
    code_bits: u32,
) -> [u8; BLOCK_LETTERS] {
    let code = code & ((1u64 << code_bits) - 1);
    let mut iv = Interval::full(code_bits);
    let mut out = [0u8; BLOCK_LETTERS];
    for slot in out.iter_mut() {
        *slot = selector_unstep(&mut iv, code, model).min(u8::MAX as u32) as u8;
    }
    out
}

/// Encode 64 selector values into a 56-bit sidecar word.
pub fn encode_selectors(values: &[u8; BLOCK_LETTERS], model: SelectorModel) -> Result<u64, Error> {
    encode_selectors_width(values, model, CODE_BITS)
}

/// Decode a 56-bit sidecar word back into 64 selector values.
pub fn decode_selectors(code: u64, model: SelectorModel) -> [u8; BLOCK_LETTERS] {
    decode_selectors_width(code, model, CODE_BITS)
}

/// Narrow `iv` by one extension letter: first subdivide by length, then
/// split the length's subinterval into 2^len equal pieces and take the one
/// indexed by the extension's bits (the last piece absorbs the rounding
/// remainder).
fn extension_step(iv: &mut Interval, ext: Extension, model: ExtensionModel) -> Result<(), Error> {
    let range = iv.range();
    let len = ext.len as u32;
    let w0 = floor_mul_frac(range, model.x);
    let (new_low, new_high) = if len == 0 {
        (iv.low, iv.low + w0)
    } else {
        let mut base = iv.low + w0;
        let mut rest = range - w0;
        let mut wl = floor_mul_frac(rest, model.y);
        rest -= wl;
        for _ in 1..len {
            base += wl;
            wl = floor_mul_frac(rest, model.y);
            rest -= wl;
        }
        let piece = wl >> len;
        if piece < 2 {
            return Err(Error::CodeOverflow);
        }
        let start = base + piece * ext.bits as u64;
        let end = if u64::from(ext.bits) == (1u64 << len) - 1 {
            base + wl
        } else {
            start + piece
        };
        (start, end)
    };
    if new_high - new_low < 2 {
        return Err(Error::CodeOverflow);
    }
    iv.low = new_low;
    iv.high = new_high;
    Ok(())
}

/// Decode one extension letter; inverse of [`extension_step`].
fn extension_unstep(iv: &mut Interval, code: u64, model: ExtensionModel) -> Extension {
    let range = iv.range();
    let w0 = floor_mul_frac(range, model.x);
    if code < iv.low + w0 {
        iv.high = iv.low + w0;
        return Extension::EMPTY;
    }
    let mut base = iv.low + w0;
    let mut rest = range - w0;
    let mut wl = floor_mul_frac(rest, model.y);
    rest -= wl;
    let mut len = 1u32;
    loop {
        if wl == 0 || len > EXTENSION_LEN_CAP {
            // Unreachable for codes we produced; clamp for termination.
            iv.low = base;
            iv.high = base + 1;
            return Extension {
                len: len.min(EXTENSION_LEN_CAP) as u8,
                bits: 0,
            };
        }
        if code < base + wl {
            break;
        }
        base += wl;
        wl = floor_mul_frac(rest, model.y);
        rest -= wl;
        len += 1;
    }
    let piece = wl >> len;
    if piece == 0 {
        iv.low = base;
        iv.high = base + 1;
        return Extension { len: len as u8, bits: 0 };
    }
    let last = (1u64 << len) - 1;
    let idx = ((code - base) / piece).min(last);
    let start = base + piece * idx;
    let end = if idx == last { base + wl } else { start + piece };
    iv.low = start;
    iv.high = end;
    Extension {
        len: len as u8,
        bits: idx as u16,
    }
}

/// Encode a block's 64 fingerprint extensions, generic width.
pub fn encode_extensions_width(
    exts: &[Extension; BLOCK_LETTERS],
    model: ExtensionModel,
    code_bits: u32,
) -> Result<u64, Error> {
    debug_assert!((8..=CODE_BITS).contains(&code_bits));
    model.validate()?;
    let mut iv = Interval::full(code_bits);
    for &e in exts.iter() {
        extension_step(&mut iv, e, model)?;
    }
    Ok(iv.low)
}

/// Decode a word produced by [`encode_extensions_width`].
pub fn decode_extensions_width(
    code: u64,
    model: ExtensionModel,
    code_bits: u32,
) -> [Extension; BLOCK_LETTERS] {
    let code = code & ((1u64 << code_bits) - 1);
    let mut iv = Interval::full(code_bits);
    let mut out = [Extension::EMPTY; BLOCK_LETTERS];
    for slot in out.iter_mut() {
        *slot = extension_unstep(&mut iv, code, model);
    }
    out
}

/// Encode 64 extensions into a 56-bit sidecar word.
pub fn encode_extensions(
    exts: &[Extension; BLOCK_LETTERS],
    model: ExtensionModel,
) -> Result<u64, Error> {
    encode_extensions_width(exts, model, CODE_BITS)
}

/// Decode a 56-bit sidecar word back into 64 extensions.
pub fn decode_extensions(code: u64, model: ExtensionModel) -> [Extension; BLOCK_LETTERS] {
    decode_extensions_width(code, model, CODE_BITS)
}

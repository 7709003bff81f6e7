//! Exact-rational reference coder: textbook arithmetic coding over [0, 1)
//! with `BigRational` probabilities. Used only by tests, to bound the
//! integer coder's shift-approximation loss and to confirm its
//! success/failure decisions. Deliberately independent of the integer
//! implementation: probabilities here come straight from the model
//! definitions, not from the shift tables.

use adaptive_filters::coder::{Extension, ExtensionModel, SelectorModel};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn pow2_frac(n: u32) -> BigRational {
    // 1 / 2^n
    BigRational::new(BigInt::one(), BigInt::one() << n)
}

/// Exact letter probabilities of the Fixed256 model; letter 6 is the
/// leftover mass.
pub fn fixed256_probs() -> Vec<BigRational> {
    let p0 = pow2_frac(1) + pow2_frac(2) + pow2_frac(5);
    let p1 = pow2_frac(3) + pow2_frac(4) + pow2_frac(7) + pow2_frac(9);
    let p2 = pow2_frac(6) + pow2_frac(8);
    let p3 = pow2_frac(10) + pow2_frac(11);
    let p4 = pow2_frac(14) + pow2_frac(16);
    let p5 = pow2_frac(19) + pow2_frac(20) + pow2_frac(23);
    let head = [p0, p1, p2, p3, p4, p5];
    let p6 = BigRational::one() - head.iter().cloned().sum::<BigRational>();
    let mut out = head.to_vec();
    out.push(p6);
    out
}

pub fn selector_letter_prob(model: SelectorModel, k: u32) -> BigRational {
    match model {
        SelectorModel::Fixed256 => {
            assert!(k <= 6, "Fixed256 letters stop at 6");
            fixed256_probs()[k as usize].clone()
        }
        SelectorModel::Geometric { x, y } => {
            if k == 0 {
                BigRational::one() - pow2_frac(x)
            } else {
                pow2_frac(x) * (BigRational::one() - pow2_frac(y)) * pow2_frac(y * (k - 1))
            }
        }
    }
}

/// Exact final interval of a selector block: `(low, width)` in [0, 1).
pub fn oracle_encode_selectors(values: &[u8], model: SelectorModel) -> (BigRational, BigRational) {
    let mut low = BigRational::zero();
    let mut width = BigRational::one();
    for &v in values {
        let mut cum = BigRational::zero();
        for k in 0..v as u32 {
            cum += selector_letter_prob(model, k);
        }
        low += &width * cum;
        width *= selector_letter_prob(model, v as u32);
    }
    (low, width)
}

/// Exact probability mass of one extension letter under the length model.
pub fn extension_letter_prob(model: ExtensionModel, e: Extension) -> BigRational {
    if e.is_empty() {
        BigRational::one() - pow2_frac(model.x)
    } else {
        let len_prob = pow2_frac(model.x)
            * (BigRational::one() - pow2_frac(model.y))
            * pow2_frac(model.y * (e.len() - 1));
        len_prob * pow2_frac(e.len())
    }
}

/// Cumulative mass strictly below extension letter `e` in coder order:
/// the empty letter first, then lengths ascending, then bit patterns
/// ascending within a length.
fn extension_letter_cum(model: ExtensionModel, e: Extension) -> BigRational {
    if e.is_empty() {
        return BigRational::zero();
    }
    let mut cum = BigRational::one() - pow2_frac(model.x);
    for l in 1..e.len() {
        cum += pow2_frac(model.x)
            * (BigRational::one() - pow2_frac(model.y))
            * pow2_frac(model.y * (l - 1));
    }
    let len_prob = pow2_frac(model.x)
        * (BigRational::one() - pow2_frac(model.y))
        * pow2_frac(model.y * (e.len() - 1));
    cum + len_prob * pow2_frac(e.len()) * BigRational::from(BigInt::from(e.bits()))
}

/// Exact final interval of an extension block.
pub fn oracle_encode_extensions(
    exts: &[Extension],
    model: ExtensionModel,
) -> (BigRational, BigRational) {
    let mut low = BigRational::zero();
    let mut width = BigRational::one();
    for &e in exts {
        low += &width * extension_letter_cum(model, e);
        width *= extension_letter_prob(model, e);
    }
    (low, width)
}

/// -log2(width) to about 1e-10 relative accuracy, stable for the huge
/// denominators exact 64-letter products produce.
pub fn cost_bits(width: &BigRational) -> f64 {
    assert!(width.is_positive(), "cost of an empty interval");
    log2_bigint(width.denom()) - log2_bigint(width.numer())
}

fn log2_bigint(n: &BigInt) -> f64 {
    let n = n.magnitude();
    let bits = n.bits();
    if bits <= 53 {
        n.to_f64().unwrap().log2()
    } else {
        let shift = bits - 53;
        let top: num_bigint::BigUint = n >> shift;
        top.to_f64().unwrap().log2() + shift as f64
    }
}

//! Big-integer reference values for the integration tests.
//!
//! Logarithms are computed in binary fixed point with `FRAC_BITS` fractional
//! bits from `ln x = e·ln 2 + 2·atanh((m−1)/(m+1))`, `x = m·2^e`, `m ∈ [1, 2)`.

#![allow(dead_code)]

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

pub const FRAC_BITS: u64 = 256;

/// A real number `v · 2^(−FRAC_BITS)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(pub BigInt);

impl Fixed {
    pub fn one() -> Fixed {
        Fixed(BigInt::one() << FRAC_BITS)
    }

    pub fn from_int(n: i64) -> Fixed {
        Fixed(BigInt::from(n) << FRAC_BITS)
    }

    /// Exact: every finite `f64` is a dyadic rational.
    pub fn from_f64(x: f64) -> Fixed {
        assert!(x.is_finite());
        if x == 0.0 {
            return Fixed(BigInt::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { Sign::Minus } else { Sign::Plus };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1 << 52) - 1);
        let (mantissa, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
        let m = BigInt::from_biguint(sign, BigUint::from(mantissa));
        let shift = e + FRAC_BITS as i64;
        Fixed(if shift >= 0 { m << shift as u64 } else { m >> (-shift) as u64 })
    }

    pub fn to_f64(&self) -> f64 {
        let hi = &self.0 >> (FRAC_BITS - 64);
        hi.to_f64().expect("fits") / 2f64.powi(64)
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 * &o.0) >> FRAC_BITS)
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 << FRAC_BITS) / &o.0)
    }

    pub fn mul_int(&self, n: i64) -> Fixed {
        Fixed(&self.0 * n)
    }

    pub fn div_int(&self, n: i64) -> Fixed {
        Fixed(&self.0 / n)
    }
}

/// `atanh(y)` for `|y| ≤ 1/3`.
fn atanh(y: &Fixed) -> Fixed {
    let y2 = y.mul(y);
    let mut power = y.clone();
    let mut sum = Fixed(BigInt::zero());
    let mut k = 1i64;
    while !power.0.is_zero() {
        sum = sum.add(&power.div_int(k));
        power = power.mul(&y2);
        k += 2;
    }
    sum
}

pub fn ln2() -> Fixed {
    atanh(&Fixed::one().div_int(3)).mul_int(2)
}

/// `ln x` for a positive integer.
pub fn ln_big(x: &BigUint) -> Fixed {
    assert!(!x.is_zero());
    let e = x.bits() - 1;
    let scaled = BigInt::from(x.clone());
    let m = if e <= FRAC_BITS { Fixed(scaled << (FRAC_BITS - e)) } else { Fixed(scaled >> (e - FRAC_BITS)) };
    let one = Fixed::one();
    let y = m.sub(&one).div(&m.add(&one));
    ln2().mul_int(e as i64).add(&atanh(&y).mul_int(2))
}

/// `ln(a/b)` for positive integers.
pub fn ln_ratio(a: &BigUint, b: &BigUint) -> Fixed {
    ln_big(a).sub(&ln_big(b))
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `ln(n!)` in fixed point.
pub fn ln_factorial(n: u64) -> Fixed {
    if n < 2 {
        return Fixed(BigInt::zero());
    }
    ln_big(&factorial(n))
}

/// `Σ_{r=1}^{k} C(k,r) C(Δ−1,r−1) 2^r` exactly.
pub fn lemma_sum(k: u64, delta: u64) -> BigUint {
    (1..=k.min(delta)).map(|r| binomial(k, r) * binomial(delta - 1, r - 1) * (BigUint::one() << r)).sum()
}

/// `ln(1 − x)` for a rational `x = p/q ∈ (0, 1)` via the
/// `atanh` form `ln(1 − x) = −2 atanh(x/(2 − x))`.
pub fn ln_one_minus(p: i64, q: i64) -> Fixed {
    let x = Fixed::from_int(p).div_int(q);
    let y = x.div(&Fixed::from_int(2).sub(&x));
    Fixed(BigInt::zero()).sub(&atanh_any(&y).mul_int(2))
}

/// `atanh(y)` for `|y| < 1`, by halving the argument until it is small.
fn atanh_any(y: &Fixed) -> Fixed {
    let third = Fixed::one().div_int(3);
    if y.0.magnitude() <= third.0.magnitude() {
        return atanh(y);
    }
    // atanh(y) = 2 atanh(y / (1 + √(1 − y²)))
    let one = Fixed::one();
    let inner = one.sub(&y.mul(y));
    let root = Fixed((&inner.0 << FRAC_BITS).sqrt());
    atanh_any(&y.div(&one.add(&root))).mul_int(2)
}

//! Prime-field arithmetic and exact rational accounting.
//!
//! All protocol arithmetic happens in a prime field `F_q`; all rate
//! accounting happens in arbitrary-precision rationals. Floating point
//! is deliberately absent from this crate.

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic primality test for `u64` (trial division).
///
/// The moduli used in this laboratory are tiny, so the simplest correct
/// test wins.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.checked_mul(d).is_some_and(|dd| dd <= n) {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A prime field `F_q`, used as an explicit context for arithmetic on
/// raw `u64` residues.
///
/// Elements are residues in `[0, q)`. Operations never overflow: products
/// are formed in `u128` before reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    /// Creates the field `F_q`. Rejects composite (and trivial) moduli.
    pub fn new(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(PrimeField { q })
    }

    /// The field modulus.
    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Checks that `a` is a canonical residue of this field.
    #[inline]
    pub fn check(&self, a: u64) -> Result<u64> {
        if a < self.q {
            Ok(a)
        } else {
            Err(Error::OutOfRange { value: a, q: self.q })
        }
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.q
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    /// Exponentiation by squaring.
    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        debug_assert!(base < self.q);
        let mut acc = 1u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    ///
    /// Errors on zero rather than panicking: inversion of zero is always
    /// a caller bug worth surfacing with context.
    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::Singular("inverse of zero".into()));
        }
        debug_assert!(a < self.q);
        Ok(self.pow(a, self.q - 2))
    }

    /// `a / b`.
    #[inline]
    pub fn div(&self, a: u64, b: u64) -> Result<u64> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Embeds a signed unit (`+1` / `-1`) into the field. In `F_2` the
    /// two coincide, which is exactly the behaviour the scheme relies on.
    #[inline]
    pub fn unit(&self, sign: i8) -> u64 {
        debug_assert!(sign == 1 || sign == -1);
        if sign == 1 {
            1
        } else {
            self.q - 1
        }
    }
}

/// A field element carrying its own context, for callers that want the
/// arithmetic checked end to end rather than context-passing on raw
/// residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldElement {
    value: u64,
    q: u64,
}

impl FieldElement {
    /// Wraps a canonical residue of `field`.
    pub fn new(field: &PrimeField, value: u64) -> Result<Self> {
        field.check(value)?;
        Ok(FieldElement { value, q: field.q() })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    fn ctx(&self, other: &FieldElement) -> Result<PrimeField> {
        if self.q != other.q {
            return Err(Error::FieldMismatch(self.q, other.q));
        }
        PrimeField::new(self.q)
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        let f = self.ctx(other)?;
        Ok(FieldElement { value: f.add(self.value, other.value), q: self.q })
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        let f = self.ctx(other)?;
        Ok(FieldElement { value: f.sub(self.value, other.value), q: self.q })
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        let f = self.ctx(other)?;
        Ok(FieldElement { value: f.mul(self.value, other.value), q: self.q })
    }

    pub fn inv(&self) -> Result<FieldElement> {
        let f = PrimeField::new(self.q)?;
        Ok(FieldElement { value: f.inv(self.value)?, q: self.q })
    }
}

/// Exact rational with arbitrary precision, re-exported for rate
/// accounting. `BigRational` keeps denominators positive and fractions
/// reduced, which is exactly the normal form the reports require.
pub type Rational = BigRational;

/// Builds a reduced rational from an integer pair.
pub fn ratio(num: i128, den: i128) -> Rational {
    use num::BigInt;
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders a rational as `"num/den"` (or just `"num"` for integers),
/// the form used in JSON reports.
pub fn ratio_string(r: &Rational) -> String {
    if r.denom() == &num::BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_small_table() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
    }

    #[test]
    fn constructor_rejects_composites() {
        for q in [0u64, 1, 4, 6, 9, 15, 21, 1024] {
            assert!(matches!(PrimeField::new(q), Err(Error::NotPrime(_))));
        }
        for q in [2u64, 3, 5, 7, 11, 101] {
            assert!(PrimeField::new(q).is_ok());
        }
    }

    /// Exhaustive field-axiom check over small fields: commutativity,
    /// associativity, distributivity, identities, inverses.
    #[test]
    fn field_axioms_exhaustive() {
        for q in [2u64, 3, 5, 7] {
            let f = PrimeField::new(q).unwrap();
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!(f.add(a, f.neg(a)), 0);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
                }
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    assert_eq!(f.sub(a, b), f.add(a, f.neg(b)));
                    for c in 0..q {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn wraparound_product() {
        let f = PrimeField::new(7).unwrap();
        assert_eq!(f.mul(4, 2), 1); // 8 mod 7
        assert_eq!(f.pow(3, 6), 1); // Fermat
    }

    /// Inverses against a brute-force table for F_11.
    #[test]
    fn inverse_brute_force_f11() {
        let f = PrimeField::new(11).unwrap();
        for a in 1..11u64 {
            let brute = (1..11u64).find(|&b| f.mul(a, b) == 1).unwrap();
            assert_eq!(f.inv(a).unwrap(), brute);
        }
    }

    #[test]
    fn signed_units() {
        let f2 = PrimeField::new(2).unwrap();
        assert_eq!(f2.unit(1), f2.unit(-1)); // +1 == -1 in F_2
        let f5 = PrimeField::new(5).unwrap();
        assert_eq!(f5.unit(-1), 4);
    }

    #[test]
    fn checked_elements_reject_mixed_fields() {
        let f2 = PrimeField::new(2).unwrap();
        let f3 = PrimeField::new(3).unwrap();
        let a = FieldElement::new(&f2, 1).unwrap();
        let b = FieldElement::new(&f3, 2).unwrap();
        assert!(matches!(a.add(&b), Err(Error::FieldMismatch(2, 3))));
        assert!(FieldElement::new(&f2, 2).is_err());
        let c = FieldElement::new(&f3, 2).unwrap();
        assert_eq!(b.mul(&c).unwrap().value(), 1);
        assert_eq!(c.inv().unwrap().value(), 2);
    }

    #[test]
    fn rational_normal_form() {
        let r = ratio(6, -4);
        assert_eq!(ratio_string(&r), "-3/2");
        let one = ratio(5, 5);
        assert_eq!(ratio_string(&one), "1");
        assert!(ratio(2, 4) == ratio(1, 2));
    }
}

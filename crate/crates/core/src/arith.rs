//! Exact integer and rational primitives.
//!
//! Parameters of the digit-set family (N, L, m, p) are `u64`; anything that
//! can outgrow that (powers of p, rational frequencies) is a bignum.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Prime factorization as `(prime, exponent)` pairs with strictly increasing primes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(q, _)| q)
    }

    /// Exponent of `q` in the factored integer (0 when absent).
    pub fn exponent_of(&self, q: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(r, _)| r == q)
            .map_or(0, |&(_, e)| e)
    }

    pub fn reconstruct(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, &(q, e)| acc * BigUint::from(q).pow(e))
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }
}

// Increments of the mod-30 wheel starting at 7: 7, 11, 13, 17, 19, 23, 29, 31, 37, ...
const WHEEL: [u64; 8] = [4, 2, 4, 2, 4, 6, 2, 6];

/// Trial division with a 2-3-5 wheel.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(invalid("n", "cannot factor 0"));
    }
    let mut factors = Vec::new();
    let mut rest = n;
    for q in [2u64, 3, 5] {
        let e = strip(&mut rest, q);
        if e > 0 {
            factors.push((q, e));
        }
    }
    let mut q = 7u64;
    let mut w = 0;
    while q.checked_mul(q).is_some_and(|qq| qq <= rest) {
        let e = strip(&mut rest, q);
        if e > 0 {
            factors.push((q, e));
        }
        q += WHEEL[w];
        w = (w + 1) % WHEEL.len();
    }
    if rest > 1 {
        factors.push((rest, 1));
    }
    Ok(Factorization { factors })
}

fn strip(n: &mut u64, q: u64) -> u32 {
    let mut e = 0;
    while (*n).is_multiple_of(q) {
        *n /= q;
        e += 1;
    }
    e
}

pub fn is_prime(q: u64) -> bool {
    match q {
        0 | 1 => false,
        2 | 3 => true,
        _ if q.is_multiple_of(2) || q.is_multiple_of(3) => false,
        _ => {
            let mut i = 5u64;
            while i.checked_mul(i).is_some_and(|ii| ii <= q) {
                if q.is_multiple_of(i) || q.is_multiple_of(i + 2) {
                    return false;
                }
                i += 6;
            }
            true
        }
    }
}

/// Largest `e` with `q^e | n`.
pub fn valuation(n: u64, q: u64) -> Result<u32> {
    if n == 0 {
        return Err(invalid("n", "valuation of 0 is unbounded"));
    }
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let mut n = n;
    Ok(strip(&mut n, q))
}

/// True iff every prime factor of `a` divides `b`.
pub fn radical_divides(a: u64, b: u64) -> bool {
    // Repeatedly remove gcd(a, b) from a; what remains is coprime to b.
    let mut a = a;
    loop {
        if a == 1 {
            return true;
        }
        let g = a.gcd(&b);
        if g == 1 {
            return false;
        }
        while a.is_multiple_of(g) {
            a /= g;
        }
    }
}

/// The part of `n` coprime to every prime in `primes`.
pub fn coprime_part(n: u64, primes: impl IntoIterator<Item = u64>) -> u64 {
    let mut n = n;
    for q in primes {
        strip(&mut n, q);
    }
    n
}

/// Exact rational in lowest terms with positive denominator.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self> {
        let denom = denom.into();
        if denom.is_zero() {
            return Err(invalid("denominator", "must be nonzero"));
        }
        Ok(Rational(BigRational::new(numer.into(), denom)))
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    /// Always positive.
    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Fractional part in `[0, 1)` as a float, reduced exactly before conversion.
    pub fn frac_f64(&self) -> f64 {
        let r = self.numer().mod_floor(self.denom());
        ratio_to_f64(&r, self.denom())
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }
}

/// `a / b` for nonnegative `a < b` without losing precision on huge operands.
pub(crate) fn ratio_to_f64(a: &BigInt, b: &BigInt) -> f64 {
    match (a.to_f64(), b.to_f64()) {
        (Some(x), Some(y)) if y.is_finite() && x.is_finite() => x / y,
        _ => {
            let shift = b.bits().saturating_sub(60);
            let a = a >> shift;
            let b = b >> shift;
            a.to_f64().unwrap_or(0.0) / b.to_f64().unwrap_or(1.0)
        }
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `a/b` or a bare integer `a`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParseRational(s.to_string());
        let t = s.trim();
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rational(BigRational::new(n, d)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&Rational> for &Rational {
            type Output = Rational;
            fn $m(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$m(&rhs.0))
            }
        }
        impl $tr for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational(self.0.$m(rhs.0))
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: &Rational) -> Rational {
                Rational(self.0.$m(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Mul<&BigInt> for &Rational {
    type Output = Rational;
    fn mul(self, rhs: &BigInt) -> Rational {
        Rational(&self.0 * BigRational::from_integer(rhs.clone()))
    }
}

/// Compares `|r|` against an integer without leaving exact arithmetic.
pub(crate) fn abs_cmp_int(r: &Rational, k: &BigInt) -> Ordering {
    (r.numer().abs()).cmp(&(k * r.denom()))
}

/// Serde adapter writing big unsigned integers as decimal strings.
pub(crate) mod biguint_str {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division_oracle(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut q = 2;
        while n > 1 {
            let mut e = 0;
            while n.is_multiple_of(q) {
                n /= q;
                e += 1;
            }
            if e > 0 {
                out.push((q, e));
            }
            q += 1;
        }
        out
    }

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(4).unwrap().factors(), &[(2, 2)]);
        assert_eq!(trial_division_oracle(144), vec![(2, 4), (3, 2)]);
        assert_eq!(factorize(144).unwrap().factors(), &[(2, 4), (3, 2)]);
        assert!(factorize(1).unwrap().is_empty());
        assert!(factorize(0).is_err());
        assert_eq!(factorize(999_999_937).unwrap().factors(), &[(999_999_937, 1)]);
        assert_eq!(
            factorize(2 * 3 * 5 * 7 * 11 * 13 * 49).unwrap().factors(),
            &[(2, 1), (3, 1), (5, 1), (7, 3), (11, 1), (13, 1)]
        );
    }

    #[test]
    fn factorize_reconstructs_up_to_a_million() {
        for n in 1..=1_000_000u64 {
            let f = factorize(n).unwrap();
            assert_eq!(f.reconstruct(), BigUint::from(n), "n = {n}");
        }
    }

    #[test]
    fn factorize_matches_oracle_on_small_range() {
        for n in 1..=5000u64 {
            assert_eq!(factorize(n).unwrap().factors(), trial_division_oracle(n).as_slice());
        }
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(8, 2).unwrap(), 3);
        assert_eq!(valuation(144, 3).unwrap(), 2);
        assert_eq!(valuation(5, 2).unwrap(), 0);
        assert_eq!(valuation(12, 4), Err(Error::NotPrime(4)));
        assert!(valuation(0, 2).is_err());
    }

    #[test]
    fn radical_divides_examples() {
        assert!(radical_divides(4, 6));
        assert!(!radical_divides(6, 4));
        assert!(radical_divides(1, 7));
        assert!(radical_divides(72, 6));
        assert!(!radical_divides(10, 4));
    }

    #[test]
    fn rational_parse_and_print() {
        let r: Rational = "6/-8".parse().unwrap();
        assert_eq!(r.to_string(), "-3/4");
        assert_eq!("5".parse::<Rational>().unwrap().to_string(), "5/1");
        assert!("1/0".parse::<Rational>().is_err());
        assert!("x/2".parse::<Rational>().is_err());
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, "\"-3/4\"");
        assert_eq!(serde_json::from_str::<Rational>(&j).unwrap(), r);
    }

    #[test]
    fn frac_is_exact_for_huge_values() {
        let big = BigInt::from(10u64).pow(40);
        let r = Rational::new(big * 4 + 1, 4).unwrap();
        assert_eq!(r.frac_f64(), 0.25);
        let neg: Rational = "-1/4".parse().unwrap();
        assert_eq!(neg.frac_f64(), 0.75);
    }

    proptest! {
        #[test]
        fn valuation_is_additive(n in 1u64..=10_000, k in 0u32..=10, qi in 0usize..4) {
            let q = [2u64, 3, 5, 7][qi];
            let scaled = n * q.pow(k);
            prop_assert_eq!(valuation(scaled, q).unwrap(), valuation(n, q).unwrap() + k);
        }

        #[test]
        fn rational_is_canonical(a in -100_000i64..100_000, b in -100_000i64..100_000) {
            prop_assume!(b != 0);
            let r = Rational::new(a, b).unwrap();
            prop_assert!(r.denom() > &BigInt::zero());
            prop_assert!(r.numer().gcd(r.denom()).is_one());
            let back: Rational = r.to_string().parse().unwrap();
            prop_assert_eq!(back, r);
        }
    }
}

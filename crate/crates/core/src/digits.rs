//! Digit sets, mask polynomials and their zero sets.
//!
//! Zero sets are kept symbolic: a union of sets `scale * (Z \ modulus Z)`,
//! so membership of a rational frequency is decided with integer arithmetic
//! only. The floating mask evaluators exist for the numeric cross-checks.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{abs_cmp_int, ratio_to_f64, Rational};
use crate::error::{invalid, Error, Result};

/// `D = {0..N-1} + m * {0..L-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductDigitSet {
    #[serde(rename = "N")]
    n: u64,
    m: u64,
    #[serde(rename = "L")]
    l: u64,
}

impl ProductDigitSet {
    pub fn new(n: u64, m: u64, l: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("N", "must be at least 2"));
        }
        if l < 2 {
            return Err(invalid("L", "must be at least 2"));
        }
        if m < 1 {
            return Err(invalid("m", "must be at least 1"));
        }
        let max = (n - 1)
            .checked_add(m.checked_mul(l - 1).ok_or(Error::Overflow("max digit"))?)
            .ok_or(Error::Overflow("max digit"))?;
        if max > i64::MAX as u64 {
            return Err(Error::Overflow("max digit"));
        }
        Ok(ProductDigitSet { n, m, l })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn cardinality(&self) -> u64 {
        self.n * self.l
    }

    pub fn max_digit(&self) -> u64 {
        self.n - 1 + self.m * (self.l - 1)
    }

    /// Sorted distinct digits and whether all `N*L` sums were distinct.
    pub fn enumerate(&self) -> (GenericDigitSet, bool) {
        let mut digits: Vec<i64> = (0..self.l)
            .flat_map(|j| (0..self.n).map(move |i| (i + self.m * j) as i64))
            .collect();
        digits.sort_unstable();
        digits.dedup();
        let direct = digits.len() as u64 == self.cardinality();
        (GenericDigitSet { digits }, direct)
    }

    /// Direct exactly when `m >= N`; otherwise the digit `m` appears twice.
    pub fn is_direct(&self) -> bool {
        self.m >= self.n
    }

    fn require_direct(&self) -> Result<()> {
        if self.is_direct() {
            Ok(())
        } else {
            Err(Error::NotDirect {
                n: self.n,
                m: self.m,
                l: self.l,
            })
        }
    }

    /// Closed-form mask `m_D(x) = m_{D_N}(x) * m_{D_L}(m x)`; `t` is `x mod 1`
    /// and `tm` is `m x mod 1`, both reduced by the caller.
    pub fn mask_from_phases(&self, t: f64, tm: f64) -> Complex64 {
        consecutive_mask(self.n, t) * consecutive_mask(self.l, tm)
    }

    pub fn mask_eval(&self, x: f64) -> Complex64 {
        let t = x.rem_euclid(1.0);
        let tm = (self.m as f64 * t).rem_euclid(1.0);
        self.mask_from_phases(t, tm)
    }
}

/// `(1/n) sum_{j<n} e^{2 pi i j t}` for a phase `t` already reduced mod 1.
pub fn consecutive_mask(n: u64, t: f64) -> Complex64 {
    // Work on (-1/2, 1/2] so sin(pi t) keeps full relative precision.
    let t = if t > 0.5 { t - 1.0 } else { t };
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let nt = (n as f64 * t) % 2.0;
    let amp = (PI * nt).sin() / (n as f64 * (PI * t).sin());
    let phase = PI * ((n - 1) as f64 * t).rem_euclid(2.0);
    Complex64::from_polar(amp, phase)
}

/// A finite set of distinct integers, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct GenericDigitSet {
    digits: Vec<i64>,
}

impl GenericDigitSet {
    pub fn new(digits: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut digits: Vec<i64> = digits.into_iter().collect();
        if digits.is_empty() {
            return Err(invalid("digits", "digit set is empty"));
        }
        let len = digits.len();
        digits.sort_unstable();
        digits.dedup();
        if digits.len() != len {
            return Err(invalid("digits", "digits must be distinct"));
        }
        Ok(GenericDigitSet { digits })
    }

    pub fn digits(&self) -> &[i64] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn contains(&self, d: i64) -> bool {
        self.digits.binary_search(&d).is_ok()
    }

    pub fn max_abs(&self) -> u64 {
        self.digits.iter().map(|d| d.unsigned_abs()).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<i64>> for GenericDigitSet {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        GenericDigitSet::new(v)
    }
}

impl From<GenericDigitSet> for Vec<i64> {
    fn from(d: GenericDigitSet) -> Vec<i64> {
        d.digits
    }
}

/// `(1/#B) sum_{b in B} e^{2 pi i b x}`.
pub fn mask_eval(b: &GenericDigitSet, x: f64) -> Complex64 {
    let sum: Complex64 = b
        .digits
        .iter()
        .map(|&d| Complex64::from_polar(1.0, 2.0 * PI * (d as f64 * x).rem_euclid(1.0)))
        .sum();
    sum / b.len() as f64
}

/// Mask at a rational point; each phase `d * xi mod 1` is reduced exactly.
pub fn mask_eval_rational(b: &GenericDigitSet, xi: &Rational) -> Complex64 {
    let den = xi.denom();
    let sum: Complex64 = b
        .digits
        .iter()
        .map(|&d| {
            let r = (xi.numer() * d).mod_floor(den);
            Complex64::from_polar(1.0, 2.0 * PI * ratio_to_f64(&r, den))
        })
        .sum();
    sum / b.len() as f64
}

/// The set `scale * (Z \ modulus Z)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeComponent {
    pub scale: Rational,
    pub modulus: u64,
}

impl LatticeComponent {
    pub fn new(scale: Rational, modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(invalid("modulus", "must be at least 2"));
        }
        if scale.is_zero() {
            return Err(invalid("scale", "must be nonzero"));
        }
        Ok(LatticeComponent { scale, modulus })
    }

    pub fn contains(&self, xi: &Rational) -> bool {
        let q = xi / &self.scale;
        q.is_integer() && !q.numer().is_multiple_of(&BigInt::from(self.modulus))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledLatticeUnion {
    pub components: Vec<LatticeComponent>,
}

impl ScaledLatticeUnion {
    /// Index of the first component containing `xi`.
    pub fn find(&self, xi: &Rational) -> Option<usize> {
        self.components.iter().position(|c| c.contains(xi))
    }

    pub fn contains(&self, xi: &Rational) -> bool {
        self.find(xi).is_some()
    }

    /// Largest `|xi / scale|` over components; nonzero members need `|xi/scale| >= 1`.
    fn reach(&self, xi: &Rational) -> Rational {
        self.components
            .iter()
            .map(|c| (xi / &c.scale).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

pub fn lattice_member(s: &ScaledLatticeUnion, xi: &Rational) -> bool {
    s.contains(xi)
}

/// `Z(m_D) = (Z \ NZ)/N  ∪  (Z \ LZ)/(Lm)` for a direct product digit set.
pub fn zero_set(d: &ProductDigitSet) -> Result<ScaledLatticeUnion> {
    d.require_direct()?;
    Ok(ScaledLatticeUnion {
        components: vec![
            LatticeComponent::new(Rational::new(1, d.n)?, d.n)?,
            LatticeComponent::new(Rational::new(1, d.l * d.m)?, d.l)?,
        ],
    })
}

/// Where a frequency sits in `Z(mu_hat) = ∪_{n>=1} p^n Z(m_D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroLocation {
    /// Smallest `n >= 1` with `xi / p^n` in `Z(m_D)`.
    pub level: u32,
    /// 0 for the `D_N` factor, 1 for the `m D_L` factor.
    pub component: usize,
}

/// Exact search for the smallest level at which `xi` hits a zero of the mask.
pub fn mu_hat_zero_location(
    p: u64,
    d: &ProductDigitSet,
    xi: &Rational,
) -> Result<Option<ZeroLocation>> {
    if p < 2 {
        return Err(invalid("p", "must be at least 2"));
    }
    let zs = zero_set(d)?;
    if xi.is_zero() {
        return Ok(None);
    }
    let reach = zs.reach(xi);
    let pb = BigInt::from(p);
    let mut pn = pb.clone();
    let mut level = 1u32;
    // xi / (p^n * scale) must be a nonzero integer, so p^n <= |xi / scale|.
    while abs_cmp_int(&reach, &pn).is_ge() {
        let scaled = Rational::from(xi.as_big() / num_rational::BigRational::from_integer(pn.clone()));
        if let Some(component) = zs.find(&scaled) {
            return Ok(Some(ZeroLocation { level, component }));
        }
        pn *= &pb;
        level += 1;
    }
    Ok(None)
}

pub fn mu_hat_zero_member(p: u64, d: &ProductDigitSet, xi: &Rational) -> Result<bool> {
    Ok(mu_hat_zero_location(p, d, xi)?.is_some())
}

/// Integer-only zero test for frequencies `c / den` sharing one denominator.
///
/// Used for bulk pair checks; every method returns `None` when an
/// intermediate value leaves `i128`, and callers fall back to
/// [`mu_hat_zero_member`].
#[derive(Debug, Clone)]
pub struct ZeroTester {
    p: i128,
    n: i128,
    lm: i128,
    l: i128,
    den: i128,
}

impl ZeroTester {
    pub fn new(p: u64, d: &ProductDigitSet, den: &BigInt) -> Result<Option<Self>> {
        if p < 2 {
            return Err(invalid("p", "must be at least 2"));
        }
        d.require_direct()?;
        if !den.is_positive() {
            return Err(invalid("den", "must be positive"));
        }
        let lm = (d.l as i128).checked_mul(d.m as i128);
        Ok(match (den.to_i128(), lm) {
            (Some(den), Some(lm)) => Some(ZeroTester {
                p: p as i128,
                n: d.n as i128,
                lm,
                l: d.l as i128,
                den,
            }),
            _ => None,
        })
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    /// Whether `c / den` is a zero of `mu_hat`.
    pub fn is_zero(&self, c: i128) -> Option<bool> {
        if c == 0 {
            return Some(false);
        }
        Some(
            self.component_hit(c.checked_mul(self.n)?, self.n)
                || self.component_hit(c.checked_mul(self.lm)?, self.l),
        )
    }

    // Some n >= 1 with x / (den p^n) an integer not divisible by `modulus`.
    fn component_hit(&self, x: i128, modulus: i128) -> bool {
        let ax = x.unsigned_abs();
        let mut y = match self.den.checked_mul(self.p) {
            Some(y) => y,
            None => return false,
        };
        while y.unsigned_abs() <= ax {
            if x % y == 0 && (x / y) % modulus != 0 {
                return true;
            }
            y = match y.checked_mul(self.p) {
                Some(y) => y,
                None => return false,
            };
        }
        false
    }
}

/// Decides `(Z \ n1 Z) s1/n1 ⊆ (Z \ n2 Z) s2/n2`.
///
/// The ratio `q = s1 n2 / (s2 n1)` must be an integer (take `a = 1`), and then
/// `q a mod n2` only depends on `a mod n1 n2`.
pub fn component_zero_inclusion(n1: u64, s1: &Rational, n2: u64, s2: &Rational) -> Result<bool> {
    if n1 < 2 || n2 < 2 {
        return Err(invalid("modulus", "must be at least 2"));
    }
    if s1.is_zero() || s2.is_zero() {
        return Err(invalid("scale", "must be nonzero"));
    }
    let q = &(s1 * &BigInt::from(n2)) / &(s2 * &BigInt::from(n1));
    if !q.is_integer() {
        return Ok(false);
    }
    let n2b = BigInt::from(n2);
    let q = q.numer().mod_floor(&n2b);
    let period = n1.checked_mul(n2).ok_or(Error::Overflow("n1 * n2"))?;
    for a in (1..period).filter(|a| a % n1 != 0) {
        if (&q * BigInt::from(a)).mod_floor(&n2b).is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `Z(delta_{c D_n})` rescaled by `p^k`: the set `p^k (Z \ nZ) / (c n)` written as
/// `(Z \ nZ) * s / n` with `s = p^k / c`.
pub fn scaled_consecutive_zeros(p: u64, k: u32, c: u64, n: u64) -> Result<(u64, Rational)> {
    if c == 0 {
        return Err(invalid("c", "must be nonzero"));
    }
    Ok((n, Rational::new(BigInt::from(p).pow(k), c)?))
}

impl std::fmt::Display for ScaledLatticeUnion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| format!("{}*(Z\\{}Z)", c.scale, c.modulus))
            .collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn enumerate_examples() {
        let (d, direct) = ProductDigitSet::new(2, 8, 2).unwrap().enumerate();
        assert_eq!(d.digits(), &[0, 1, 8, 9]);
        assert!(direct);
        let (d, direct) = ProductDigitSet::new(2, 1, 2).unwrap().enumerate();
        assert_eq!(d.digits(), &[0, 1, 2]);
        assert!(!direct);
        let (d, direct) = ProductDigitSet::new(2, 3, 2).unwrap().enumerate();
        assert_eq!(d.digits(), &[0, 1, 3, 4]);
        assert!(direct);
    }

    #[test]
    fn directness_matches_m_at_least_n() {
        for n in 2..8 {
            for l in 2..8 {
                for m in 1..20 {
                    let d = ProductDigitSet::new(n, m, l).unwrap();
                    assert_eq!(d.enumerate().1, d.is_direct(), "N={n} L={l} m={m}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProductDigitSet::new(1, 3, 2).is_err());
        assert!(ProductDigitSet::new(2, 0, 2).is_err());
        assert!(ProductDigitSet::new(2, 3, 1).is_err());
        assert!(GenericDigitSet::new([]).is_err());
        assert!(GenericDigitSet::new([0, 1, 1]).is_err());
    }

    #[test]
    fn mask_examples() {
        let b = GenericDigitSet::new([0, 1, 8, 9]).unwrap();
        assert!(mask_eval(&b, 0.5).norm() < 1e-15);
        assert!((mask_eval(&b, 0.0) - 1.0).norm() < 1e-15);
        assert!((mask_eval(&b, 3.0) - 1.0).norm() < 1e-12);
        let b2 = GenericDigitSet::new([0, 2]).unwrap();
        assert!(mask_eval(&b2, 0.25).norm() < 1e-15);
        assert!(mask_eval_rational(&b2, &r("1/4")).norm() < 1e-15);
    }

    #[test]
    fn closed_form_mask_matches_direct_sum() {
        for (n, m, l) in [(2, 8, 2), (3, 9, 3), (12, 12, 4), (5, 7, 3), (7, 7, 2)] {
            let d = ProductDigitSet::new(n, m, l).unwrap();
            let g = d.enumerate().0;
            for i in 0..400 {
                let x = -3.0 + i as f64 * 0.0173;
                let diff = (d.mask_eval(x) - mask_eval(&g, x)).norm();
                assert!(diff < 1e-12, "({n},{m},{l}) x={x} diff={diff}");
            }
            // close to the integers, where the closed form divides small sines
            for x in [1e-9, 1.0 - 1e-9, 2.0 + 1e-13, 0.5] {
                assert!((d.mask_eval(x) - mask_eval(&g, x)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_set_examples() {
        let z = zero_set(&ProductDigitSet::new(2, 8, 2).unwrap()).unwrap();
        assert_eq!(z.components[0], LatticeComponent::new(r("1/2"), 2).unwrap());
        assert_eq!(z.components[1], LatticeComponent::new(r("1/16"), 2).unwrap());
        let z = zero_set(&ProductDigitSet::new(2, 3, 2).unwrap()).unwrap();
        assert_eq!(z.components[1].scale, r("1/6"));
        let z = zero_set(&ProductDigitSet::new(3, 9, 3).unwrap()).unwrap();
        assert_eq!((z.components[0].scale.clone(), z.components[0].modulus), (r("1/3"), 3));
        assert_eq!((z.components[1].scale.clone(), z.components[1].modulus), (r("1/27"), 3));
        assert!(matches!(
            zero_set(&ProductDigitSet::new(2, 1, 2).unwrap()),
            Err(Error::NotDirect { .. })
        ));
    }

    #[test]
    fn lattice_member_examples() {
        let half = ScaledLatticeUnion {
            components: vec![LatticeComponent::new(r("1/2"), 2).unwrap()],
        };
        assert!(lattice_member(&half, &r("1/2")));
        assert!(!lattice_member(&half, &r("1")));
        let sixteenth = ScaledLatticeUnion {
            components: vec![LatticeComponent::new(r("1/16"), 2).unwrap()],
        };
        assert!(lattice_member(&sixteenth, &r("3/16")));
        assert!(!lattice_member(&sixteenth, &r("1/32")));
    }

    #[test]
    fn mu_hat_zero_examples() {
        let d = ProductDigitSet::new(2, 8, 2).unwrap();
        assert!(mu_hat_zero_member(4, &d, &r("1/4")).unwrap());
        assert!(!mu_hat_zero_member(4, &d, &r("0")).unwrap());
        assert_eq!(
            mu_hat_zero_location(4, &d, &r("2")).unwrap(),
            Some(ZeroLocation { level: 1, component: 0 })
        );
        assert!(!mu_hat_zero_member(4, &d, &r("1/3")).unwrap());
        // every nonzero integer is a zero for this tile
        for k in 1..200 {
            assert!(mu_hat_zero_member(4, &d, &Rational::from(k)).unwrap());
            assert!(mu_hat_zero_member(4, &d, &Rational::from(-k)).unwrap());
        }
    }

    #[test]
    fn zero_tester_agrees_with_exact_search() {
        for (n, m, l, p) in [(2, 8, 2, 4), (2, 3, 2, 4), (12, 12, 4, 144), (3, 9, 3, 27), (2, 8, 2, 12)] {
            let d = ProductDigitSet::new(n, m, l).unwrap();
            for den in [1i64, 4, 12, 48, 7] {
                let t = ZeroTester::new(p, &d, &BigInt::from(den)).unwrap().unwrap();
                for c in -600i128..600 {
                    let exact = mu_hat_zero_member(p, &d, &Rational::new(c as i64, den).unwrap()).unwrap();
                    assert_eq!(t.is_zero(c), Some(exact), "D=({n},{m},{l}) p={p} {c}/{den}");
                }
            }
        }
    }

    fn inclusion_brute_force(n1: u64, s1: &Rational, n2: u64, s2: &Rational, bound: i64) -> bool {
        let right = LatticeComponent::new(s2 / &Rational::from(n2 as i64), n2).unwrap();
        (-bound..=bound)
            .filter(|a| a % n1 as i64 != 0)
            .all(|a| right.contains(&(&Rational::from(a) * &(s1 / &Rational::from(n1 as i64)))))
    }

    #[test]
    fn inclusion_examples() {
        let one = Rational::one();
        assert!(component_zero_inclusion(3, &one, 3, &one).unwrap());
        assert!(!component_zero_inclusion(2, &one, 3, &one).unwrap());
        // Z(delta_{p^-2 g D_{N'}}) ⊆ Z(delta_{p^-1 D_N}) with N=12, p=72 style data: g = gcd(N, p)
        let (n, p) = (8u64, 12u64);
        let g = n.gcd(&p);
        let s1 = Rational::new(p * p, g).unwrap();
        let s2 = Rational::from(p as i64);
        assert!(component_zero_inclusion(n / g, &s1, n, &s2).unwrap());
        assert!(inclusion_brute_force(n / g, &s1, n, &s2, 1000));
    }

    #[test]
    fn inclusion_matches_brute_force_grid() {
        let scales = ["1", "1/2", "3", "2/3", "6", "1/6", "4"];
        for n1 in 2..=12u64 {
            for n2 in 2..=12u64 {
                for a in scales {
                    for b in scales {
                        let (s1, s2) = (r(a), r(b));
                        let fast = component_zero_inclusion(n1, &s1, n2, &s2).unwrap();
                        let brute = inclusion_brute_force(n1, &s1, n2, &s2, 1000);
                        assert_eq!(fast, brute, "n1={n1} s1={a} n2={n2} s2={b}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn symbolic_and_numeric_zeros_agree(
            ni in 0usize..4, li in 0usize..3, m in 4u64..40,
            num in -3000i64..3000, den in 1i64..=1000,
        ) {
            let n = [2u64, 3, 4, 6][ni];
            let l = [2u64, 3, 4][li];
            prop_assume!(m >= n);
            let d = ProductDigitSet::new(n, m, l).unwrap();
            let xi = Rational::new(num, den).unwrap();
            let symbolic = lattice_member(&zero_set(&d).unwrap(), &xi);
            let numeric = mask_eval_rational(&d.enumerate().0, &xi).norm() < 1e-12;
            prop_assert_eq!(symbolic, numeric);
        }

        #[test]
        fn mask_is_integer_periodic(x in -50.0f64..50.0, seed in 0usize..4) {
            let b = GenericDigitSet::new(match seed {
                0 => vec![0, 1, 8, 9],
                1 => vec![0, 2, 3, 5],
                2 => vec![-3, 0, 7, 11, 40],
                _ => vec![0, 1, 2, 3, 4, 5],
            }).unwrap();
            let diff = (mask_eval(&b, x + 1.0) - mask_eval(&b, x)).norm();
            prop_assert!(diff < 1e-12);
            prop_assert!(mask_eval(&b, x).norm() <= 1.0 + 1e-12);
        }
    }
}

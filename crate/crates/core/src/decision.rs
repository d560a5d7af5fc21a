//! Spectrality decision for `mu_{1/p, D}` with `D = D_N ⊕ m D_L`.
//!
//! The measure is spectral iff `N | p`, `L | p` and `N | m / gcd(m, p^d)`,
//! where `d` is the largest `i >= 0` with `gcd(mL / gcd(mL, p^i), L) != 1`.
//! `d` is computed twice: by scanning `i` literally, and from the prime
//! exponents of `L`, `m`, `p` as `max_i floor((tau_i + alpha_i - 1) / l_i)`.
//! The two must agree; a mismatch is a bug and panics.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::arith::{biguint_str, coprime_part, factorize, radical_divides, Rational};
use crate::digits::{component_zero_inclusion, ProductDigitSet};
use crate::error::{invalid, Error, Result};

/// The exponent `d`; infinite when some prime of `L` does not divide `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DValue {
    Finite(u32),
    Infinite,
}

impl DValue {
    pub fn finite(self) -> Option<u32> {
        match self {
            DValue::Finite(d) => Some(d),
            DValue::Infinite => None,
        }
    }
}

impl std::fmt::Display for DValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DValue::Finite(d) => write!(f, "{d}"),
            DValue::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for DValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DValue::Finite(d) => s.serialize_u32(*d),
            DValue::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for DValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(v) => Ok(DValue::Finite(v)),
            Raw::S(s) if s == "infinite" => Ok(DValue::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad d value {s:?}"))),
        }
    }
}

fn check_params(m: u64, l: u64, p: u64) -> Result<()> {
    if m < 1 {
        return Err(invalid("m", "must be at least 1"));
    }
    if l < 2 {
        return Err(invalid("L", "must be at least 2"));
    }
    if p < 2 {
        return Err(invalid("p", "must be at least 2"));
    }
    Ok(())
}

/// Literal scan over `i = 0, 1, 2, ...` until `gcd(mL, p^i)` stops changing.
pub fn compute_d_scan(m: u64, l: u64, p: u64) -> Result<DValue> {
    check_params(m, l, p)?;
    if !radical_divides(l, p) {
        return Ok(DValue::Infinite);
    }
    let ml = BigUint::from(m) * l;
    let lb = BigUint::from(l);
    let pb = BigUint::from(p);
    let mut pi = BigUint::one();
    let mut prev: Option<BigUint> = None;
    let mut best = 0u32;
    for i in 0u32.. {
        let g = ml.gcd(&pi);
        if prev.as_ref() == Some(&g) {
            break;
        }
        if !(&ml / &g).gcd(&lb).is_one() {
            best = i;
        }
        prev = Some(g);
        pi *= &pb;
    }
    Ok(DValue::Finite(best))
}

/// Exponent data for one prime `L_i` of `L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRecord {
    pub prime: u64,
    /// exponent in L
    pub alpha: u32,
    /// exponent in m
    pub tau: u32,
    /// exponent in p
    pub l: u32,
    /// exponent in N
    pub s: u32,
    pub d: u32,
    pub r: u32,
}

/// Prime-exponent bookkeeping behind the decision and the spectrum construction.
///
/// Primes are listed in increasing order; `b` counts those not dividing `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub kappa: usize,
    pub primes: Vec<PrimeRecord>,
    pub b: usize,
    #[serde(rename = "N_prime")]
    pub n_prime: u64,
    pub m_prime: u64,
    pub p_prime: u64,
    pub d: u32,
    /// gcd(m, p^d)
    pub sigma: u64,
    /// m / sigma
    pub m_tilde: u64,
    /// p^d / sigma
    #[serde(with = "biguint_str")]
    pub p_tilde: BigUint,
    /// L-part of m_tilde; present only when the measure is spectral.
    pub l_bar: Option<u64>,
    /// m_tilde / (l_bar * N'); present only when the measure is spectral.
    pub m0: Option<u64>,
}

impl Decomposition {
    pub fn d_from_exponents(&self) -> u32 {
        self.primes.iter().map(|r| r.d).max().unwrap_or(0)
    }
}

/// `gcd(m, p^e)` from valuations, without forming `p^e`; `None` means `e = ∞`.
fn gcd_with_power(m: u64, p: u64, e: Option<u32>) -> Result<u64> {
    let fm = factorize(m)?;
    let mut g = 1u64;
    for &(q, vm) in fm.factors() {
        let mut pp = p;
        let mut vp = 0u32;
        while pp.is_multiple_of(q) {
            pp /= q;
            vp += 1;
        }
        let cap = match e {
            Some(e) => vp.saturating_mul(e),
            None if vp > 0 => u32::MAX,
            None => 0,
        };
        g *= q.pow(vm.min(cap));
    }
    Ok(g)
}

pub fn decompose(n: u64, l: u64, m: u64, p: u64) -> Result<Decomposition> {
    check_params(m, l, p)?;
    if n < 2 {
        return Err(invalid("N", "must be at least 2"));
    }
    if !radical_divides(l, p) {
        return Err(Error::InfiniteD { l, p });
    }
    let fl = factorize(l)?;
    let fm = factorize(m)?;
    let fp = factorize(p)?;
    let fnn = factorize(n)?;

    let primes: Vec<PrimeRecord> = fl
        .factors()
        .iter()
        .map(|&(q, alpha)| {
            let tau = fm.exponent_of(q);
            let lp = fp.exponent_of(q);
            let top = tau + alpha - 1;
            PrimeRecord {
                prime: q,
                alpha,
                tau,
                l: lp,
                s: fnn.exponent_of(q),
                d: top / lp,
                r: top % lp,
            }
        })
        .collect();

    let d = primes.iter().map(|r| r.d).max().unwrap_or(0);
    let sigma = gcd_with_power(m, p, Some(d))?;
    let m_tilde = m / sigma;
    let p_tilde = BigUint::from(p).pow(d) / sigma;

    let n_prime = coprime_part(n, fl.primes());
    let spectral = p.is_multiple_of(n) && p.is_multiple_of(l) && m_tilde.is_multiple_of(n);
    let (l_bar, m0) = if spectral {
        let mut l_bar = 1u64;
        for rec in &primes {
            let gamma = coprime_exp(m_tilde, rec.prime);
            if rec.s > 0 {
                // forced exponent tau_i - d l_i, nonnegative under the spectral conditions
                assert_eq!(
                    gamma as i64,
                    rec.tau as i64 - (d as i64) * rec.l as i64,
                    "L-bar exponent mismatch at prime {}",
                    rec.prime
                );
            }
            l_bar *= rec.prime.pow(gamma);
        }
        let m0 = m_tilde / (l_bar * n_prime);
        assert_eq!(m0 * l_bar * n_prime, m_tilde, "m_tilde != L-bar N' m0");
        (Some(l_bar), Some(m0))
    } else {
        (None, None)
    };

    Ok(Decomposition {
        kappa: primes.len(),
        b: primes.iter().filter(|r| r.s == 0).count(),
        primes,
        n_prime,
        m_prime: coprime_part(m, fl.primes()),
        p_prime: coprime_part(p, fl.primes()),
        d,
        sigma,
        m_tilde,
        p_tilde,
        l_bar,
        m0,
    })
}

fn coprime_exp(mut x: u64, q: u64) -> u32 {
    let mut e = 0;
    while x.is_multiple_of(q) {
        x /= q;
        e += 1;
    }
    e
}

/// A zero-set inclusion `Z(delta_1) ⊆ Z(delta_2)` between two factors of the
/// convolution, which rules out spectrality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionObstruction {
    /// Which consecutive block fails to divide `p`: "N" or "L".
    pub block: String,
    pub inner_modulus: u64,
    pub inner_scale: Rational,
    pub outer_modulus: u64,
    pub outer_scale: Rational,
    pub holds: bool,
}

/// For `n ∤ p` with `g = gcd(n, p)`, split `D_n = D_g ⊕ g D_{n/g}`; the second-level
/// zeros of `c g D_{n/g}` sit inside the first-level zeros of `c D_n`.
fn inclusion_for_block(block: &str, n: u64, c: u64, p: u64) -> Result<InclusionObstruction> {
    let g = n.gcd(&p);
    let inner_modulus = n / g;
    let inner_scale = Rational::new(BigUint::from(p).pow(2), BigUint::from(c) * g)?;
    let outer_scale = Rational::new(p, c)?;
    let holds = component_zero_inclusion(inner_modulus, &inner_scale, n, &outer_scale)?;
    Ok(InclusionObstruction {
        block: block.to_string(),
        inner_modulus,
        inner_scale,
        outer_modulus: n,
        outer_scale,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub m: u64,
    pub spectral: bool,
    pub direct_sum: bool,
    #[serde(rename = "cond_N_divides_p")]
    pub cond_n_divides_p: bool,
    #[serde(rename = "cond_L_divides_p")]
    pub cond_l_divides_p: bool,
    pub d: DValue,
    /// `N | m / gcd(m, p^d)`; for infinite `d` the gcd is its stable limit.
    #[serde(rename = "cond_N_divides_mtilde")]
    pub cond_n_divides_mtilde: bool,
    pub decomposition: Option<Decomposition>,
    pub obstruction: Option<InclusionObstruction>,
}

pub fn decide(d: &ProductDigitSet, p: u64) -> Result<SpectralCertificate> {
    let (n, l, m) = (d.n(), d.l(), d.m());
    check_params(m, l, p)?;
    let d_scan = compute_d_scan(m, l, p)?;
    let decomposition = match d_scan {
        DValue::Finite(ds) => {
            let dec = decompose(n, l, m, p)?;
            assert_eq!(
                ds,
                dec.d_from_exponents(),
                "d scan and exponent formula disagree for m={m} L={l} p={p}"
            );
            Some(dec)
        }
        DValue::Infinite => None,
    };
    let sigma = gcd_with_power(m, p, d_scan.finite())?;
    let cond_n_divides_p = p.is_multiple_of(n);
    let cond_l_divides_p = p.is_multiple_of(l);
    let cond_n_divides_mtilde = (m / sigma) % n == 0;
    let spectral = cond_n_divides_p && cond_l_divides_p && cond_n_divides_mtilde;

    let obstruction = if !d.is_direct() {
        None
    } else if !cond_n_divides_p {
        Some(inclusion_for_block("N", n, 1, p)?)
    } else if !cond_l_divides_p {
        Some(inclusion_for_block("L", l, m, p)?)
    } else {
        None
    };

    Ok(SpectralCertificate {
        p,
        n,
        l,
        m,
        spectral,
        direct_sum: d.is_direct(),
        cond_n_divides_p,
        cond_l_divides_p,
        d: d_scan,
        cond_n_divides_mtilde,
        decomposition,
        obstruction,
    })
}

/// Convenience wrapper taking raw parameters.
pub fn decide_params(n: u64, l: u64, m: u64, p: u64) -> Result<SpectralCertificate> {
    decide(&ProductDigitSet::new(n, m, l)?, p)
}

/// Outcome for a contraction ratio given as `1/rho`, not necessarily an integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum RatioVerdict {
    /// A non-integer `1/rho` never gives a spectral measure here, since the
    /// mask zeros lie in a lattice.
    NonInteger { ratio: Rational, spectral: bool },
    Integer(SpectralCertificate),
}

impl RatioVerdict {
    pub fn spectral(&self) -> bool {
        match self {
            RatioVerdict::NonInteger { .. } => false,
            RatioVerdict::Integer(c) => c.spectral,
        }
    }
}

pub fn decide_ratio(d: &ProductDigitSet, ratio: &Rational) -> Result<RatioVerdict> {
    if ratio <= &Rational::one() {
        return Err(invalid("ratio", "1/rho must exceed 1"));
    }
    if !ratio.is_integer() {
        return Ok(RatioVerdict::NonInteger {
            ratio: ratio.clone(),
            spectral: false,
        });
    }
    let p = ratio
        .numer()
        .to_u64()
        .ok_or(Error::Overflow("contraction ratio"))?;
    Ok(RatioVerdict::Integer(decide(d, p)?))
}

//! Explicit spectrum candidates for spectral parameter sets.
//!
//! The measure factors as `delta_{D1} * mu_{1/p, D2}` after rescaling the
//! digits by `p_tilde`, with
//!
//! * `D1 = m_tilde (D_L ⊕ p D_L ⊕ ... ⊕ p^{d-1} D_L)`, spectrum
//!   `Λ1 = { sum_{k<d} eta_k / (m_tilde p^k L) }`,
//! * `D2 = m_tilde D_L ⊕ p_tilde D_N`, which forms a Hadamard triple with
//!   `p` and the integer frequency set `pℒ`, where
//!   `ℒ = {0, 1/L, ..}/(L_bar N') ⊕ {0, 1/N, ..}`.
//!
//! The emitted set is `p_tilde * (Λ1 ⊕ Λ2)` with `Λ2` the finite expansions
//! `sum_{j<levels} p^j l_j`, `l_j ∈ pℒ`. Undoing the digit rescaling multiplies
//! frequencies by `p_tilde`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{ratio_to_f64, Rational};
use crate::decision::{decide, Decomposition, SpectralCertificate};
use crate::digits::{GenericDigitSet, ProductDigitSet};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Tolerance for the Hadamard and unitarity checks.
pub const HADAMARD_TOL: f64 = 1e-12;

/// Default cap on the number of emitted frequencies.
pub const DEFAULT_SPECTRUM_BUDGET: u64 = 4_000_000;

/// Representatives used for the integer frequency digits `pℒ`.
///
/// `Canonical` keeps the values `0 <= l < p` produced by the formula.
/// `Balanced` shifts each into `(-p/2, p/2]`; residues mod `p` (hence the
/// Hadamard property) are unchanged, but the expansions then spread over
/// both signs, which is what the completeness probe needs to see `Q -> 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqDigits {
    #[default]
    Canonical,
    Balanced,
}

impl std::str::FromStr for FreqDigits {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "canonical" => Ok(FreqDigits::Canonical),
            "balanced" => Ok(FreqDigits::Balanced),
            _ => Err(format!("expected `canonical` or `balanced`, got {s:?}")),
        }
    }
}

fn spectral_parts(dec: &Decomposition) -> Result<(u64, u64)> {
    match (dec.l_bar, dec.m0) {
        (Some(l_bar), Some(_)) => Ok((l_bar, dec.n_prime)),
        _ => Err(Error::Assertion(
            "decomposition lacks L-bar; parameters are not spectral".into(),
        )),
    }
}

/// `Λ1 = { sum_{k<d} eta_k / (m_tilde p^k L) : 0 <= eta_k < L }`, sorted.
pub fn build_lambda1(dec: &Decomposition, p: u64, l: u64) -> Result<Vec<Rational>> {
    spectral_parts(dec)?;
    let mut out = vec![Rational::zero()];
    let mut denom = BigInt::from(dec.m_tilde) * l;
    for _ in 0..dec.d {
        let mut next = Vec::with_capacity(out.len() * l as usize);
        for base in &out {
            for eta in 0..l {
                next.push(base + &Rational::new(eta, denom.clone())?);
            }
        }
        out = next;
        denom *= p;
    }
    out.sort();
    Ok(out)
}

/// `D1 = m_tilde (D_L ⊕ p D_L ⊕ ... ⊕ p^{d-1} D_L)`.
pub fn build_d1(dec: &Decomposition, p: u64, l: u64) -> Result<GenericDigitSet> {
    let mut digits = vec![0i64];
    let mut step = dec.m_tilde as i128;
    for _ in 0..dec.d {
        let mut next = Vec::with_capacity(digits.len() * l as usize);
        for &x in &digits {
            for j in 0..l as i128 {
                let v = (x as i128)
                    .checked_add(j.checked_mul(step).ok_or(Error::Overflow("D1 digit"))?)
                    .and_then(|v| i64::try_from(v).ok())
                    .ok_or(Error::Overflow("D1 digit"))?;
                next.push(v);
            }
        }
        digits = next;
        step = step.checked_mul(p as i128).ok_or(Error::Overflow("D1 digit"))?;
    }
    GenericDigitSet::new(digits)
}

/// `D2 = m_tilde D_L ⊕ p_tilde D_N`.
pub fn build_d2(dec: &Decomposition, n: u64, l: u64) -> Result<GenericDigitSet> {
    let p_tilde = dec.p_tilde.to_i64().ok_or(Error::Overflow("p_tilde"))?;
    let mt = dec.m_tilde as i64;
    let mut digits = Vec::with_capacity((n * l) as usize);
    for j in 0..l as i64 {
        for i in 0..n as i64 {
            let v = j
                .checked_mul(mt)
                .and_then(|a| i.checked_mul(p_tilde).and_then(|b| a.checked_add(b)))
                .ok_or(Error::Overflow("D2 digit"))?;
            digits.push(v);
        }
    }
    GenericDigitSet::new(digits).map_err(|_| Error::Assertion("D2 is not a direct sum".into()))
}

/// The integer frequency digits `p ℒ`, sorted.
pub fn build_freq_set(dec: &Decomposition, p: u64, n: u64, l: u64) -> Result<Vec<i64>> {
    let (l_bar, n_prime) = spectral_parts(dec)?;
    let fine = l_bar as u128 * n_prime as u128 * l as u128;
    if !(p as u128).is_multiple_of(fine) || !p.is_multiple_of(n) {
        return Err(Error::Assertion(format!(
            "p ℒ is not integral: p={p}, L_bar N' L={fine}, N={n}"
        )));
    }
    let a = (p as u128 / fine) as i64;
    let c = (p / n) as i64;
    let mut out: Vec<i64> = (0..l as i64)
        .flat_map(|i| (0..n as i64).map(move |j| i * a + j * c))
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn balance(x: i64, p: u64) -> i64 {
    let p = p as i64;
    let r = x.rem_euclid(p);
    if 2 * r > p {
        r - p
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardReport {
    pub holds: bool,
    /// max over `l1 != l2` of `|m_B((l1 - l2)/R)|`
    pub max_mask_at_differences: f64,
    /// `max |H* H - I|`
    pub unitarity_defect: f64,
    pub tolerance: f64,
}

/// Phases `e^{2 pi i k / r}` for `k = 0..r`.
fn root_table(r: u64) -> Vec<Complex64> {
    (0..r)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / r as f64))
        .collect()
}

/// Checks that `(r, b, lset)` is a Hadamard triple, once through the mask
/// zeros at frequency differences and once through the matrix
/// `H = (e^{2 pi i b l / r})/sqrt(#b)`.
pub fn hadamard_check(r: u64, b: &GenericDigitSet, lset: &GenericDigitSet) -> Result<HadamardReport> {
    if b.len() != lset.len() {
        return Err(Error::CardinalityMismatch {
            left: b.len(),
            right: lset.len(),
        });
    }
    if r < 2 {
        return Err(crate::error::invalid("R", "must be at least 2"));
    }
    let n = b.len();
    let table = root_table(r);
    let ri = r as i128;
    let bres: Vec<i128> = b.digits().iter().map(|&x| (x as i128).rem_euclid(ri)).collect();
    let lres: Vec<i128> = lset.digits().iter().map(|&x| (x as i128).rem_euclid(ri)).collect();

    // The mask at (l1 - l2)/r only depends on the difference mod r.
    let mut cache: HashMap<i128, f64> = HashMap::new();
    let mut max_mask = 0.0f64;
    for (i, &li) in lres.iter().enumerate() {
        for (j, &lj) in lres.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff = (li - lj).rem_euclid(ri);
            let v = *cache.entry(diff).or_insert_with(|| {
                let s: Complex64 = bres
                    .iter()
                    .map(|&x| table[((x * diff) % ri) as usize])
                    .sum();
                (s / n as f64).norm()
            });
            max_mask = max_mask.max(v);
        }
    }

    // H[d][l] = e^{2 pi i d l / r}; (H* H)[a][c] = sum_d conj(H[d][a]) H[d][c].
    let h: Vec<Vec<Complex64>> = bres
        .iter()
        .map(|&x| lres.iter().map(|&y| table[((x * y) % ri) as usize]).collect())
        .collect();
    let mut defect = 0.0f64;
    for a in 0..n {
        for c in a..n {
            let s: Complex64 = h.iter().map(|row| row[a].conj() * row[c]).sum();
            let target = if a == c { 1.0 } else { 0.0 };
            defect = defect.max((s / n as f64 - target).norm());
        }
    }

    Ok(HadamardReport {
        holds: max_mask < HADAMARD_TOL && defect < HADAMARD_TOL,
        max_mask_at_differences: max_mask,
        unitarity_defect: defect,
        tolerance: HADAMARD_TOL,
    })
}

/// `max |H H* - I|` for `H = (e^{2 pi i lambda delta})/sqrt(n)`, rows indexed by
/// the frequencies and columns by the digits; phases are reduced exactly.
pub fn exponential_matrix_defect(freqs: &[Rational], digits: &GenericDigitSet) -> Result<f64> {
    if freqs.len() != digits.len() {
        return Err(Error::CardinalityMismatch {
            left: freqs.len(),
            right: digits.len(),
        });
    }
    let n = freqs.len();
    let h: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|lam| {
            digits
                .digits()
                .iter()
                .map(|&x| {
                    let r = (lam.numer() * x).mod_floor(lam.denom());
                    Complex64::from_polar(1.0, 2.0 * PI * ratio_to_f64(&r, lam.denom()))
                })
                .collect()
        })
        .collect();
    let mut defect = 0.0f64;
    for a in 0..n {
        for c in a..n {
            let s: Complex64 = h[a].iter().zip(&h[c]).map(|(x, y)| x * y.conj()).sum();
            let target = if a == c { 1.0 } else { 0.0 };
            defect = defect.max((s / n as f64 - target).norm());
        }
    }
    Ok(defect)
}

/// True iff the pairwise differences of `b` have gcd 1.
pub fn gcd_difference_certificate(b: &GenericDigitSet) -> Result<bool> {
    if b.len() < 2 {
        return Err(Error::Singleton);
    }
    let first = b.digits()[0];
    let g = b
        .digits()
        .iter()
        .fold(0u64, |g, &x| g.gcd(&(x - first).unsigned_abs()));
    Ok(g == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub levels: u32,
    pub digits: FreqDigits,
    pub budget: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            levels: 3,
            digits: FreqDigits::Canonical,
            budget: DEFAULT_SPECTRUM_BUDGET,
        }
    }
}

/// A finite truncation of the constructed spectrum, with the layer data it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCandidate {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub m: u64,
    pub d: u32,
    pub levels: u32,
    pub digits: FreqDigits,
    pub certificate: SpectralCertificate,
    pub lambda1: Vec<Rational>,
    pub d2: GenericDigitSet,
    /// Frequency digits for the integer layer (`pℒ`, possibly shifted by multiples of `p`).
    pub freq_set: Vec<i64>,
    /// Factor applied to `Λ1 ⊕ Λ2` to undo the digit rescaling (`p_tilde`).
    pub scale: Rational,
    pub hadamard: HadamardReport,
    pub gcd_certificate: bool,
    pub lambda: Vec<Rational>,
}

impl SpectrumCandidate {
    pub fn digit_set(&self) -> Result<ProductDigitSet> {
        ProductDigitSet::new(self.n, self.m, self.l)
    }

    /// `L^d (NL)^levels`.
    pub fn expected_len(&self) -> u128 {
        (self.l as u128).pow(self.d) * ((self.n * self.l) as u128).pow(self.levels)
    }
}

/// `{ sum_{j<levels} p^j l_j : l_j ∈ digits }`.
pub fn jp_expansions(p: u64, digits: &[i64], levels: u32) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero()];
    let pb = BigInt::from(p);
    for _ in 0..levels {
        let mut next = Vec::with_capacity(out.len() * digits.len());
        for &l in digits {
            for s in &out {
                next.push(BigInt::from(l) + &pb * s);
            }
        }
        out = next;
    }
    out
}

pub fn build_spectrum(d: &ProductDigitSet, p: u64, opts: &BuildOptions) -> Result<SpectrumCandidate> {
    build_spectrum_with(d, p, opts, Exec::default())
}

pub fn build_spectrum_with(
    d: &ProductDigitSet,
    p: u64,
    opts: &BuildOptions,
    exec: Exec,
) -> Result<SpectrumCandidate> {
    let cert = decide(d, p)?;
    if !cert.spectral {
        return Err(Error::NotSpectral {
            p,
            n: d.n(),
            l: d.l(),
            m: d.m(),
        });
    }
    let dec = cert
        .decomposition
        .clone()
        .ok_or_else(|| Error::Assertion("spectral certificate without decomposition".into()))?;
    let (n, l) = (d.n(), d.l());

    let size = (l as u128)
        .checked_pow(dec.d)
        .and_then(|a| ((n * l) as u128).checked_pow(opts.levels).and_then(|b| a.checked_mul(b)));
    match size {
        Some(s) if s <= opts.budget as u128 => {}
        Some(s) => {
            return Err(Error::BudgetExceeded {
                needed: s,
                budget: opts.budget,
            })
        }
        None => {
            return Err(Error::BudgetExceeded {
                needed: u128::MAX,
                budget: opts.budget,
            })
        }
    }

    let lambda1 = build_lambda1(&dec, p, l)?;
    let d2 = build_d2(&dec, n, l)?;
    let mut freq_set = build_freq_set(&dec, p, n, l)?;
    if opts.digits == FreqDigits::Balanced {
        freq_set = freq_set.into_iter().map(|x| balance(x, p)).collect();
        freq_set.sort_unstable();
    }
    let fs = GenericDigitSet::new(freq_set.iter().copied())
        .map_err(|_| Error::Assertion("frequency digits collide".into()))?;

    let hadamard = hadamard_check(p, &d2, &fs)?;
    if !hadamard.holds {
        return Err(Error::Assertion(format!(
            "(p, D2, pℒ) is not a Hadamard triple: {hadamard:?}"
        )));
    }
    let gcd_certificate = gcd_difference_certificate(&d2)?;
    if !gcd_certificate {
        return Err(Error::Assertion("gcd(D2 - D2) != 1".into()));
    }

    let lambda2 = jp_expansions(p, &freq_set, opts.levels);
    let scale = Rational::from_integer(BigInt::from(dec.p_tilde.clone()));
    let mut lambda: Vec<Rational> = exec
        .map(&lambda1, |a| {
            lambda2
                .iter()
                .map(|b| &(a + &Rational::from_integer(b.clone())) * &scale)
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
    exec.sort_unstable(&mut lambda);
    let before = lambda.len();
    lambda.dedup();
    if lambda.len() != before {
        return Err(Error::Assertion(format!(
            "layers are not a direct sum: {} collisions",
            before - lambda.len()
        )));
    }

    let out = SpectrumCandidate {
        p,
        n,
        l,
        m: d.m(),
        d: dec.d,
        levels: opts.levels,
        digits: opts.digits,
        certificate: cert,
        lambda1,
        d2,
        freq_set,
        scale,
        hadamard,
        gcd_certificate,
        lambda,
    };
    debug_assert_eq!(out.lambda.len() as u128, out.expected_len());
    Ok(out)
}

//! Brute-force tiling evidence for the attractor `T(1/p, B)`.
//!
//! Two bounded checks are offered: distinctness of the depth-`k` digit sums
//! `sum_{i<k} p^i b_i`, and, for each nonzero integer `nu`, the first `k` with
//! `m_B(nu / p^k) = 0`. [`tile_decide`] compares them with the arithmetic
//! verdict at `p = N L`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::decision::decide;
use crate::digits::{mask_eval_rational, zero_set, GenericDigitSet, ProductDigitSet};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;

/// Default cap on `(#B)^k`.
pub const DEFAULT_WORD_BUDGET: u64 = 10_000_000;

/// Threshold for numeric mask zeros on digit sets without a known zero set.
pub const MASK_ZERO_TOL: f64 = 1e-12;

/// Two distinct digit words (least significant first) with the same value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionWitness {
    pub k: u32,
    pub word_a: Vec<i64>,
    pub word_b: Vec<i64>,
    /// The common value, as a decimal string.
    pub sum: String,
}

impl CollisionWitness {
    /// Re-evaluates both words; true iff they are distinct and sum to `self.sum`.
    pub fn replay(&self, p: u64) -> bool {
        let a = word_value(p, &self.word_a);
        let b = word_value(p, &self.word_b);
        self.word_a != self.word_b
            && self.word_a.len() == self.k as usize
            && self.word_b.len() == self.k as usize
            && a == b
            && a.to_string() == self.sum
    }
}

/// `sum_i p^i w_i`.
pub fn word_value(p: u64, word: &[i64]) -> BigInt {
    word.iter()
        .rev()
        .fold(BigInt::zero(), |acc, &b| acc * p + BigInt::from(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctSums {
    pub p: u64,
    pub k: u32,
    /// Distinct values at each depth `1..=k`.
    pub counts: Vec<u64>,
    pub expected: u128,
    pub witness: Option<CollisionWitness>,
    /// Set when `#B != p`, where the distinct-sums criterion does not apply.
    pub diagnostic: Option<String>,
}

impl DistinctSums {
    pub fn count(&self) -> u64 {
        self.counts.last().copied().unwrap_or(1)
    }

    pub fn all_distinct(&self) -> bool {
        self.count() as u128 == self.expected
    }
}

trait SumValue: Clone + Ord + Send + Sync + Debug + Add<Output = Self> + Mul<Output = Self> + Sub<Output = Self> {
    fn from_i64(v: i64) -> Self;
    fn to_big(&self) -> BigInt;
    /// `(self - b) / p` when exact.
    fn exact_quotient(&self, b: &Self, p: &Self) -> Option<Self>;
}

impl SumValue for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn exact_quotient(&self, b: &Self, p: &Self) -> Option<Self> {
        let diff = self - b;
        (diff % p == 0).then(|| diff / p)
    }
}

impl SumValue for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn exact_quotient(&self, b: &Self, p: &Self) -> Option<Self> {
        let (q, r) = (self - b).div_rem(p);
        r.is_zero().then_some(q)
    }
}

struct Sweep {
    counts: Vec<u64>,
    witness: Option<CollisionWitness>,
}

/// Decodes the unique word (least significant digit first) of length `level`
/// with value `v`; `levels[j]` is the sorted set of depth-`j` sums, all of
/// which have a single word.
fn decode<T: SumValue>(v: &T, level: usize, digits: &[T], p: &T, levels: &[Vec<T>]) -> Vec<T> {
    let mut word = Vec::with_capacity(level);
    let mut cur = v.clone();
    for j in (0..level).rev() {
        let (b, rest) = digits
            .iter()
            .find_map(|b| {
                let q = cur.exact_quotient(b, p)?;
                levels[j].binary_search(&q).is_ok().then(|| (b.clone(), q))
            })
            .expect("value decodes through the stored levels");
        word.push(b);
        cur = rest;
    }
    word
}

fn sweep<T: SumValue>(
    p: u64,
    digits: &[i64],
    max_k: u32,
    stop_at_collision: bool,
    exec: Exec,
) -> Sweep {
    let pt = T::from_i64(p as i64);
    let ds: Vec<T> = digits.iter().map(|&d| T::from_i64(d)).collect();
    let mut levels: Vec<Vec<T>> = vec![vec![T::from_i64(0)]];
    let mut counts = Vec::new();
    let mut witness = None;
    let mut clean = true;
    for k in 1..=max_k as usize {
        let prev = &levels[k - 1];
        let chunks = exec.map(&ds, |b| {
            prev.iter()
                .map(|s| b.clone() + pt.clone() * s.clone())
                .collect::<Vec<T>>()
        });
        let mut cur: Vec<T> = chunks.into_iter().flatten().collect();
        exec.sort_unstable(&mut cur);
        let dup = cur.windows(2).position(|w| w[0] == w[1]).map(|i| cur[i].clone());
        cur.dedup();
        counts.push(cur.len() as u64);
        if let (Some(v), true) = (dup, clean) {
            // Two (digit, lower word) pairs reach v; lower levels are collision-free.
            let hits: Vec<(T, T)> = ds
                .iter()
                .filter_map(|b| {
                    let q = v.exact_quotient(b, &pt)?;
                    prev.binary_search(&q).is_ok().then(|| (b.clone(), q))
                })
                .take(2)
                .collect();
            let word = |(b, q): &(T, T)| {
                let mut w = vec![b.clone()];
                w.extend(decode(q, k - 1, &ds, &pt, &levels));
                w
            };
            let to_i64 = |w: Vec<T>| -> Vec<i64> {
                w.iter().map(|x| x.to_big().try_into().expect("digit fits i64")).collect()
            };
            witness = Some(CollisionWitness {
                k: k as u32,
                word_a: to_i64(word(&hits[0])),
                word_b: to_i64(word(&hits[1])),
                sum: v.to_big().to_string(),
            });
            clean = false;
            if stop_at_collision {
                break;
            }
        }
        levels.push(cur);
    }
    Sweep { counts, witness }
}

/// Whether every depth-`k` sum fits in `i64`.
fn fits_i64(p: u64, max_abs: u64, k: u32) -> bool {
    let mut bound: i128 = 0;
    let mut pk: i128 = 1;
    for _ in 0..k {
        bound = match pk.checked_mul(max_abs as i128).and_then(|t| bound.checked_add(t)) {
            Some(b) => b,
            None => return false,
        };
        pk = match pk.checked_mul(p as i128) {
            Some(v) => v,
            None => return false,
        };
    }
    bound <= i64::MAX as i128
}

fn word_budget(b: &GenericDigitSet, k: u32, budget: u64) -> Result<u128> {
    let needed = (b.len() as u128).checked_pow(k).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed)
}

fn diagnostic_note(p: u64, b: &GenericDigitSet) -> Option<String> {
    (b.len() as u64 != p).then(|| {
        format!(
            "#B = {} differs from p = {p}; distinct sums do not characterize tiles here",
            b.len()
        )
    })
}

/// Exact number of distinct `sum_{i<k} p^i b_i`; a witness is returned for the
/// smallest depth at which two words collide, padded to length `k`.
pub fn distinct_sums_check(p: u64, b: &GenericDigitSet, k: u32, budget: u64, exec: Exec) -> Result<DistinctSums> {
    distinct_sums_impl(p, b, k, budget, false, exec)
}

/// Like [`distinct_sums_check`] but stops at the first depth with a collision.
pub fn distinct_sums_until_collision(
    p: u64,
    b: &GenericDigitSet,
    max_k: u32,
    budget: u64,
    exec: Exec,
) -> Result<DistinctSums> {
    distinct_sums_impl(p, b, max_k, budget, true, exec)
}

fn distinct_sums_impl(
    p: u64,
    b: &GenericDigitSet,
    k: u32,
    budget: u64,
    stop: bool,
    exec: Exec,
) -> Result<DistinctSums> {
    if p < 2 {
        return Err(invalid("p", "must be at least 2"));
    }
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    word_budget(b, k, budget)?;
    let sw = if fits_i64(p, b.max_abs(), k) {
        sweep::<i64>(p, b.digits(), k, stop, exec)
    } else {
        sweep::<BigInt>(p, b.digits(), k, stop, exec)
    };
    let reached = sw.counts.len() as u32;
    let mut witness = sw.witness;
    if let Some(w) = witness.as_mut() {
        let pad = b.digits()[0];
        w.word_a.resize(reached as usize, pad);
        w.word_b.resize(reached as usize, pad);
        w.sum = word_value(p, &w.word_a).to_string();
        w.k = reached;
    }
    Ok(DistinctSums {
        p,
        k: reached,
        counts: sw.counts,
        expected: (b.len() as u128).pow(reached),
        witness,
        diagnostic: diagnostic_note(p, b),
    })
}

/// Digit set used by the mask zero search.
#[derive(Debug, Clone)]
pub enum DigitSource<'a> {
    /// Exact zero test through the lattice description of the zero set.
    Product(&'a ProductDigitSet),
    /// Numeric test `|m_B| < 1e-12` with exactly reduced phases.
    Generic(&'a GenericDigitSet),
}

/// Smallest `1 <= k <= kmax` with `m_B(nu / p^k) = 0`.
pub fn mask_zero_search(p: u64, b: DigitSource<'_>, nu: i64, kmax: u32) -> Result<Option<u32>> {
    if p < 2 {
        return Err(invalid("p", "must be at least 2"));
    }
    if nu == 0 {
        return Err(invalid("nu", "must be nonzero"));
    }
    let zs = match b {
        DigitSource::Product(d) => Some(zero_set(d)?),
        DigitSource::Generic(_) => None,
    };
    let mut den = BigInt::from(1);
    for k in 1..=kmax {
        den *= p;
        let x = Rational::new(nu, den.clone())?;
        let hit = match (&zs, &b) {
            (Some(z), _) => z.contains(&x),
            (None, DigitSource::Generic(g)) => mask_eval_rational(g, &x).norm() < MASK_ZERO_TOL,
            (None, DigitSource::Product(_)) => unreachable!(),
        };
        if hit {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileConfig {
    pub max_k: u32,
    pub nu_window: u32,
    pub kmax: u32,
    pub budget: u64,
}

impl Default for TileConfig {
    fn default() -> Self {
        TileConfig {
            max_k: 5,
            nu_window: 50,
            kmax: 12,
            budget: DEFAULT_WORD_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Consistent,
    Contradiction,
    UndecidedByBruteForce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NuCoverage {
    pub nu: i64,
    /// `None` when no `k <= kmax` works.
    pub k: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileVerdict {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub m: u64,
    pub p: u64,
    pub config: TileConfig,
    pub direct_sum: bool,
    pub digits: GenericDigitSet,
    pub arithmetic_tile: bool,
    /// Largest depth through which all digit sums are distinct.
    pub distinct_sums_ok_through: u32,
    pub distinct_counts: Vec<u64>,
    pub collision_witness: Option<CollisionWitness>,
    /// Set when the word budget stopped the distinct-sums sweep early.
    pub budget_exhausted: bool,
    pub nu_coverage: Vec<NuCoverage>,
    pub nu_uncovered: u32,
    pub diagnostic: Option<String>,
    pub agreement: Agreement,
}

/// Arithmetic tile verdict at `p = N L` together with bounded brute-force evidence.
pub fn tile_decide(n: u64, l: u64, m: u64, cfg: &TileConfig, exec: Exec) -> Result<TileVerdict> {
    let d = ProductDigitSet::new(n, m, l)?;
    let p = n.checked_mul(l).ok_or(Error::Overflow("N L"))?;
    let cert = decide(&d, p)?;
    let (digits, direct) = d.enumerate();

    // Largest depth within budget, so an oversized max_k degrades instead of failing.
    let mut depth = cfg.max_k;
    while depth > 0 && word_budget(&digits, depth, cfg.budget).is_err() {
        depth -= 1;
    }
    let budget_exhausted = depth < cfg.max_k;
    let sums = if depth > 0 {
        Some(distinct_sums_until_collision(p, &digits, depth, cfg.budget, exec)?)
    } else {
        None
    };
    let (counts, witness) = match sums {
        Some(s) => (s.counts, s.witness),
        None => (Vec::new(), None),
    };
    let ok_through = match &witness {
        Some(w) => w.k - 1,
        None => counts.len() as u32,
    };

    let nus: Vec<i64> = (-(cfg.nu_window as i64)..=cfg.nu_window as i64)
        .filter(|&v| v != 0)
        .collect();
    let source = if direct {
        DigitSource::Product(&d)
    } else {
        DigitSource::Generic(&digits)
    };
    let nu_coverage = exec
        .map(&nus, |&nu| mask_zero_search(p, source.clone(), nu, cfg.kmax).map(|k| NuCoverage { nu, k }))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let uncovered = nu_coverage.iter().filter(|c| c.k.is_none()).count() as u32;

    let tile = cert.spectral;
    let agreement = match (tile, witness.is_some()) {
        (true, true) => Agreement::Contradiction,
        (true, false) if uncovered == 0 && !budget_exhausted => Agreement::Consistent,
        (false, true) => Agreement::Consistent,
        _ => Agreement::UndecidedByBruteForce,
    };

    Ok(TileVerdict {
        n,
        l,
        m,
        p,
        config: *cfg,
        direct_sum: direct,
        diagnostic: diagnostic_note(p, &digits),
        digits,
        arithmetic_tile: tile,
        distinct_sums_ok_through: ok_through,
        distinct_counts: counts,
        collision_witness: witness,
        budget_exhausted,
        nu_coverage,
        nu_uncovered: uncovered,
        agreement,
    })
}

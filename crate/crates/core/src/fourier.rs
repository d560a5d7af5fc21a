//! Truncated evaluation of `mu_hat`, the `Q` function and orthogonality reports.
//!
//! `mu_hat(xi) = prod_{n >= 1} m_D(xi / p^n)` is cut at the first `n0` for which
//! the tail bound `exp(2 pi max(D) |xi| p^{-n0} / (p - 1)) - 1` drops below
//! `tail_epsilon`. Rational frequencies keep their phases exact: `lambda / p^n`
//! is reduced mod 1 in integer arithmetic before the float shift is added.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{ratio_to_f64, Rational};
use crate::digits::{mu_hat_zero_member, ProductDigitSet, ZeroTester};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tail_epsilon: f64,
    pub q_tolerance: f64,
    pub sample_count: usize,
    pub sample_seed: u64,
    /// Upper bound on the number of frequency pairs an orthogonality report may visit.
    pub pair_budget: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tail_epsilon: 1e-9,
            q_tolerance: 1e-6,
            sample_count: 100,
            sample_seed: 0,
            pair_budget: 200_000_000,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1.0) {
            return Err(invalid("tail_epsilon", "must lie in (0, 1)"));
        }
        if self.q_tolerance.is_nan() || self.q_tolerance <= 0.0 {
            return Err(invalid("q_tolerance", "must be positive"));
        }
        if self.sample_count == 0 {
            return Err(invalid("sample_count", "must be positive"));
        }
        Ok(())
    }

    /// `sample_count` points in `[0, 1)` drawn from the seeded generator.
    pub fn samples(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.sample_seed);
        (0..self.sample_count).map(|_| rng.gen::<f64>()).collect()
    }
}

/// Smallest `n0` with `exp(2 pi max_digit |xi| p^{-n0} / (p - 1)) - 1 < eps`.
pub fn truncation_level(p: u64, max_digit: u64, abs_xi: f64, eps: f64) -> u32 {
    if abs_xi == 0.0 || max_digit == 0 {
        return 0;
    }
    let bound = 2.0 * PI * max_digit as f64 * abs_xi / (p - 1) as f64;
    let target = eps.ln_1p();
    let mut n0 = 0u32;
    let mut scaled = bound;
    while scaled >= target {
        scaled /= p as f64;
        n0 += 1;
    }
    n0
}

fn check_p(p: u64) -> Result<()> {
    if p < 2 {
        Err(invalid("p", "must be at least 2"))
    } else {
        Ok(())
    }
}

/// Truncated `mu_hat(xi)` and the number of factors used.
pub fn mu_hat(p: u64, d: &ProductDigitSet, xi: f64, cfg: &EvalConfig) -> Result<(Complex64, u32)> {
    check_p(p)?;
    let n0 = truncation_level(p, d.max_digit(), xi.abs(), cfg.tail_epsilon);
    let mut prod = Complex64::one();
    let mut y = xi;
    let mf = d.m() as f64;
    for _ in 0..n0 {
        y /= p as f64;
        let t = y.rem_euclid(1.0);
        let tm = (mf * t).rem_euclid(1.0);
        prod *= d.mask_from_phases(t, tm);
    }
    Ok((prod, n0))
}

/// Truncated `mu_hat(lambda + x)` with the phases of `lambda` reduced exactly.
pub fn mu_hat_shifted(
    p: u64,
    d: &ProductDigitSet,
    lambda: &Rational,
    x: f64,
    cfg: &EvalConfig,
) -> Result<(Complex64, u32)> {
    check_p(p)?;
    let n0 = truncation_level(p, d.max_digit(), (lambda.to_f64() + x).abs(), cfg.tail_epsilon);
    Ok((shifted_product(p, d, lambda, x, n0), n0))
}

/// `prod_{n=1}^{n0} m_D((lambda + x) / p^n)`.
fn shifted_product(p: u64, d: &ProductDigitSet, lambda: &Rational, x: f64, n0: u32) -> Complex64 {
    let m = d.m();
    let mf = m as f64;
    let pf = p as f64;
    let mut prod = Complex64::one();
    let mut xs = x;
    let small = match (lambda.numer().to_i128(), lambda.denom().to_i128()) {
        (Some(a), Some(b)) => (a.checked_mul(m as i128)).map(|ma| (a, ma, b)),
        _ => None,
    };
    if let Some((a, ma, b)) = small {
        let mut den = Some(b);
        let mut den_f = b as f64;
        for _ in 0..n0 {
            den = den.and_then(|v| v.checked_mul(p as i128));
            den_f *= pf;
            xs /= pf;
            // Once den leaves i128 it exceeds |a| and |m a|, so no reduction is needed.
            let (ra, rma) = match den {
                Some(v) => (
                    a.rem_euclid(v) as f64 / v as f64,
                    ma.rem_euclid(v) as f64 / v as f64,
                ),
                None => (a as f64 / den_f, ma as f64 / den_f),
            };
            let t = (ra + xs).rem_euclid(1.0);
            let tm = (rma + mf * xs).rem_euclid(1.0);
            prod *= d.mask_from_phases(t, tm);
        }
        return prod;
    }
    let a = lambda.numer();
    let ma = a * BigInt::from(m);
    let mut den = lambda.denom().clone();
    for _ in 0..n0 {
        den *= p;
        xs /= pf;
        let ra = ratio_to_f64(&a.mod_floor(&den), &den);
        let rma = ratio_to_f64(&ma.mod_floor(&den), &den);
        let t = (ra + xs).rem_euclid(1.0);
        let tm = (rma + mf * xs).rem_euclid(1.0);
        prod *= d.mask_from_phases(t, tm);
    }
    prod
}

/// `Q(x) = sum_{lambda} |mu_hat(x + lambda)|^2`.
pub fn q_function(p: u64, d: &ProductDigitSet, lambda: &[Rational], x: f64, cfg: &EvalConfig) -> Result<f64> {
    check_p(p)?;
    Ok(q_sum(p, d, lambda, x, cfg))
}

fn q_sum(p: u64, d: &ProductDigitSet, lambda: &[Rational], x: f64, cfg: &EvalConfig) -> f64 {
    lambda
        .iter()
        .map(|l| {
            let n0 = truncation_level(p, d.max_digit(), (l.to_f64() + x).abs(), cfg.tail_epsilon);
            shifted_product(p, d, l, x, n0).norm_sqr()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFailure {
    pub a: Rational,
    pub b: Rational,
}

/// Number of failing pairs kept verbatim in a report.
pub const MAX_LISTED_FAILURES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub frequencies: usize,
    pub orthogonal_pairs_checked: u64,
    pub orthogonal_failure_count: u64,
    /// The first failing pairs in lexicographic order, at most [`MAX_LISTED_FAILURES`].
    pub orthogonal_failures: Vec<PairFailure>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    /// Largest number of mask factors used for any sampled evaluation.
    pub truncation_level: Option<u32>,
    pub samples: usize,
    pub sample_seed: u64,
}

fn common_numerators(lambda: &[Rational]) -> Option<(BigInt, Vec<i128>)> {
    let den = lambda
        .iter()
        .fold(BigInt::one(), |acc, l| acc.lcm(l.denom()));
    let nums = lambda
        .iter()
        .map(|l| (l.numer() * (&den / l.denom())).to_i128())
        .collect::<Option<Vec<_>>>()?;
    Some((den, nums))
}

/// Checks every unordered pair `lambda_i != lambda_j` for `lambda_i - lambda_j ∈ Z(mu_hat)`.
pub fn orthogonality_report(
    p: u64,
    d: &ProductDigitSet,
    lambda: &[Rational],
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<VerificationReport> {
    check_p(p)?;
    let n = lambda.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs > cfg.pair_budget {
        return Err(Error::BudgetExceeded {
            needed: pairs as u128,
            budget: cfg.pair_budget,
        });
    }
    let mut sorted = lambda.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("lambda", "frequencies must be distinct"));
    }
    let fast = match common_numerators(&sorted) {
        Some((den, nums)) => ZeroTester::new(p, d, &den)?.map(|t| (t, nums)),
        None => None,
    };

    let rows: Vec<Result<(u64, Vec<usize>)>> = exec.map_range(0..n, |i| {
        let i = i as usize;
        let mut count = 0u64;
        let mut listed = Vec::new();
        for j in i + 1..sorted.len() {
            let hit = match &fast {
                Some((t, nums)) => nums[j].checked_sub(nums[i]).and_then(|c| t.is_zero(c)),
                None => None,
            };
            let zero = match hit {
                Some(z) => z,
                None => mu_hat_zero_member(p, d, &(&sorted[j] - &sorted[i]))?,
            };
            if !zero {
                count += 1;
                if listed.len() < MAX_LISTED_FAILURES {
                    listed.push(j);
                }
            }
        }
        Ok((count, listed))
    });

    let mut failure_count = 0u64;
    let mut failures = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let (count, listed) = row?;
        failure_count += count;
        for j in listed {
            if failures.len() < MAX_LISTED_FAILURES {
                failures.push(PairFailure {
                    a: sorted[i].clone(),
                    b: sorted[j].clone(),
                });
            }
        }
    }
    Ok(VerificationReport {
        frequencies: sorted.len(),
        orthogonal_pairs_checked: pairs,
        orthogonal_failure_count: failure_count,
        orthogonal_failures: failures,
        q_min: None,
        q_max: None,
        truncation_level: None,
        samples: 0,
        sample_seed: cfg.sample_seed,
    })
}

/// Orthogonality plus `Q` at `cfg.sample_count` seeded points of `[0, 1)`.
pub fn verification_report(
    p: u64,
    d: &ProductDigitSet,
    lambda: &[Rational],
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<VerificationReport> {
    cfg.validate()?;
    let mut report = orthogonality_report(p, d, lambda, cfg, exec)?;
    let xs = cfg.samples();
    let qs = exec.map(&xs, |&x| q_sum(p, d, lambda, x, cfg));
    report.q_min = qs.iter().copied().reduce(f64::min);
    report.q_max = qs.iter().copied().reduce(f64::max);
    let reach = lambda.iter().map(|l| l.to_f64().abs()).fold(0.0, f64::max) + 1.0;
    report.truncation_level = Some(truncation_level(p, d.max_digit(), reach, cfg.tail_epsilon));
    report.samples = xs.len();
    Ok(report)
}

/// `Q` at each point of a uniform grid on `[0, 1)`, for plotting.
pub fn q_curve(
    p: u64,
    d: &ProductDigitSet,
    lambda: &[Rational],
    points: usize,
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<Vec<(f64, f64)>> {
    check_p(p)?;
    let xs: Vec<f64> = (0..points).map(|i| i as f64 / points as f64).collect();
    Ok(exec.map(&xs, |&x| (x, q_sum(p, d, lambda, x, cfg))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    /// Caller-supplied label: a level or a window radius.
    pub label: u64,
    pub size: usize,
    pub q_min: f64,
    pub q_max: f64,
}

/// `Q` over nested truncations evaluated at the same seeded samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub sample_seed: u64,
    pub layers: Vec<LayerSummary>,
    /// `Q_k(x) <= Q_{k+1}(x)` for every sample, compared exactly.
    pub pointwise_nondecreasing: bool,
    pub min_nondecreasing: bool,
    /// Every sampled value is at most `1 + q_tolerance`.
    pub within_upper_bound: bool,
    pub q_tolerance: f64,
}

/// Evaluates `Q` on each of the nested sets `layers[0] ⊆ layers[1] ⊆ ...`.
///
/// Each layer's sum is the previous one plus the new terms, so the recorded
/// values are nondecreasing in floating point as well.
pub fn probe_nested(
    p: u64,
    d: &ProductDigitSet,
    layers: &[(u64, Vec<Rational>)],
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<ProbeReport> {
    check_p(p)?;
    cfg.validate()?;
    let mut deltas: Vec<Vec<Rational>> = Vec::with_capacity(layers.len());
    let mut prev: Vec<Rational> = Vec::new();
    for (label, set) in layers {
        let mut cur = set.clone();
        cur.sort();
        cur.dedup();
        if let Some(missing) = prev.iter().find(|l| cur.binary_search(l).is_err()) {
            return Err(invalid(
                "layers",
                format!("layer {label} does not contain {missing} from the previous layer"),
            ));
        }
        deltas.push(
            cur.iter()
                .filter(|l| prev.binary_search(l).is_err())
                .cloned()
                .collect(),
        );
        prev = cur;
    }

    let xs = cfg.samples();
    let per_sample: Vec<Vec<f64>> = exec.map(&xs, |&x| {
        let mut acc = 0.0;
        deltas
            .iter()
            .map(|delta| {
                acc += q_sum(p, d, delta, x, cfg);
                acc
            })
            .collect()
    });

    let mut summaries = Vec::with_capacity(layers.len());
    let mut size = 0usize;
    for (k, (label, _)) in layers.iter().enumerate() {
        size += deltas[k].len();
        let col = per_sample.iter().map(|row| row[k]);
        summaries.push(LayerSummary {
            label: *label,
            size,
            q_min: col.clone().fold(f64::INFINITY, f64::min),
            q_max: col.fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let pointwise = per_sample.iter().all(|row| row.windows(2).all(|w| w[0] <= w[1]));
    let min_nd = summaries.windows(2).all(|w| w[0].q_min <= w[1].q_min);
    let upper = summaries.iter().all(|s| s.q_max <= 1.0 + cfg.q_tolerance);
    Ok(ProbeReport {
        samples: xs.len(),
        sample_seed: cfg.sample_seed,
        layers: summaries,
        pointwise_nondecreasing: pointwise,
        min_nondecreasing: min_nd,
        within_upper_bound: upper,
        q_tolerance: cfg.q_tolerance,
    })
}

/// `(Z + offsets) ∩ [-radius, radius]`, sorted.
pub fn lattice_window(offsets: &[Rational], radius: u64) -> Vec<Rational> {
    let r = Rational::from_integer(BigInt::from(radius));
    let mut out = Vec::new();
    for o in offsets {
        let base = o.numer().div_floor(o.denom());
        let frac = o - &Rational::from_integer(base);
        let radius = radius as i128;
        for k in -radius - 1..=radius + 1 {
            let v = &frac + &Rational::from_integer(k);
            if v.abs() <= r {
                out.push(v);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// `true` iff `|value| < bound`, with `bound` typically `tail_epsilon + 1e-12`.
pub fn below(value: Complex64, bound: f64) -> bool {
    value.norm() < bound
}

/// `|mu_hat(xi) - conj(mu_hat(-xi))|`.
pub fn conjugate_gap(p: u64, d: &ProductDigitSet, xi: f64, cfg: &EvalConfig) -> Result<f64> {
    let (a, _) = mu_hat(p, d, xi, cfg)?;
    let (b, _) = mu_hat(p, d, -xi, cfg)?;
    Ok((a - b.conj()).norm())
}

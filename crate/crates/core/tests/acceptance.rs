//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero on any failure not listed as known, or on a listed one that passes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selfsim::arith::factorize;
use selfsim::decision::{compute_d_scan, decide, decompose, DValue};
use selfsim::fourier::{lattice_window, orthogonality_report, probe_nested, EvalConfig};
use selfsim::spectrum::{
    build_d2, build_freq_set, gcd_difference_certificate, hadamard_check, BuildOptions, HADAMARD_TOL,
};
use selfsim::tiling::{distinct_sums_check, tile_decide, Agreement, TileConfig, DEFAULT_WORD_BUDGET};
use selfsim::{build_spectrum, Exec, GenericDigitSet, ProductDigitSet, Rational};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail = format!("{} [{:.2?}]", o.detail, elapsed);
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail = format!("{} exceeds {:?}", o.detail, limit);
        }
    }
    o
}

fn valuation(mut n: u64, q: u64) -> u32 {
    let mut v = 0;
    while n.is_multiple_of(q) {
        n /= q;
        v += 1;
    }
    v
}

fn radical(n: u64) -> u64 {
    factorize(n).unwrap().primes().product()
}

/// Scan over m = 1..=5000 at p = 72, N = 12, L = 4 through the CLI.
fn scan_p72() -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = selfsim::cli::run(
        ["selfsim", "scan", "--p", "72", "--N", "12", "--L", "4", "--m", "1..5000"],
        &mut out,
        &mut err,
    );
    let text = String::from_utf8(out).unwrap();
    let last = text.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(last).unwrap_or_default();
    let spectral = v["summary"]["spectral"].as_u64();
    let scanned = v["summary"]["scanned"].as_u64();
    outcome(
        code == 0 && spectral == Some(0) && scanned == Some(5000),
        format!("exit {code}, scanned {scanned:?}, spectral {spectral:?}"),
    )
}

/// p = 144, N = 12, L = 4: spectral exactly for m = 2^(4k+2) 3^t m', t >= 2k+1, gcd(m', 6) = 1.
fn closed_form_p144() -> Outcome {
    let mut mismatches = Vec::new();
    let mut spectral = 0;
    for m in 1..=20000u64 {
        let t1 = valuation(m, 2);
        let t2 = valuation(m, 3);
        let want = t1 % 4 == 2 && t2 > 2 * ((t1 - 2) / 4);
        let got = decide(&ProductDigitSet::new(12, m, 4).unwrap(), 144).unwrap().spectral;
        spectral += got as u32;
        if want != got {
            mismatches.push(m);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{spectral} spectral, {} mismatches {:?}", mismatches.len(), &mismatches[..mismatches.len().min(5)]),
    )
}

/// p = 4, D = {0, 1, 8, 9}.
fn four_digit_bundle() -> Outcome {
    let d = ProductDigitSet::new(2, 8, 2).unwrap();
    let spectral = decide(&d, 4).unwrap().spectral;
    let tile = tile_decide(2, 2, 8, &TileConfig::default(), Exec::default()).unwrap();
    let b = GenericDigitSet::new([0, 1, 8, 9]).unwrap();
    let sums = distinct_sums_check(4, &b, 6, DEFAULT_WORD_BUDGET, Exec::default()).unwrap();
    let s = build_spectrum(&d, 4, &BuildOptions { levels: 4, ..Default::default() }).unwrap();
    let quarter: Rational = "1/4".parse().unwrap();
    let mut want: Vec<Rational> = (0..256i64)
        .flat_map(|k| [Rational::from(k), Rational::from(k) + quarter.clone()])
        .filter(|x| x.to_f64() < 256.0)
        .collect();
    want.sort();
    let rep = orthogonality_report(4, &d, &s.lambda, &EvalConfig::default(), Exec::default()).unwrap();
    let pass = spectral
        && tile.arithmetic_tile
        && tile.agreement == Agreement::Consistent
        && sums.count() == 4096
        && sums.witness.is_none()
        && s.lambda == want
        && rep.orthogonal_failure_count == 0;
    outcome(
        pass,
        format!(
            "spectral {spectral}, tile {} ({:?}), depth-6 sums {}, spectrum {} elements (matches {}), {} pairs / {} failures",
            tile.arithmetic_tile,
            tile.agreement,
            sums.count(),
            s.lambda.len(),
            s.lambda == want,
            rep.orthogonal_pairs_checked,
            rep.orthogonal_failure_count
        ),
    )
}

/// Literal scan for d against the per-prime formula on random triples with rad(L) | p.
fn d_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut bad = Vec::new();
    for _ in 0..10_000 {
        let l = rng.gen_range(2..=50u64);
        let rad = radical(l);
        let p = rad * rng.gen_range(1..=10_000 / rad);
        let m = rng.gen_range(1..=10_000u64);
        let scan = compute_d_scan(m, l, p).unwrap();
        let dec = decompose(2, l, m, p).unwrap();
        if scan != DValue::Finite(dec.d_from_exponents()) || dec.d != dec.d_from_exponents() {
            bad.push((m, l, p));
        }
    }
    outcome(bad.is_empty(), format!("10000 triples, {} disagreements {:?}", bad.len(), &bad[..bad.len().min(3)]))
}

/// Every spectral (N, L <= 10, NL | p <= 400, m <= 100) has a Hadamard triple (p, D2, pℒ).
fn hadamard_sweep() -> Outcome {
    let mut points = 0u64;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for n in 2..=10u64 {
        for l in 2..=10u64 {
            for p in (n * l..=400).step_by((n * l) as usize) {
                for m in 1..=100u64 {
                    let cert = decide(&ProductDigitSet::new(n, m, l).unwrap(), p).unwrap();
                    if !cert.spectral {
                        continue;
                    }
                    points += 1;
                    let dec = cert.decomposition.unwrap();
                    let d2 = build_d2(&dec, n, l).unwrap();
                    let fs = GenericDigitSet::new(build_freq_set(&dec, p, n, l).unwrap()).unwrap();
                    let h = hadamard_check(p, &d2, &fs).unwrap();
                    let g = gcd_difference_certificate(&d2).unwrap();
                    worst = worst.max(h.unitarity_defect).max(h.max_mask_at_differences);
                    if !(h.unitarity_defect < HADAMARD_TOL && h.holds && g) {
                        failures.push((n, l, m, p));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty() && points > 0,
        format!("{points} spectral points, worst defect {worst:e}, {} failures {:?}", failures.len(), &failures[..failures.len().min(3)]),
    )
}

/// N, L in 2..=5, m in 1..=60, p = NL, direct digit sets only.
///
/// Undecided non-tiles are re-run one level deeper; that result is reported
/// alongside but does not change the verdict at the stated depth.
fn tiling_grid() -> Outcome {
    let cfg = TileConfig::default();
    let (mut tiles, mut non_tiles, mut contradictions, mut bad_witness) = (0, 0, 0, 0);
    let mut undecided = Vec::new();
    for n in 2..=5u64 {
        for l in 2..=5u64 {
            for m in 1..=60u64 {
                if !ProductDigitSet::new(n, m, l).unwrap().is_direct() {
                    continue;
                }
                let v = tile_decide(n, l, m, &cfg, Exec::default()).unwrap();
                if v.arithmetic_tile {
                    tiles += 1;
                } else {
                    non_tiles += 1;
                }
                if let Some(w) = &v.collision_witness {
                    if !w.replay(v.p) {
                        bad_witness += 1;
                    }
                }
                match v.agreement {
                    Agreement::Consistent => {}
                    Agreement::Contradiction => contradictions += 1,
                    Agreement::UndecidedByBruteForce => undecided.push((n, l, m, v.arithmetic_tile)),
                }
            }
        }
    }
    let deeper = TileConfig { max_k: 6, ..cfg };
    let resolved_at_6 = undecided
        .iter()
        .filter(|&&(n, l, m, tile)| {
            let v = tile_decide(n, l, m, &deeper, Exec::default()).unwrap();
            !tile && v.collision_witness.map(|w| w.k == 6 && w.replay(v.p)).unwrap_or(false)
        })
        .count();
    let points: Vec<String> = undecided.iter().map(|(n, l, m, _)| format!("({n},{l},{m})")).collect();
    outcome(
        undecided.is_empty() && contradictions == 0 && bad_witness == 0,
        format!(
            "{tiles} tiles, {non_tiles} non-tiles, {} undecided at k<=5 {}, {contradictions} contradictions, \
             {bad_witness} bad witnesses; {resolved_at_6}/{} undecided non-tiles collide at k=6",
            undecided.len(),
            points.join(" "),
            undecided.len()
        ),
    )
}

/// Q over (Z + {0, 1/4}) ∩ [-B, B] for B in {250, 500, 1000, 2000}, 100 seeded samples.
fn q_windows() -> Outcome {
    let d = ProductDigitSet::new(2, 8, 2).unwrap();
    let offsets: Vec<Rational> = ["0", "1/4"].iter().map(|s| s.parse().unwrap()).collect();
    let layers: Vec<(u64, Vec<Rational>)> = [250u64, 500, 1000, 2000]
        .iter()
        .map(|&b| (b, lattice_window(&offsets, b)))
        .collect();
    let cfg = EvalConfig::default();
    let rep = probe_nested(4, &d, &layers, &cfg, Exec::default()).unwrap();
    let mins: Vec<String> = rep.layers.iter().map(|l| format!("B={}: {:.6}", l.label, l.q_min)).collect();
    let qmax = rep.layers.iter().map(|l| l.q_max).fold(f64::MIN, f64::max);
    let last = rep.layers.last().unwrap().q_min;
    outcome(
        rep.min_nondecreasing && rep.pointwise_nondecreasing && rep.within_upper_bound && last >= 0.98,
        format!("min Q {}; max Q {qmax:.9}", mins.join(", ")),
    )
}

/// Spectral implies NL | p, and every prime of L dividing N carries the maximal d.
fn invariant_grid() -> Outcome {
    let mut spectral = 0u64;
    let mut divisibility = 0u64;
    let mut prime_d = 0u64;
    for n in 2..=10u64 {
        for l in 2..=10u64 {
            for p in 2..=400u64 {
                for m in 1..=100u64 {
                    let cert = decide(&ProductDigitSet::new(n, m, l).unwrap(), p).unwrap();
                    if !cert.spectral {
                        continue;
                    }
                    spectral += 1;
                    if p % (n * l) != 0 {
                        divisibility += 1;
                    }
                    let dec = cert.decomposition.unwrap();
                    if dec.primes.iter().any(|r| n % r.prime == 0 && r.d != dec.d) {
                        prime_d += 1;
                    }
                }
            }
        }
    }
    outcome(
        divisibility == 0 && prime_d == 0 && spectral > 0,
        format!("{spectral} spectral points, {divisibility} without NL | p, {prime_d} per-prime d violations"),
    )
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 scan p=72 N=12 L=4 m<=5000 has no spectral m", Box::new(|| timed(Some(Duration::from_secs(5)), scan_p72))),
        ("2 p=144 N=12 L=4 m<=20000 matches closed form", Box::new(|| timed(Some(Duration::from_secs(10)), closed_form_p144))),
        ("3 p=4 D={0,1,8,9} decide/tile/spectrum/orthogonality", Box::new(|| timed(None, four_digit_bundle))),
        ("4 d scan equals per-prime d on 10^4 triples", Box::new(|| timed(Some(Duration::from_secs(5)), d_oracle))),
        ("5 Hadamard triple and gcd certificate sweep", Box::new(|| timed(None, hadamard_sweep))),
        ("6 tile verdict agrees with brute force on grid", Box::new(|| timed(None, tiling_grid))),
        ("7 Q windows nondecreasing, >= 0.98 at B=2000, <= 1+1e-6", Box::new(|| timed(Some(Duration::from_secs(60)), q_windows))),
        ("8 spectral invariants over grid", Box::new(|| timed(None, invariant_grid))),
    ];
    // Criteria that cannot hold as stated, with the reason. They still print
    // FAIL; the run only errors if one of them unexpectedly passes.
    let known: [(&str, &str); 1] = [(
        "6",
        "five direct non-tiles, (2,2,33) (2,2,37) (2,4,33) (2,5,49) (2,5,51), have all depth-k sums \
         distinct for k <= 5 and first collide at k = 6",
    )];
    let mut unexpected = 0;
    for (name, f) in criteria {
        let o = f();
        let id = name.split_whitespace().next().unwrap_or_default();
        let reason = known.iter().find(|(k, _)| *k == id).map(|(_, r)| *r);
        println!("criterion {name}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        match (o.pass, reason) {
            (false, Some(r)) => println!("  known failure: {r}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                println!("  criterion {id} was listed as a known failure but passed; update the list");
                unexpected += 1;
            }
            (true, None) => {}
        }
    }
    println!("acceptance: {unexpected} unexpected outcomes");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
